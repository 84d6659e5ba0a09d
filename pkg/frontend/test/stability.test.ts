import { describe, expect, it } from "vitest";
import { mkdtempSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { buildStabilitySvg, NORM_FLOOR } from "../src/stability.js";
import { run } from "../src/main.js";

const TRACES_PATH = new URL(
  "../testdata/stability_traces.csv",
  import.meta.url,
).pathname;

function syntheticTraces(norm: (step: number, path: number) => number): string {
  const lines = ["# schema=1", "# kind=stability_traces", "# paths=2",
    "step,t,path,norm,lasalle_sum"];
  for (const step of [0, 10, 20, 30]) {
    for (const path of [0, 1]) {
      lines.push(`${step},${step * 0.01},${path},${norm(step, path)},0.0`);
    }
  }
  return lines.join("\n") + "\n";
}

describe("stability decay figure", () => {
  it("renders one polyline per path from the real trace file", () => {
    const svg = buildStabilitySvg({ input: TRACES_PATH });
    const polylines = svg.match(/<polyline/g) ?? [];
    expect(polylines.length).toBe(12);
    expect(svg).toContain("12 paths");
  });

  it("draws all-zero traces as a flat line at the plot floor", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const file = join(dir, "zeros.csv");
    writeFileSync(file, syntheticTraces(() => 0.0));
    const svg = buildStabilitySvg({ input: file });
    const pts = (svg.match(/<polyline points="([^"]+)"/) ?? [])[1]
      .split(" ")
      .map((p) => Number(p.split(",")[1]));
    // every y coordinate sits at the same (floor) level
    expect(new Set(pts).size).toBe(1);
    expect(NORM_FLOOR).toBe(1e-16);
  });

  it("rejects a CSV of the wrong kind", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const file = join(dir, "wrong.csv");
    writeFileSync(file,
      "# schema=1\n# kind=strong_error\nstep,t,path,norm,lasalle_sum\n");
    const out = join(dir, "fig.svg");
    expect(run(["stability_decay", "--in", file, "--out", out])).toBe(1);
  });

  it("writes the figure via the CLI entry point", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const out = join(dir, "fig.svg");
    expect(run(["stability_decay", "--in", TRACES_PATH, "--out", out])).toBe(0);
  });
});
