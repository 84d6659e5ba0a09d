import { describe, expect, it } from "vitest";
import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { parseReportCsv } from "../src/csv.js";
import { buildStrongErrorSvg, renderStrongError } from "../src/strongError.js";
import { run } from "../src/main.js";

const LEVELS_PATH = new URL("../testdata/levels.csv", import.meta.url).pathname;

function syntheticCsv(slope: number, intercept: number): string {
  // mse follows the power law exactly, so the metadata fit is exact too
  const dts = [2 ** -5, 2 ** -7, 2 ** -9, 2 ** -11];
  const rows = dts
    .map((dt) => {
      const mse = Math.exp(intercept) * dt ** slope;
      return `${dt},${mse},${mse * 0.1},100,${Math.sqrt(mse)},${mse ** 0.75}`;
    })
    .join("\n");
  return (
    `# schema=1\n# kind=strong_error\n# fitted_slope=${slope}\n` +
    `# fit_intercept=${intercept}\n# reference_dt=0.000244140625\n# seed=0\n` +
    `dt,mse,ci_halfwidth,n_paths,err_s1,err_s15\n${rows}\n`
  );
}

describe("strong-error figure", () => {
  it("renders the acceptance-run CSV with verbatim slope annotation", () => {
    const svg = buildStrongErrorSvg({ input: LEVELS_PATH, refSlope: 1.0 });
    const meta = parseReportCsv(readFileSync(LEVELS_PATH, "utf8")).meta;
    // the annotation must echo the stored field exactly, not a reformatted
    // or recomputed value
    expect(svg).toContain(`slope = ${meta["fitted_slope"]}`);
    expect(Number(meta["fitted_slope"])).toBeGreaterThanOrEqual(0.8);
    expect(Number(meta["fitted_slope"])).toBeLessThanOrEqual(1.2);
    expect(svg).toContain("stroke-dasharray");
    expect((svg.match(/<circle/g) ?? []).length).toBeGreaterThanOrEqual(12);
    expect(svg).toContain("</svg>");
  });

  it("overlays the fitted line on the reference line when mse = dt", () => {
    const report = parseReportCsv(syntheticCsv(1.0, 0.0));
    const svg = renderStrongError(report, 1.0);
    const fitted = svg.match(/<polyline points="([^"]+)"/);
    expect(fitted).not.toBeNull();
    const [p0, p1] = fitted![1].split(" ").map((p) => p.split(",").map(Number));
    const dashed = svg.match(
      /<line x1="([^"]+)" y1="([^"]+)" x2="([^"]+)" y2="([^"]+)"[^>]*stroke-dasharray/,
    );
    expect(dashed).not.toBeNull();
    const [x1, y1, x2, y2] = dashed!.slice(1, 5).map(Number);
    expect(x1).toBeCloseTo(p0[0], 6);
    expect(y1).toBeCloseTo(p0[1], 6);
    expect(x2).toBeCloseTo(p1[0], 6);
    expect(y2).toBeCloseTo(p1[1], 6);
  });

  it("keeps distinct lines when the fitted slope differs from the reference",
    () => {
      const report = parseReportCsv(syntheticCsv(1.4, -0.3));
      const svg = renderStrongError(report, 1.0);
      const fitted = svg.match(/<polyline points="([^"]+)"/);
      const [p0] = fitted![1].split(" ").map((p) => p.split(",").map(Number));
      const dashed = svg.match(
        /<line x1="([^"]+)" y1="([^"]+)" x2="([^"]+)" y2="([^"]+)"[^>]*stroke-dasharray/,
      );
      const y1 = Number(dashed![2]);
      expect(Math.abs(y1 - p0[1])).toBeGreaterThan(5);
    });

  it("fails cleanly on an empty CSV without writing an image", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, "");
    const out = join(dir, "fig.svg");
    expect(run(["strong_error", "--in", empty, "--out", out])).toBe(1);
    expect(existsSync(out)).toBe(false);
  });

  it("fails on a schema mismatch", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "# schema=9\n# kind=strong_error\ndt,mse\n0.1,0.1\n");
    const out = join(dir, "fig.svg");
    expect(run(["strong_error", "--in", bad, "--out", out])).toBe(1);
    expect(existsSync(out)).toBe(false);
  });

  it("writes the figure via the CLI entry point", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const out = join(dir, "fig.svg");
    expect(
      run(["strong_error", "--in", LEVELS_PATH, "--out", out,
           "--ref-slope", "1.0"]),
    ).toBe(0);
    const svg = readFileSync(out, "utf8");
    expect(svg.startsWith("<svg")).toBe(true);
  });

  it("rejects unknown kinds and missing flags", () => {
    expect(run([])).toBe(2);
    expect(run(["histogram", "--in", "a", "--out", "b"])).toBe(2);
    expect(run(["strong_error", "--in", "a"])).toBe(2);
  });
});
