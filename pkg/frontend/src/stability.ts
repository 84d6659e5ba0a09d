/**
 * Stability decay figure: per-path state norms against the step index on a
 * log scale, from the downsampled trace CSV.  Norms at or below the plot
 * floor (1e-16, covering exact zeros) draw along the bottom edge.
 */

import {
  CsvFormatError,
  numberColumn,
  readReportCsv,
} from "./csv.js";
import {
  DEFAULT_FRAME,
  SvgBuilder,
  decadeTicks,
  makeLogAxis,
  tickLabel,
} from "./svg.js";

export const NORM_FLOOR = 1e-16;

export interface StabilitySpec {
  input: string;
}

export function buildStabilitySvg(spec: StabilitySpec): string {
  const report = readReportCsv(spec.input, "stability_traces");
  const steps = numberColumn(report, "step");
  const paths = numberColumn(report, "path");
  const norms = numberColumn(report, "norm");
  if (steps.length === 0) {
    throw new CsvFormatError("stability CSV has no data rows");
  }

  const byPath = new Map<number, Array<[number, number]>>();
  for (let i = 0; i < steps.length; i++) {
    const clamped = Math.max(norms[i], NORM_FLOOR);
    if (!byPath.has(paths[i])) byPath.set(paths[i], []);
    byPath.get(paths[i])!.push([steps[i], clamped]);
  }

  const frame = DEFAULT_FRAME;
  const svg = new SvgBuilder(frame);
  const x0 = frame.margin.left;
  const x1 = frame.width - frame.margin.right;
  const y0 = frame.height - frame.margin.bottom;
  const y1 = frame.margin.top;
  const maxStep = Math.max(...steps, 1);
  const xPx = (s: number) => x0 + (s / maxStep) * (x1 - x0);
  const yAxis = makeLogAxis(
    [...norms.map((n) => Math.max(n, NORM_FLOOR)), NORM_FLOOR],
    y0,
    y1,
  );

  svg.line(x0, y0, x1, y0, "black");
  svg.line(x0, y0, x0, y1, "black");
  for (let i = 0; i <= 4; i++) {
    const s = Math.round((i / 4) * maxStep);
    svg.line(xPx(s), y0, xPx(s), y0 + 5, "black");
    svg.text(xPx(s), y0 + 20, String(s), { anchor: "middle", size: 11 });
  }
  const ticks = decadeTicks(yAxis);
  for (const t of ticks.filter((_, i) => i % 2 === 0)) {
    const py = yAxis.toPx(t);
    svg.line(x0 - 5, py, x0, py, "black");
    svg.text(x0 - 8, py + 4, tickLabel(t), { anchor: "end", size: 11 });
  }
  svg.text((x0 + x1) / 2, frame.height - 15, "step", { anchor: "middle" });
  svg.text(20, (y0 + y1) / 2, "state norm", { anchor: "middle", rotate: true });
  svg.text((x0 + x1) / 2, 22, "path norms under the implicit scheme",
    { anchor: "middle", size: 15 });

  const pathIds = [...byPath.keys()].sort((a, b) => a - b);
  for (const p of pathIds) {
    const pts = byPath
      .get(p)!
      .map(([s, n]) => [xPx(s), yAxis.toPx(n)] as [number, number]);
    svg.polyline(pts, "steelblue", 0.8);
  }
  svg.text(x1 - 10, y1 + 16, `${pathIds.length} paths`, { anchor: "end", size: 11 });
  return svg.render();
}
