/**
 * Log-log strong-error figure: per-level mean squared endpoint errors with
 * 95% error bars (whiskers capped by circles), the fitted regression line
 * taken verbatim from the CSV metadata, and a dashed reference-slope line
 * anchored at the coarsest level's fitted value.
 *
 * No statistic is recomputed here: slope and intercept come from the CSV
 * comment header and the annotation echoes the stored slope string
 * unchanged.
 */

import {
  CsvFormatError,
  numberColumn,
  readReportCsv,
  type ReportCsv,
} from "./csv.js";
import {
  DEFAULT_FRAME,
  SvgBuilder,
  drawLogLogAxes,
  makeLogAxis,
} from "./svg.js";

export interface StrongErrorSpec {
  input: string;
  refSlope: number;
}

export function buildStrongErrorSvg(spec: StrongErrorSpec): string {
  const report = readReportCsv(spec.input, "strong_error");
  return renderStrongError(report, spec.refSlope);
}

export function renderStrongError(report: ReportCsv, refSlope: number): string {
  const dt = numberColumn(report, "dt");
  const mse = numberColumn(report, "mse");
  const ci = numberColumn(report, "ci_halfwidth");
  if (dt.length === 0) {
    throw new CsvFormatError("strong-error CSV has no data rows");
  }
  const slopeText = report.meta["fitted_slope"];
  const slope = Number(slopeText);
  const intercept = Number(report.meta["fit_intercept"]);
  if (!Number.isFinite(slope) || !Number.isFinite(intercept)) {
    throw new CsvFormatError("missing fitted_slope / fit_intercept metadata");
  }

  const frame = DEFAULT_FRAME;
  const svg = new SvgBuilder(frame);
  const xAxis = makeLogAxis(
    dt,
    frame.margin.left,
    frame.width - frame.margin.right,
  );
  const lows = mse.map((m, i) => Math.max(m - ci[i], m * 1e-3));
  const highs = mse.map((m, i) => m + ci[i]);
  const yAxis = makeLogAxis(
    [...lows, ...highs, ...mse],
    frame.height - frame.margin.bottom,
    frame.margin.top,
  );
  drawLogLogAxes(svg, xAxis, yAxis, "step size", "mean squared endpoint error",
    "strong error against coupled fine-step reference");

  const fitted = (x: number) => Math.exp(intercept + slope * Math.log(x));

  // fitted regression line across the data range (values from metadata)
  const xs = [Math.min(...dt) / 1.2, Math.max(...dt) * 1.2];
  svg.polyline(
    xs.map((x) => [xAxis.toPx(x), yAxis.toPx(fitted(x))] as [number, number]),
    "steelblue",
    1.5,
  );

  // dashed reference-slope line anchored at the coarsest level's fitted value
  const anchorX = Math.max(...dt);
  const anchorY = fitted(anchorX);
  const refAt = (x: number) => anchorY * (x / anchorX) ** refSlope;
  svg.line(
    xAxis.toPx(xs[0]),
    yAxis.toPx(refAt(xs[0])),
    xAxis.toPx(xs[1]),
    yAxis.toPx(refAt(xs[1])),
    "gray",
    { width: 1.5, dash: "6,4" },
  );

  // error bars with circle caps, data point as a filled dot
  for (let i = 0; i < dt.length; i++) {
    const px = xAxis.toPx(dt[i]);
    const yLow = yAxis.toPx(lows[i]);
    const yHigh = yAxis.toPx(highs[i]);
    svg.line(px, yLow, px, yHigh, "black");
    svg.circle(px, yLow, 3, "black", "none");
    svg.circle(px, yHigh, 3, "black", "none");
    svg.circle(px, yAxis.toPx(mse[i]), 2.5, "black", "black");
  }

  svg.text(frame.margin.left + 12, frame.margin.top + 18,
    `slope = ${slopeText}`, { size: 13 });
  svg.text(frame.margin.left + 12, frame.margin.top + 36,
    `reference slope = ${refSlope} (dashed)`, { size: 11 });
  return svg.render();
}
