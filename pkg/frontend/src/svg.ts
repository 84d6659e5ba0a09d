/**
 * Minimal deterministic SVG scaffolding: log-log axes with decade ticks
 * plus line/marker primitives.  Everything is plain string assembly so
 * output bytes depend only on the input numbers.
 */

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 640,
  height: 480,
  margin: { top: 40, right: 30, bottom: 60, left: 80 },
};

export interface LogAxis {
  min: number; // data minimum (positive)
  max: number;
  toPx: (value: number) => number;
}

function fmt(v: number): string {
  return Number(v.toFixed(3)).toString();
}

export function makeLogAxis(
  values: number[],
  pxLow: number,
  pxHigh: number,
  padFactor = 1.5,
): LogAxis {
  const positives = values.filter((v) => v > 0);
  if (positives.length === 0) {
    throw new Error("log axis needs at least one positive value");
  }
  const min = Math.min(...positives) / padFactor;
  const max = Math.max(...positives) * padFactor;
  const l0 = Math.log10(min);
  const l1 = Math.log10(max);
  const toPx = (value: number) =>
    pxLow + ((Math.log10(value) - l0) / (l1 - l0)) * (pxHigh - pxLow);
  return { min, max, toPx };
}

export function decadeTicks(axis: LogAxis): number[] {
  const ticks: number[] = [];
  for (
    let e = Math.ceil(Math.log10(axis.min));
    e <= Math.floor(Math.log10(axis.max));
    e++
  ) {
    ticks.push(10 ** e);
  }
  return ticks;
}

export function tickLabel(value: number): string {
  const e = Math.round(Math.log10(value));
  return `1e${e}`;
}

export class SvgBuilder {
  private parts: string[] = [];

  constructor(readonly frame: Frame) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" ` +
        `height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}">`,
      `<rect width="${frame.width}" height="${frame.height}" fill="white"/>`,
    );
  }

  line(
    x1: number,
    y1: number,
    x2: number,
    y2: number,
    stroke: string,
    opts: { width?: number; dash?: string } = {},
  ): void {
    const dash = opts.dash ? ` stroke-dasharray="${opts.dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${opts.width ?? 1}"${dash}/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1): void {
    const joined = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${joined}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${width}"/>`,
    );
  }

  circle(cx: number, cy: number, r: number, stroke: string, fill: string): void {
    this.parts.push(
      `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${r}" stroke="${stroke}" ` +
        `fill="${fill}"/>`,
    );
  }

  text(
    x: number,
    y: number,
    content: string,
    opts: { anchor?: string; size?: number; rotate?: boolean } = {},
  ): void {
    const anchor = opts.anchor ?? "start";
    const size = opts.size ?? 13;
    const transform = opts.rotate
      ? ` transform="rotate(-90 ${fmt(x)} ${fmt(y)})"`
      : "";
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" ` +
        `font-family="sans-serif" font-size="${size}"${transform}>` +
        `${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Axes box, decade ticks and labels shared by both figure kinds. */
export function drawLogLogAxes(
  svg: SvgBuilder,
  xAxis: LogAxis,
  yAxis: LogAxis,
  xLabel: string,
  yLabel: string,
  title: string,
): void {
  const { width, height, margin } = svg.frame;
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = height - margin.bottom;
  const y1 = margin.top;
  svg.line(x0, y0, x1, y0, "black");
  svg.line(x0, y0, x0, y1, "black");
  for (const t of decadeTicks(xAxis)) {
    const px = xAxis.toPx(t);
    svg.line(px, y0, px, y0 + 5, "black");
    svg.text(px, y0 + 20, tickLabel(t), { anchor: "middle", size: 11 });
  }
  for (const t of decadeTicks(yAxis)) {
    const py = yAxis.toPx(t);
    svg.line(x0 - 5, py, x0, py, "black");
    svg.text(x0 - 8, py + 4, tickLabel(t), { anchor: "end", size: 11 });
  }
  svg.text((x0 + x1) / 2, height - 15, xLabel, { anchor: "middle" });
  svg.text(20, (y0 + y1) / 2, yLabel, { anchor: "middle", rotate: true });
  svg.text((x0 + x1) / 2, 22, title, { anchor: "middle", size: 15 });
}
