import { scaleLinear, type ScaleLinear } from "d3-scale";

import { el, esc, fmt, text, FONT } from "./svg.js";

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 46, right: 18, bottom: 50, left: 66 };

export interface Frame {
  width: number;
  height: number;
  margin: Margin;
  x: ScaleLinear<number, number>;
  y: ScaleLinear<number, number>;
}

export function makeFrame(
  width: number,
  height: number,
  margin: Margin,
  xDomain: [number, number],
  yDomain: [number, number],
): Frame {
  const x = scaleLinear().domain(xDomain).range([margin.left, width - margin.right]);
  const y = scaleLinear()
    .domain(yDomain)
    .range([height - margin.bottom, margin.top])
    .nice();
  return { width, height, margin, x, y };
}

/** Pad a data extent so curves do not sit on the frame; degenerate extents get a unit pad. */
export function padded(lo: number, hi: number, frac = 0.05): [number, number] {
  if (lo === hi) return [lo - 1, hi + 1];
  const pad = (hi - lo) * frac;
  return [lo - pad, hi + pad];
}

export function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

/** Gridlines, tick marks, tick labels, axis labels, and the plot border. */
export function axes(frame: Frame, xLabel: string, yLabel: string): string {
  const { x, y, width, height, margin } = frame;
  const [x0, x1] = x.range();
  const [y1, y0] = y.range(); // range is [bottom, top]
  let grid = "";
  let ticks = "";
  for (const t of x.ticks(8)) {
    const px = x(t);
    grid += el("line", { x1: px, y1: y0, x2: px, y2: y1, stroke: "#e6e6e6", "stroke-width": 1 });
    ticks += el("line", { x1: px, y1, x2: px, y2: y1 + 5, stroke: "#333", "stroke-width": 1 });
    ticks += text(px, y1 + 18, fmt(t), { "text-anchor": "middle" });
  }
  for (const t of y.ticks(8)) {
    const py = y(t);
    grid += el("line", { x1: x0, y1: py, x2: x1, y2: py, stroke: "#e6e6e6", "stroke-width": 1 });
    ticks += el("line", { x1: x0 - 5, y1: py, x2: x0, y2: py, stroke: "#333", "stroke-width": 1 });
    ticks += text(x0 - 8, py + 4, fmt(t), { "text-anchor": "end" });
  }
  const border = el("rect", {
    x: x0,
    y: y0,
    width: x1 - x0,
    height: y1 - y0,
    fill: "none",
    stroke: "#333",
    "stroke-width": 1,
  });
  const labels =
    text((x0 + x1) / 2, height - 12, xLabel, { "text-anchor": "middle", "font-size": 13 }) +
    el(
      "text",
      {
        x: 0,
        y: 0,
        "font-family": FONT,
        "font-size": 13,
        fill: "#333",
        "text-anchor": "middle",
        transform: `translate(16 ${(y0 + y1) / 2}) rotate(-90)`,
      },
      esc(yLabel),
    );
  return grid + border + ticks + labels;
}

export function title(frame: Frame, s: string): string {
  return text(frame.width / 2, 24, s, {
    "text-anchor": "middle",
    "font-size": 15,
    "font-weight": "bold",
    fill: "#111",
  });
}

export interface LegendEntry {
  label: string;
  color: string;
  dash?: string;
}

/** Legend box anchored inside the plot area, top-left or top-right. */
export function legend(frame: Frame, entries: LegendEntry[], anchor: "tl" | "tr"): string {
  const lineH = 18;
  const boxW = 10 + 26 + 6 + 7 * Math.max(...entries.map((e) => e.label.length)) + 10;
  const boxH = 10 + lineH * entries.length;
  const [x0, x1] = frame.x.range();
  const yTop = frame.y.range()[1] + 10;
  const xLeft = anchor === "tl" ? x0 + 10 : x1 - 10 - boxW;
  let out = el("rect", {
    x: xLeft,
    y: yTop,
    width: boxW,
    height: boxH,
    fill: "#ffffff",
    "fill-opacity": 0.85,
    stroke: "#999",
    "stroke-width": 0.5,
  });
  entries.forEach((e, i) => {
    const cy = yTop + 10 + lineH * i + 4;
    const swatch: Record<string, string | number> = {
      x1: xLeft + 10,
      y1: cy,
      x2: xLeft + 36,
      y2: cy,
      stroke: e.color,
      "stroke-width": 2.5,
    };
    if (e.dash) swatch["stroke-dasharray"] = e.dash;
    out += el("line", swatch);
    out += text(xLeft + 42, cy + 4, e.label);
  });
  return out;
}
