import { area, line } from "d3-shape";

import { DEFAULT_MARGIN, axes, legend, makeFrame, padded, round2, title } from "./chart.js";
import { numberAt, requireColumns, stringAt, type Table } from "./csv.js";
import { PALETTE, document as svgDocument, el } from "./svg.js";

const COLUMNS = ["q", "policy", "arrival_config", "total_cost", "ci_halfwidth"] as const;

export interface CostPoint {
  q: number;
  cost: number;
  ci: number;
}

export interface CostSeries {
  key: string;
  points: CostPoint[];
}

/** One series per (policy, arrival_config), points ordered by q. */
export function loadCostSeries(tables: Table[]): CostSeries[] {
  const groups = new Map<string, CostPoint[]>();
  for (const table of tables) {
    requireColumns(table, COLUMNS);
    for (let i = 0; i < table.rows.length; i++) {
      const key = `${stringAt(table, i, "policy")} / ${stringAt(table, i, "arrival_config")}`;
      const point = {
        q: numberAt(table, i, "q"),
        cost: numberAt(table, i, "total_cost"),
        ci: numberAt(table, i, "ci_halfwidth"),
      };
      const pts = groups.get(key);
      if (pts) pts.push(point);
      else groups.set(key, [point]);
    }
  }
  return [...groups.keys()].sort().map((key) => ({
    key,
    points: groups.get(key)!.slice().sort((a, b) => a.q - b.q),
  }));
}

export interface RenderOptions {
  title?: string;
  width?: number;
  height?: number;
}

/** Cost-vs-q comparison: one CI-banded curve per (policy, arrival_config). */
export function renderCostVsQ(tables: Table[], opts: RenderOptions = {}): string {
  const seriesList = loadCostSeries(tables);
  const width = opts.width ?? 760;
  const height = opts.height ?? 480;

  const qs = seriesList.flatMap((s) => s.points.map((p) => p.q));
  const los = seriesList.flatMap((s) => s.points.map((p) => p.cost - p.ci));
  const his = seriesList.flatMap((s) => s.points.map((p) => p.cost + p.ci));
  const frame = makeFrame(
    width,
    height,
    DEFAULT_MARGIN,
    padded(Math.min(...qs), Math.max(...qs)),
    padded(Math.min(...los), Math.max(...his)),
  );

  const toX = (p: CostPoint) => round2(frame.x(p.q));
  const band = area<CostPoint>()
    .x(toX)
    .y0((p) => round2(frame.y(p.cost - p.ci)))
    .y1((p) => round2(frame.y(p.cost + p.ci)));
  const curve = line<CostPoint>().x(toX).y((p) => round2(frame.y(p.cost)));

  let marks = "";
  seriesList.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    marks += el("path", { d: band(s.points) ?? "", fill: color, "fill-opacity": 0.15, class: "band" });
    if (s.points.length > 1) {
      marks += el("path", {
        d: curve(s.points) ?? "",
        fill: "none",
        stroke: color,
        "stroke-width": 2,
        class: "line",
      });
    }
    for (const p of s.points) {
      marks += el("circle", { cx: frame.x(p.q), cy: frame.y(p.cost), r: 3, fill: color });
    }
  });

  const entries = seriesList.map((s, i) => ({ label: s.key, color: PALETTE[i % PALETTE.length] }));
  const body =
    axes(frame, "q (sampling success probability)", "total average cost") +
    marks +
    legend(frame, entries, "tr") +
    title(frame, opts.title ?? "Total average cost vs q");
  return svgDocument(width, height, body);
}
