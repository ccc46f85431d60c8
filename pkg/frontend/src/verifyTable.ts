import { maybeNumberAt, numberAt, requireColumns, stringAt, type Table } from "./csv.js";
import { document as svgDocument, el, text } from "./svg.js";

const COLUMNS = ["case_id", "family", "quantity", "closed_form", "empirical", "rel_err", "status"] as const;

const STATUS_COLOR: Record<string, string> = {
  pass: "#2ca02c",
  fail: "#d62728",
  info: "#7f7f7f",
};

const HEADERS = ["case", "family", "quantity", "closed form", "empirical", "rel err", "status"];
const WIDTHS = [150, 100, 110, 100, 100, 90, 70];

function sig(v: number): string {
  return String(Number(v.toPrecision(6)));
}

export interface RenderOptions {
  title?: string;
  width?: number;
  height?: number;
}

/** Closed-form-vs-simulation comparison rendered as a colored table. */
export function renderVerifyTable(tables: Table[], opts: RenderOptions = {}): string {
  const table = tables[0];
  requireColumns(table, COLUMNS);

  const rowH = 22;
  const top = 56;
  const left = 20;
  const width = opts.width ?? left * 2 + WIDTHS.reduce((a, b) => a + b, 0);
  const height = opts.height ?? top + rowH * (table.rows.length + 1) + 16;

  const colX: number[] = [];
  let acc = left;
  for (const w of WIDTHS) {
    colX.push(acc);
    acc += w;
  }

  let body = text(width / 2, 28, opts.title ?? "Closed-form verification", {
    "text-anchor": "middle",
    "font-size": 15,
    "font-weight": "bold",
    fill: "#111",
  });
  HEADERS.forEach((h, j) => {
    body += text(colX[j], top, h, { "font-weight": "bold" });
  });
  body += el("line", {
    x1: left,
    y1: top + 6,
    x2: width - left,
    y2: top + 6,
    stroke: "#333",
    "stroke-width": 1,
  });

  for (let i = 0; i < table.rows.length; i++) {
    const y = top + rowH * (i + 1);
    if (i % 2 === 1) {
      body += el("rect", {
        x: left - 4,
        y: y - 14,
        width: width - 2 * (left - 4),
        height: rowH,
        fill: "#f5f5f5",
      });
    }
    const relErr = maybeNumberAt(table, i, "rel_err");
    const status = stringAt(table, i, "status");
    const cells = [
      stringAt(table, i, "case_id"),
      stringAt(table, i, "family"),
      stringAt(table, i, "quantity"),
      sig(numberAt(table, i, "closed_form")),
      sig(numberAt(table, i, "empirical")),
      relErr === null ? "-" : relErr.toExponential(2),
    ];
    cells.forEach((c, j) => {
      body += text(colX[j], y, c);
    });
    body += text(colX[6], y, status, {
      fill: STATUS_COLOR[status] ?? "#333",
      "font-weight": "bold",
    });
  }
  return svgDocument(width, height, body);
}
