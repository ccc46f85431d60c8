import { mkdirSync, writeFileSync } from "fs";
import { dirname } from "path";

import { readTable } from "./csv.js";
import { renderCostVsQ } from "./costVsQ.js";
import { renderQueueTrace } from "./queueTrace.js";
import { renderVerifyTable } from "./verifyTable.js";
import { validateSpec, type PlotSpec } from "./spec.js";

/** Produce the figure as an SVG string without touching the filesystem output. */
export function renderFigure(spec: PlotSpec): string {
  validateSpec(spec);
  const tables = spec.inputs.map(readTable);
  const opts = { title: spec.title, width: spec.width, height: spec.height };
  switch (spec.kind) {
    case "cost_vs_q":
      return renderCostVsQ(tables, opts);
    case "queue_trace":
      return renderQueueTrace(tables, opts);
    case "verify_table":
      return renderVerifyTable(tables, opts);
  }
}

/** Render and write the image file; returns the output path. */
export function plotFigure(spec: PlotSpec): string {
  const svg = renderFigure(spec);
  mkdirSync(dirname(spec.output), { recursive: true });
  writeFileSync(spec.output, svg, "utf8");
  return spec.output;
}
