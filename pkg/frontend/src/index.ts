export { DataError, maybeNumberAt, numberAt, readTable, requireColumns, stringAt } from "./csv.js";
export type { Table } from "./csv.js";
export { loadCostSeries, renderCostVsQ } from "./costVsQ.js";
export type { CostPoint, CostSeries } from "./costVsQ.js";
export { fitLine, loadTraceSeries, renderQueueTrace, slopeLabel } from "./queueTrace.js";
export type { TracePoint, TraceSeries } from "./queueTrace.js";
export { renderVerifyTable } from "./verifyTable.js";
export { plotFigure, renderFigure } from "./plot.js";
export { FIGURE_KINDS, SpecError, validateSpec } from "./spec.js";
export type { FigureKind, PlotSpec } from "./spec.js";
export { EXIT_DATA, EXIT_OK, EXIT_USAGE, runCli } from "./cli.js";
