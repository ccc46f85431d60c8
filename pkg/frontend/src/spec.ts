/** What to draw: one figure per invocation. */

export const FIGURE_KINDS = ["cost_vs_q", "queue_trace", "verify_table"] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface PlotSpec {
  kind: FigureKind;
  /** Input CSV path(s); queue_trace accepts several and overlays them. */
  inputs: string[];
  /** Output image path; content is SVG. */
  output: string;
  title?: string;
  width?: number;
  height?: number;
}

export class SpecError extends Error {}

export function validateSpec(spec: PlotSpec): void {
  if (!FIGURE_KINDS.includes(spec.kind)) {
    throw new SpecError(`unknown figure kind ${JSON.stringify(spec.kind)}; expected one of ${FIGURE_KINDS.join(", ")}`);
  }
  if (spec.inputs.length === 0) {
    throw new SpecError("at least one input CSV is required");
  }
  if (!spec.output) {
    throw new SpecError("output path is required");
  }
  // one figure per invocation
  if (spec.kind !== "queue_trace" && spec.inputs.length > 1) {
    throw new SpecError(`${spec.kind} takes exactly one input CSV (got ${spec.inputs.length})`);
  }
  if ((spec.width ?? 1) <= 0 || (spec.height ?? 1) <= 0) {
    throw new SpecError("width and height must be positive");
  }
}
