import { readFileSync } from "fs";
import Papa from "papaparse";

/** Raised for anything wrong with the input data, as opposed to usage errors. */
export class DataError extends Error {}

export interface Table {
  path: string;
  columns: string[];
  rows: Record<string, unknown>[];
}

export function readTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (e) {
    throw new DataError(`cannot read ${path}: ${(e as Error).message}`);
  }
  const parsed = Papa.parse<Record<string, unknown>>(text, {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    const where = first.row === undefined ? "" : ` at data row ${first.row + 1}`;
    throw new DataError(`${path}: malformed CSV${where}: ${first.message}`);
  }
  return { path, columns: parsed.meta.fields ?? [], rows: parsed.data };
}

/** Check the referenced columns exist and the table is non-empty. */
export function requireColumns(table: Table, names: readonly string[]): void {
  const missing = names.filter((n) => !table.columns.includes(n));
  if (missing.length > 0) {
    throw new DataError(`${table.path}: missing required column(s): ${missing.join(", ")}`);
  }
  if (table.rows.length === 0) {
    throw new DataError(`${table.path}: no data rows`);
  }
}

/** Fetch a cell that must be a finite number; names the offending row otherwise. */
export function numberAt(table: Table, row: number, col: string): number {
  const v = table.rows[row][col];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new DataError(
      `${table.path}: row ${row + 1}: column "${col}" is not a finite number (got ${String(v)})`,
    );
  }
  return v;
}

/** Fetch a cell as a non-empty label. */
export function stringAt(table: Table, row: number, col: string): string {
  const v = table.rows[row][col];
  if (v === null || v === undefined || v === "") {
    throw new DataError(`${table.path}: row ${row + 1}: column "${col}" is empty`);
  }
  return String(v);
}

/** Lenient variant for optional numeric cells; returns null when blank. */
export function maybeNumberAt(table: Table, row: number, col: string): number | null {
  const v = table.rows[row][col];
  if (v === null || v === undefined || v === "") return null;
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new DataError(
      `${table.path}: row ${row + 1}: column "${col}" is not a finite number (got ${String(v)})`,
    );
  }
  return v;
}
