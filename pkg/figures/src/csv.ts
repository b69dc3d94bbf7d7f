/**
 * Minimal reader for the numeric CSV artifacts: a header row of column
 * names followed by float rows. Schema checks name every missing column
 * so a renderer bound to the wrong file fails loudly.
 */

import { readFile } from "fs/promises";
import path from "path";

export interface Table {
  /** Path the table was read from (used in labels and error messages). */
  path: string;
  /** Header row, in file order. */
  columns: string[];
  /** Column name -> values; every column has the same length. */
  data: Map<string, Float64Array>;
  /** Number of data rows (0 for a header-only file). */
  rows: number;
}

export class SchemaError extends Error {
  constructor(file: string, missing: string[]) {
    super(`${file}: missing column(s): ${missing.join(", ")}`);
    this.name = "SchemaError";
  }
}

export function parseCsv(text: string, file: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(file, ["<header row>"]);
  }
  const columns = lines[0]!.split(",").map((c) => c.trim());
  const cols = columns.map(() => [] as number[]);
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i]!.split(",");
    if (cells.length !== columns.length) {
      throw new Error(
        `${file}: row ${i + 1} has ${cells.length} cells, expected ${columns.length}`
      );
    }
    for (let j = 0; j < cells.length; j++) {
      const v = Number(cells[j]);
      if (Number.isNaN(v) && cells[j]!.trim() !== "nan") {
        throw new Error(`${file}: row ${i + 1}, column ${columns[j]}: not a number`);
      }
      cols[j]!.push(v);
    }
  }
  const data = new Map<string, Float64Array>();
  columns.forEach((name, j) => data.set(name, Float64Array.from(cols[j]!)));
  return { path: file, columns, data, rows: lines.length - 1 };
}

export async function readTable(file: string): Promise<Table> {
  return parseCsv(await readFile(file, "utf-8"), file);
}

/** Throw SchemaError naming every required column the table lacks. */
export function requireColumns(table: Table, required: readonly string[]): void {
  const missing = required.filter((c) => !table.data.has(c));
  if (missing.length > 0) {
    throw new SchemaError(table.path, missing);
  }
}

/** Column accessor after requireColumns has vouched for presence. */
export function col(table: Table, name: string): Float64Array {
  const v = table.data.get(name);
  if (v === undefined) {
    throw new SchemaError(table.path, [name]);
  }
  return v;
}

/** Short human label for a table: file name without the extension. */
export function tableLabel(table: Table): string {
  return path.basename(table.path).replace(/\.csv$/i, "");
}
