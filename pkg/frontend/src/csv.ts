/**
 * Readers for the solver's CSV tables.
 *
 * Error tables carry the fixed schema
 *   run_id,kind,h,p,dofs,err_energy,err_L2_u,err_L2_w,err_L2_phi,wall_s
 * with optional trailing rate rows (run_id = "rate:p=N").  Energy traces
 * carry step,t,energy,kinetic,potential,dissipated.
 */

export class SchemaError extends Error {}

export interface ErrorRow {
  runId: string;
  kind: string;
  h: number;
  p: number;
  dofs: number;
  errEnergy: number;
  errL2: { u?: number; w?: number; phi?: number };
}

export interface RateRow {
  p: number;
  slope: number;
}

export interface ErrorTable {
  rows: ErrorRow[];
  rates: RateRow[];
}

export interface EnergyTrace {
  t: number[];
  energy: number[];
  kinetic: number[];
  potential: number[];
}

const ERROR_COLUMNS = [
  "run_id", "kind", "h", "p", "dofs", "err_energy",
  "err_L2_u", "err_L2_w", "err_L2_phi", "wall_s",
];

function splitCsv(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.trim().length > 0)
    .map((line) => line.split(",").map((c) => c.trim()));
}

function checkHeader(header: string[], expected: string[]): void {
  for (const col of expected) {
    if (!header.includes(col)) {
      throw new SchemaError(`schema mismatch: missing column '${col}'`);
    }
  }
}

export function parseErrorTable(text: string): ErrorTable {
  const lines = splitCsv(text);
  if (lines.length === 0) {
    throw new SchemaError("schema mismatch: empty file");
  }
  checkHeader(lines[0], ERROR_COLUMNS);
  const idx = new Map(lines[0].map((c, i) => [c, i]));
  const at = (row: string[], col: string) => row[idx.get(col)!] ?? "";
  const rows: ErrorRow[] = [];
  const rates: RateRow[] = [];
  for (const row of lines.slice(1)) {
    const runId = at(row, "run_id");
    if (runId.startsWith("rate:")) {
      rates.push({
        p: Number(at(row, "p")),
        slope: Number(at(row, "err_energy")),
      });
      continue;
    }
    const num = (col: string) => {
      const cell = at(row, col);
      return cell === "" ? undefined : Number(cell);
    };
    rows.push({
      runId,
      kind: at(row, "kind"),
      h: Number(at(row, "h")),
      p: Number(at(row, "p")),
      dofs: Number(at(row, "dofs")),
      errEnergy: Number(at(row, "err_energy")),
      errL2: { u: num("err_L2_u"), w: num("err_L2_w"), phi: num("err_L2_phi") },
    });
  }
  return { rows, rates };
}

export function parseEnergyTrace(text: string): EnergyTrace {
  const lines = splitCsv(text);
  if (lines.length === 0) {
    throw new SchemaError("schema mismatch: empty file");
  }
  checkHeader(lines[0], ["step", "t", "energy", "kinetic", "potential"]);
  const idx = new Map(lines[0].map((c, i) => [c, i]));
  const col = (name: string) =>
    lines.slice(1).map((row) => Number(row[idx.get(name)!]));
  return {
    t: col("t"),
    energy: col("energy"),
    kinetic: col("kinetic"),
    potential: col("potential"),
  };
}
