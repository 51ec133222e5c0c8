#!/usr/bin/env node
/**
 * plots --kind <h-convergence|p-convergence|energy-trace> --csv <path> --out <svg>
 *
 * File-to-file: reads one of the solver's CSV artifacts and writes an SVG
 * figure.  Exits nonzero with a named-column message on schema mismatch.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { SchemaError, parseEnergyTrace, parseErrorTable } from "./csv.js";
import { energyTraceChart, hConvergenceChart, pConvergenceChart, render } from "./plots.js";

export interface Args {
  kind: string;
  csv: string;
  out: string;
}

export function parseArgs(argv: string[]): Args {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad argument ${flag}; usage: plots --kind K --csv IN --out OUT`);
    }
    out[flag.slice(2)] = argv[i + 1];
  }
  for (const key of ["kind", "csv", "out"]) {
    if (!(key in out)) throw new Error(`missing --${key}`);
  }
  return out as unknown as Args;
}

export function makeFigure(kind: string, csvText: string): string {
  switch (kind) {
    case "h-convergence":
      return render(hConvergenceChart(parseErrorTable(csvText)));
    case "p-convergence":
      return render(pConvergenceChart(parseErrorTable(csvText)));
    case "energy-trace":
      return render(energyTraceChart(parseEnergyTrace(csvText)));
    default:
      throw new Error(`unknown figure kind '${kind}'`);
  }
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const svg = makeFigure(args.kind, readFileSync(args.csv, "utf8"));
    writeFileSync(args.out, svg);
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`${args.csv}: ${err.message}`);
      return 1;
    }
    console.error((err as Error).message);
    return 1;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
