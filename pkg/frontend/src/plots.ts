/**
 * Figure builders on top of the CSV readers: h-convergence (log-log with
 * reference-slope guides), p-convergence (semilog L2 errors per field), and
 * energy traces.  The rates shown in the legend are read from the table's
 * rate rows, never recomputed here.
 */

import { ErrorTable, EnergyTrace, SchemaError } from "./csv.js";
import { Chart, PALETTE, Series, renderChart } from "./svg.js";

function needPoints(n: number): void {
  if (n < 2) {
    throw new SchemaError(`need >= 2 points per series, got ${n}`);
  }
}

export function hConvergenceChart(table: ErrorTable): Chart {
  const byP = new Map<number, { h: number[]; e: number[] }>();
  for (const row of table.rows) {
    const entry = byP.get(row.p) ?? { h: [], e: [] };
    entry.h.push(row.h);
    entry.e.push(row.errEnergy);
    byP.set(row.p, entry);
  }
  if (byP.size === 0) {
    throw new SchemaError("no data rows in the error table");
  }
  const series: Series[] = [];
  let i = 0;
  for (const [p, data] of [...byP.entries()].sort((a, b) => a[0] - b[0])) {
    needPoints(data.h.length);
    const rate = table.rates.find((r) => r.p === p);
    const label = rate ? `p=${p} (rate ${rate.slope.toFixed(2)})` : `p=${p}`;
    series.push({ label, x: data.h, y: data.e, color: PALETTE[i++ % PALETTE.length] });
  }
  // reference guides h^p and h^(p+1) anchored to each series' last point
  for (const s of [...series]) {
    const p = Number(/p=(\d+)/.exec(s.label)?.[1]);
    const [h0, e0] = [s.x[s.x.length - 1], s.y[s.y.length - 1]];
    const h1 = s.x[0];
    for (const q of [p, p + 1]) {
      series.push({
        label: `h^${q}`,
        x: [h0, h1],
        y: [e0, e0 * Math.pow(h1 / h0, q)],
        color: "#999",
        dashed: true,
        markers: false,
      });
    }
  }
  const kind = table.rows[0].kind;
  return {
    title: `${kind}: energy error vs mesh size`,
    xAxis: { label: "h", log: true },
    yAxis: { label: "energy error", log: true },
    series,
  };
}

export function pConvergenceChart(table: ErrorTable): Chart {
  if (table.rows.length === 0) {
    throw new SchemaError("no data rows in the error table");
  }
  needPoints(table.rows.length);
  const ps = table.rows.map((r) => r.p);
  const fields: Array<[string, (r: (typeof table.rows)[0]) => number | undefined]> = [
    ["u", (r) => r.errL2.u],
    ["w", (r) => r.errL2.w],
    ["phi", (r) => r.errL2.phi],
  ];
  const series: Series[] = [];
  let i = 0;
  for (const [name, get] of fields) {
    if (table.rows.some((r) => get(r) === undefined)) continue;
    series.push({
      label: `L2 error (${name})`,
      x: ps,
      y: table.rows.map((r) => get(r)!),
      color: PALETTE[i++ % PALETTE.length],
    });
  }
  if (series.length === 0) {
    throw new SchemaError("schema mismatch: no populated L2 error columns");
  }
  const kind = table.rows[0].kind;
  return {
    title: `${kind}: L2 error vs polynomial degree`,
    xAxis: { label: "p", log: false },
    yAxis: { label: "L2 error", log: true },
    series,
  };
}

export function energyTraceChart(trace: EnergyTrace): Chart {
  needPoints(trace.t.length);
  return {
    title: "discrete energy trace",
    xAxis: { label: "t", log: false },
    yAxis: { label: "energy", log: false },
    series: [
      { label: "total", x: trace.t, y: trace.energy, color: PALETTE[0], markers: false },
      { label: "kinetic", x: trace.t, y: trace.kinetic, color: PALETTE[1], markers: false },
      { label: "potential", x: trace.t, y: trace.potential, color: PALETTE[2], markers: false },
    ],
  };
}

export function render(chart: Chart): string {
  return renderChart(chart);
}
