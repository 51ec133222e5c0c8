/**
 * Tiny SVG chart builder: log/linear axes, polyline series, dashed guide
 * lines, legend.  No runtime dependencies; output is a standalone file.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  dashed?: boolean;
  markers?: boolean;
}

export interface AxisSpec {
  label: string;
  log: boolean;
}

export interface Chart {
  title: string;
  xAxis: AxisSpec;
  yAxis: AxisSpec;
  series: Series[];
}

const W = 640;
const H = 480;
const M = { left: 72, right: 24, top: 40, bottom: 52 };
export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                        "#8c564b"];

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

interface Scale {
  (v: number): number;
  ticks: number[];
}

function makeScale(values: number[], log: boolean, range: [number, number]): Scale {
  const finite = values.filter((v) => Number.isFinite(v) && (!log || v > 0));
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  let ticks: number[];
  if (log) {
    const eLo = Math.floor(Math.log10(lo));
    const eHi = Math.ceil(Math.log10(hi));
    ticks = [];
    for (let e = eLo; e <= eHi; e++) ticks.push(Math.pow(10, e));
    lo = Math.pow(10, eLo);
    hi = Math.pow(10, eHi);
  } else {
    const step = niceStep(hi - lo);
    const start = Math.ceil(lo / step) * step;
    ticks = [];
    for (let v = start; v <= hi + 1e-12 * step; v += step) ticks.push(v);
  }
  const t = (v: number) => (log ? Math.log10(v) : v);
  const span = t(hi) - t(lo) || 1;
  const fn = ((v: number) =>
    range[0] + ((t(v) - t(lo)) / span) * (range[1] - range[0])) as Scale;
  fn.ticks = ticks;
  return fn;
}

function niceStep(span: number): number {
  const raw = span / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const m of [1, 2, 5, 10]) {
    if (raw <= m * mag) return m * mag;
  }
  return 10 * mag;
}

function fmtTick(v: number, log: boolean): string {
  if (log) {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
  }
  return Math.abs(v) >= 1000 || (v !== 0 && Math.abs(v) < 0.01)
    ? v.toExponential(1)
    : String(Math.round(v * 1000) / 1000);
}

export function renderChart(chart: Chart): string {
  const xs = chart.series.flatMap((s) => s.x);
  const ys = chart.series.flatMap((s) => s.y);
  const sx = makeScale(xs, chart.xAxis.log, [M.left, W - M.right]);
  const sy = makeScale(ys, chart.yAxis.log, [H - M.bottom, M.top]);
  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">${esc(chart.title)}</text>`);
  // frame and grid
  for (const tx of sx.ticks) {
    const px = sx(tx);
    parts.push(`<line x1="${px}" y1="${M.top}" x2="${px}" y2="${H - M.bottom}" stroke="#ddd"/>`);
    parts.push(`<text x="${px}" y="${H - M.bottom + 18}" text-anchor="middle" font-size="11" font-family="sans-serif">${fmtTick(tx, chart.xAxis.log)}</text>`);
  }
  for (const ty of sy.ticks) {
    const py = sy(ty);
    parts.push(`<line x1="${M.left}" y1="${py}" x2="${W - M.right}" y2="${py}" stroke="#ddd"/>`);
    parts.push(`<text x="${M.left - 6}" y="${py + 4}" text-anchor="end" font-size="11" font-family="sans-serif">${fmtTick(ty, chart.yAxis.log)}</text>`);
  }
  parts.push(`<rect x="${M.left}" y="${M.top}" width="${W - M.left - M.right}" height="${H - M.top - M.bottom}" fill="none" stroke="#333"/>`);
  parts.push(`<text x="${W / 2}" y="${H - 14}" text-anchor="middle" font-size="13" font-family="sans-serif">${esc(chart.xAxis.label)}</text>`);
  parts.push(`<text x="20" y="${H / 2}" text-anchor="middle" font-size="13" font-family="sans-serif" transform="rotate(-90 20 ${H / 2})">${esc(chart.yAxis.label)}</text>`);
  // series
  for (const s of chart.series) {
    const pts = s.x.map((xv, i) => `${sx(xv).toFixed(2)},${sy(s.y[i]).toFixed(2)}`);
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(`<polyline points="${pts.join(" ")}" fill="none" stroke="${s.color}" stroke-width="1.8"${dash}/>`);
    if (s.markers !== false && !s.dashed) {
      for (const pt of pts) {
        const [px, py] = pt.split(",");
        parts.push(`<circle cx="${px}" cy="${py}" r="3.2" fill="${s.color}"/>`);
      }
    }
  }
  // legend
  let ly = M.top + 12;
  for (const s of chart.series) {
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(`<line x1="${W - M.right - 150}" y1="${ly}" x2="${W - M.right - 120}" y2="${ly}" stroke="${s.color}" stroke-width="2"${dash}/>`);
    parts.push(`<text x="${W - M.right - 112}" y="${ly + 4}" font-size="12" font-family="sans-serif">${esc(s.label)}</text>`);
    ly += 18;
  }
  parts.push("</svg>");
  return parts.join("\n");
}
