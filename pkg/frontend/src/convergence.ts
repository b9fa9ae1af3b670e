/** Log-log convergence figures from records/LAIS CSV rows. */
import { ConvergenceRow, LaisRow } from "./csv.js";
import { methodColor } from "./colors.js";
import { LogScale, Svg, tickLabel } from "./svg.js";

const W = 640;
const H = 480;
const MARGIN = { left: 72, right: 24, top: 28, bottom: 52 };

export interface Series {
  label: string;
  color: string;
  points: Array<[number, number]>; // (n, error), error > 0
}

/** RMS-aggregate repeated rows (seeds) per (label, n). */
export function toSeries(
  rows: Array<{ label: string; n: number; err: number }>,
): Series[] {
  const byLabel = new Map<string, Map<number, number[]>>();
  for (const r of rows) {
    if (!Number.isFinite(r.err) || r.err < 0) continue;
    const inner = byLabel.get(r.label) ?? new Map<number, number[]>();
    byLabel.set(r.label, inner);
    inner.set(r.n, [...(inner.get(r.n) ?? []), r.err]);
  }
  const out: Series[] = [];
  for (const [label, inner] of [...byLabel.entries()].sort()) {
    const pts: Array<[number, number]> = [];
    for (const [n, errs] of [...inner.entries()].sort((a, b) => a[0] - b[0])) {
      const rms = Math.sqrt(errs.reduce((s, e) => s + e * e, 0) / errs.length);
      if (rms > 0) pts.push([n, rms]);
    }
    if (pts.length > 0) {
      out.push({ label, color: methodColor(label.split(" ")[0]), points: pts });
    }
  }
  return out;
}

function drawLogLog(series: Series[], xLabel: string, yLabel: string): string {
  if (series.length === 0) throw new Error("nothing to plot");
  const nValues = series.flatMap((s) => s.points.map((p) => p[0]));
  const nDistinct = new Set(nValues).size;
  if (series.length < 2 && nDistinct < 2) {
    throw new Error("need at least two methods or two N values");
  }
  const errValues = series.flatMap((s) => s.points.map((p) => p[1]));
  const sx = new LogScale(nValues, MARGIN.left, W - MARGIN.right);
  const sy = new LogScale(errValues, H - MARGIN.bottom, MARGIN.top);

  const svg = new Svg(W, H);
  const axis = 'stroke="#333333" stroke-width="1"';
  const grid = 'stroke="#dddddd" stroke-width="0.5"';
  for (const t of sx.ticks()) {
    const px = sx.map(t);
    svg.line(px, MARGIN.top, px, H - MARGIN.bottom, grid);
    svg.text(px - 12, H - MARGIN.bottom + 18, tickLabel(t), 'font-size="11"');
  }
  for (const t of sy.ticks()) {
    const py = sy.map(t);
    svg.line(MARGIN.left, py, W - MARGIN.right, py, grid);
    svg.text(8, py + 4, tickLabel(t), 'font-size="11"');
  }
  svg.line(MARGIN.left, H - MARGIN.bottom, W - MARGIN.right, H - MARGIN.bottom, axis);
  svg.line(MARGIN.left, MARGIN.top, MARGIN.left, H - MARGIN.bottom, axis);
  svg.text(W / 2 - 10, H - 12, xLabel, 'font-size="13"');
  svg.raw(
    `<text x="16" y="${H / 2}" font-family="sans-serif" font-size="13" ` +
      `transform="rotate(-90 16 ${H / 2})">${yLabel}</text>`,
  );

  // reference slope guides -1/2 and -1, anchored at the data's top-right
  const nMin = Math.min(...nValues);
  const nMax = Math.max(...nValues);
  const eMax = Math.max(...errValues);
  for (const [slope, dash] of [
    [-0.5, "6 3"],
    [-1.0, "2 3"],
  ] as Array<[number, string]>) {
    const y0 = eMax;
    const y1 = eMax * (nMax / nMin) ** slope;
    svg.polyline(
      [
        [sx.map(nMin), sy.map(y0)],
        [sx.map(nMax), sy.map(y1)],
      ],
      `stroke="#999999" stroke-width="1" stroke-dasharray="${dash}"`,
    );
    svg.text(
      sx.map(nMax) - 52,
      sy.map(y1) - 5,
      slope === -0.5 ? "N^-1/2" : "N^-1",
      'font-size="11" fill="#777777"',
    );
  }

  series.forEach((s, idx) => {
    const style = `stroke="${s.color}" stroke-width="1.8"`;
    svg.polyline(s.points.map(([n, e]) => [sx.map(n), sy.map(e)]), style);
    for (const [n, e] of s.points) {
      svg.circle(sx.map(n), sy.map(e), 2.6, `fill="${s.color}"`);
    }
    const ly = MARGIN.top + 14 + 16 * idx;
    const lx = W - MARGIN.right - 150;
    svg.line(lx, ly - 4, lx + 22, ly - 4, style);
    svg.text(lx + 28, ly, s.label, 'font-size="12"');
  });
  return svg.render();
}

/** Figure: quadrature error vs N, one series per method (per integrand). */
export function plotConvergence(rows: ConvergenceRow[]): string {
  const integrands = [...new Set(rows.map((r) => r.integrand))].filter(
    (f) => f !== "-",
  );
  const multi = integrands.length > 1;
  const series = toSeries(
    rows
      .filter((r) => r.integrand !== "-")
      .map((r) => ({
        label: multi ? `${r.method} ${r.integrand}` : r.method,
        n: r.n,
        err: r.absError,
      })),
  );
  return drawLogLog(series, "N", "abs. error");
}

/** Figure: LAIS error vs total sample count, one series per method/sweep. */
export function plotLaisComparison(rows: LaisRow[]): string {
  const sweeps = new Set(rows.map((r) => r.sweep));
  const multi = sweeps.size > 1;
  const series = toSeries(
    rows.map((r) => ({
      label: multi ? `${r.method} (${r.sweep} sweep)` : r.method,
      n: r.nTotal,
      err: r.absError,
    })),
  );
  return drawLogLog(series, "N = C*T*M", "abs. error");
}
