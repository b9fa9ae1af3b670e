/** Weight-to-marker conventions and the method palette. */

export const METHOD_COLORS: Record<string, string> = {
  mc: "#d62728",
  tqmc: "#1f77b4",
  tsg: "#2ca02c",
  cqmc: "#9467bd",
  csg: "#8c564b",
  "dm-lais": "#d62728",
  "tqmc-lais": "#1f77b4",
};

export function methodColor(method: string): string {
  return METHOD_COLORS[method] ?? "#7f7f7f";
}

function hexLerp(a: string, b: string, t: number): string {
  const pa = [1, 3, 5].map((i) => parseInt(a.slice(i, i + 2), 16));
  const pb = [1, 3, 5].map((i) => parseInt(b.slice(i, i + 2), 16));
  const mix = pa.map((v, i) => Math.round(v + (pb[i] - v) * t));
  return "#" + mix.map((v) => v.toString(16).padStart(2, "0")).join("");
}

const POS_LO = "#1f77b4"; // blue: small positive weights
const POS_HI = "#d62728"; // red: large positive weights
const NEG_LO = "#17becf"; // cyan: small-magnitude negative weights
const NEG_HI = "#e377c2"; // magenta: large-magnitude negative weights

/**
 * Marker color for a quadrature weight: blue-to-red for positive weights,
 * cyan-to-magenta for negative ones, graded by relative magnitude.
 */
export function weightColor(w: number, maxAbs: number): string {
  const t = maxAbs > 0 ? Math.min(1, Math.abs(w) / maxAbs) : 0;
  return w >= 0 ? hexLerp(POS_LO, POS_HI, t) : hexLerp(NEG_LO, NEG_HI, t);
}

/** Marker radius scaled by sqrt of relative weight magnitude. */
export function weightRadius(w: number, maxAbs: number): number {
  const t = maxAbs > 0 ? Math.sqrt(Math.abs(w) / maxAbs) : 0;
  return 1.2 + 3.8 * t;
}
