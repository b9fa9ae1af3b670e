/** Weighted 2-D point-cloud scatter with optional density contours. */
import { isoSegments } from "./contour.js";
import { weightColor, weightRadius } from "./colors.js";
import { MixtureDensity2d, MixtureDoc } from "./mixture.js";
import { LinScale, Svg, tickLabel } from "./svg.js";
import { PointSet } from "./csv.js";

const W = 560;
const H = 560;
const MARGIN = { left: 60, right: 20, top: 20, bottom: 48 };

export function plotPointCloud(ps: PointSet, density?: MixtureDoc): string {
  if (ps.d !== 2) {
    throw new Error(`point-cloud plots support d=2 only, got d=${ps.d}`);
  }
  const xs = ps.points.map((p) => p[0]);
  const ys = ps.points.map((p) => p[1]);
  const sx = new LinScale(xs, MARGIN.left, W - MARGIN.right);
  const sy = new LinScale(ys, H - MARGIN.bottom, MARGIN.top);
  const svg = new Svg(W, H);

  const axis = 'stroke="#333333" stroke-width="1"';
  const grid = 'stroke="#eeeeee" stroke-width="0.5"';
  for (const t of sx.ticks()) {
    const px = sx.map(t);
    svg.line(px, MARGIN.top, px, H - MARGIN.bottom, grid);
    svg.text(px - 10, H - MARGIN.bottom + 16, tickLabel(t), 'font-size="11"');
  }
  for (const t of sy.ticks()) {
    const py = sy.map(t);
    svg.line(MARGIN.left, py, W - MARGIN.right, py, grid);
    svg.text(10, py + 4, tickLabel(t), 'font-size="11"');
  }
  svg.line(MARGIN.left, H - MARGIN.bottom, W - MARGIN.right, H - MARGIN.bottom, axis);
  svg.line(MARGIN.left, MARGIN.top, MARGIN.left, H - MARGIN.bottom, axis);

  if (density) {
    const f = new MixtureDensity2d(density);
    let peak = 0;
    for (const p of ps.points) peak = Math.max(peak, f.density(p[0], p[1]));
    for (const frac of [0.05, 0.2, 0.5, 0.8]) {
      const segs = isoSegments(
        (x, y) => f.density(x, y),
        frac * peak,
        sx.lo,
        sx.hi,
        sy.lo,
        sy.hi,
      );
      for (const [x1, y1, x2, y2] of segs) {
        svg.line(
          sx.map(x1),
          sy.map(y1),
          sx.map(x2),
          sy.map(y2),
          'stroke="#bbbbbb" stroke-width="0.8"',
        );
      }
    }
  }

  const maxAbs = Math.max(...ps.weights.map((w) => Math.abs(w)));
  ps.points.forEach((p, i) => {
    const w = ps.weights[i];
    svg.circle(
      sx.map(p[0]),
      sy.map(p[1]),
      weightRadius(w, maxAbs),
      `fill="${weightColor(w, maxAbs)}" fill-opacity="0.85"`,
    );
  });
  svg.text(W / 2 - 8, H - 10, "x1", 'font-size="13"');
  svg.raw(
    `<text x="18" y="${H / 2}" font-family="sans-serif" font-size="13" ` +
      `transform="rotate(-90 18 ${H / 2})">x2</text>`,
  );
  return svg.render();
}
