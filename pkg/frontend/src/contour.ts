/** Marching-squares iso-lines of a scalar field on a regular grid. */

export type Segment = [number, number, number, number];

/**
 * Iso-level segments of f sampled on an nx-by-ny grid over
 * [x0, x1] x [y0, y1]; coordinates are returned in data units.
 */
export function isoSegments(
  f: (x: number, y: number) => number,
  level: number,
  x0: number,
  x1: number,
  y0: number,
  y1: number,
  nx = 81,
  ny = 81,
): Segment[] {
  const xs = Array.from({ length: nx }, (_, i) => x0 + ((x1 - x0) * i) / (nx - 1));
  const ys = Array.from({ length: ny }, (_, j) => y0 + ((y1 - y0) * j) / (ny - 1));
  const grid: number[][] = xs.map((x) => ys.map((y) => f(x, y)));
  const segs: Segment[] = [];
  const interp = (
    va: number,
    vb: number,
    pa: number,
    pb: number,
  ): number => pa + ((level - va) / (vb - va)) * (pb - pa);

  for (let i = 0; i < nx - 1; i++) {
    for (let j = 0; j < ny - 1; j++) {
      const v00 = grid[i][j];
      const v10 = grid[i + 1][j];
      const v01 = grid[i][j + 1];
      const v11 = grid[i + 1][j + 1];
      let mask = 0;
      if (v00 > level) mask |= 1;
      if (v10 > level) mask |= 2;
      if (v11 > level) mask |= 4;
      if (v01 > level) mask |= 8;
      if (mask === 0 || mask === 15) continue;
      const pts: Array<[number, number]> = [];
      // edge crossings: bottom, right, top, left
      if ((mask & 1) !== (mask >> 1 & 1)) {
        pts.push([interp(v00, v10, xs[i], xs[i + 1]), ys[j]]);
      }
      if ((mask >> 1 & 1) !== (mask >> 2 & 1)) {
        pts.push([xs[i + 1], interp(v10, v11, ys[j], ys[j + 1])]);
      }
      if ((mask >> 3 & 1) !== (mask >> 2 & 1)) {
        pts.push([interp(v01, v11, xs[i], xs[i + 1]), ys[j + 1]]);
      }
      if ((mask & 1) !== (mask >> 3 & 1)) {
        pts.push([xs[i], interp(v00, v01, ys[j], ys[j + 1])]);
      }
      for (let k = 0; k + 1 < pts.length; k += 2) {
        segs.push([pts[k][0], pts[k][1], pts[k + 1][0], pts[k + 1][1]]);
      }
    }
  }
  return segs;
}
