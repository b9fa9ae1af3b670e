/** 2-D Gaussian mixture density from the mixtransport JSON document. */

export interface MixtureDoc {
  weights: number[];
  shifts: number[][];
  scales: number[][][];
  reference?: string;
  dim?: number;
}

interface Component {
  w: number;
  a: [number, number];
  // inverse covariance of A A^T and the normalizing factor
  inv: [number, number, number]; // [i11, i12, i22]
  norm: number;
}

export class MixtureDensity2d {
  private comps: Component[];

  constructor(doc: MixtureDoc) {
    const d = doc.shifts[0]?.length ?? 0;
    if (d !== 2) throw new Error(`density overlay requires d=2, got d=${d}`);
    if ((doc.reference ?? "gaussian") !== "gaussian") {
      throw new Error("density overlay requires a Gaussian reference");
    }
    this.comps = doc.weights.map((w, j) => {
      const A = doc.scales[j];
      // covariance C = A A^T for a 2x2 scale matrix
      const c11 = A[0][0] * A[0][0] + A[0][1] * A[0][1];
      const c12 = A[0][0] * A[1][0] + A[0][1] * A[1][1];
      const c22 = A[1][0] * A[1][0] + A[1][1] * A[1][1];
      const det = c11 * c22 - c12 * c12;
      if (det <= 0) throw new Error(`component ${j} covariance not SPD`);
      return {
        w,
        a: [doc.shifts[j][0], doc.shifts[j][1]],
        inv: [c22 / det, -c12 / det, c11 / det],
        norm: 1 / (2 * Math.PI * Math.sqrt(det)),
      };
    });
  }

  density(x: number, y: number): number {
    let total = 0;
    for (const c of this.comps) {
      const dx = x - c.a[0];
      const dy = y - c.a[1];
      const q = c.inv[0] * dx * dx + 2 * c.inv[1] * dx * dy + c.inv[2] * dy * dy;
      total += c.w * c.norm * Math.exp(-0.5 * q);
    }
    return total;
  }
}
