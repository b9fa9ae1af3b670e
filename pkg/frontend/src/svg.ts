/** Minimal deterministic SVG builder: fixed sizes, no timestamps. */

export function fmt(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite coordinate ${v}`);
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
        `height="${height}" viewBox="0 0 ${width} ${height}">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" ` +
        `y2="${fmt(y2)}" ${style}/>`,
    );
  }

  polyline(pts: Array<[number, number]>, style: string): void {
    const coords = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polyline points="${coords}" fill="none" ${style}/>`);
  }

  circle(cx: number, cy: number, r: number, style: string): void {
    this.parts.push(
      `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" ${style}/>`,
    );
  }

  text(x: number, y: number, content: string, style = ""): void {
    const esc = content
      .replaceAll("&", "&amp;")
      .replaceAll("<", "&lt;")
      .replaceAll(">", "&gt;");
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-family="sans-serif" ` +
        `${style}>${esc}</text>`,
    );
  }

  raw(markup: string): void {
    this.parts.push(markup);
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

/** Log-10 scale mapping data to pixel coordinates. */
export class LogScale {
  readonly lo: number;
  readonly hi: number;

  constructor(
    values: number[],
    readonly pixLo: number,
    readonly pixHi: number,
  ) {
    const finite = values.filter((v) => Number.isFinite(v) && v > 0);
    if (finite.length === 0) throw new Error("log scale needs positive data");
    this.lo = Math.log10(Math.min(...finite));
    this.hi = Math.log10(Math.max(...finite));
    if (this.hi - this.lo < 1e-12) {
      this.lo -= 0.5;
      this.hi += 0.5;
    }
  }

  map(v: number): number {
    const t = (Math.log10(v) - this.lo) / (this.hi - this.lo);
    return this.pixLo + t * (this.pixHi - this.pixLo);
  }

  /** Powers of ten (with thinning) covering the data range. */
  ticks(maxCount = 8): number[] {
    const first = Math.ceil(this.lo - 1e-9);
    const last = Math.floor(this.hi + 1e-9);
    const all: number[] = [];
    for (let e = first; e <= last; e++) all.push(e);
    const stride = Math.max(1, Math.ceil(all.length / maxCount));
    return all.filter((_, i) => i % stride === 0).map((e) => 10 ** e);
  }
}

/** Linear scale for point clouds. */
export class LinScale {
  readonly lo: number;
  readonly hi: number;

  constructor(
    values: number[],
    readonly pixLo: number,
    readonly pixHi: number,
    pad = 0.06,
  ) {
    if (values.length === 0) throw new Error("empty scale domain");
    let lo = Math.min(...values);
    let hi = Math.max(...values);
    const span = hi - lo || 1.0;
    lo -= pad * span;
    hi += pad * span;
    this.lo = lo;
    this.hi = hi;
  }

  map(v: number): number {
    const t = (v - this.lo) / (this.hi - this.lo);
    return this.pixLo + t * (this.pixHi - this.pixLo);
  }

  ticks(count = 6): number[] {
    const span = this.hi - this.lo;
    const step = 10 ** Math.floor(Math.log10(span / count));
    const mult = [1, 2, 5, 10].find((m) => span / (step * m) <= count) ?? 10;
    const s = step * mult;
    const first = Math.ceil(this.lo / s) * s;
    const out: number[] = [];
    for (let v = first; v <= this.hi + 1e-12; v += s) out.push(v);
    return out;
  }
}

export function tickLabel(v: number): string {
  if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
    const e = Math.round(Math.log10(Math.abs(v)));
    const mant = v / 10 ** e;
    const m = Math.abs(mant - 1) < 1e-9 ? "" : `${mant.toPrecision(2)}x`;
    return `${m}1e${e}`;
  }
  return `${Number(v.toPrecision(6))}`;
}
