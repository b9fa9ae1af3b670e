/** Readers for the CSV/JSON contracts emitted by the mixtransport CLI. */
import { readFileSync } from "node:fs";

export interface PointSet {
  weights: number[];
  points: number[][];
  d: number;
  provenance: string;
}

export interface ConvergenceRow {
  method: string;
  n: number;
  integrand: string;
  mixture: string;
  seed: number;
  absError: number;
  wallTime: number;
}

export interface LaisRow {
  sweep: string;
  method: string;
  varied: number;
  nTotal: number;
  absError: number;
  ess: number;
  wallTime: number;
}

function dataLines(text: string): { comments: string[]; lines: string[] } {
  const comments: string[] = [];
  const lines: string[] = [];
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.trim();
    if (!line) continue;
    if (line.startsWith("#")) comments.push(line.slice(1).trim());
    else lines.push(line);
  }
  return { comments, lines };
}

/** Parse a "w,x1,...,xd" point-set CSV (comment lines carry metadata). */
export function parsePointSet(text: string): PointSet {
  const { comments, lines } = dataLines(text);
  if (lines.length < 2) throw new Error("point-set CSV has no data rows");
  const header = lines[0].split(",");
  if (header[0] !== "w") throw new Error(`unexpected header ${lines[0]}`);
  const d = header.length - 1;
  const weights: number[] = [];
  const points: number[][] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(",").map(Number);
    if (parts.length !== d + 1 || parts.some((v) => !Number.isFinite(v))) {
      throw new Error(`bad point row: ${line}`);
    }
    weights.push(parts[0]);
    points.push(parts.slice(1));
  }
  let provenance = "unknown";
  for (const c of comments) {
    if (c.startsWith("provenance:")) provenance = c.split(":", 2)[1].trim();
  }
  return { weights, points, d, provenance };
}

/** Parse "method,n,integrand,mixture,seed,abs_error,wall_time" records. */
export function parseConvergence(text: string): ConvergenceRow[] {
  const { lines } = dataLines(text);
  if (lines.length === 0) throw new Error("records CSV is empty");
  if (lines[0] !== "method,n,integrand,mixture,seed,abs_error,wall_time") {
    throw new Error(`unexpected header ${lines[0]}`);
  }
  const rows: ConvergenceRow[] = [];
  for (const line of lines.slice(1)) {
    const p = line.split(",");
    if (p.length !== 7) throw new Error(`bad record row: ${line}`);
    rows.push({
      method: p[0],
      n: Number(p[1]),
      integrand: p[2],
      mixture: p[3],
      seed: Number(p[4]),
      absError: Number(p[5]),
      wallTime: Number(p[6]),
    });
  }
  if (rows.length === 0) throw new Error("records CSV has no data rows");
  return rows;
}

/** Parse "sweep,method,varied,n_total,abs_error,ess,wall_time" rows. */
export function parseLais(text: string): LaisRow[] {
  const { lines } = dataLines(text);
  if (lines.length === 0) throw new Error("lais CSV is empty");
  if (lines[0] !== "sweep,method,varied,n_total,abs_error,ess,wall_time") {
    throw new Error(`unexpected header ${lines[0]}`);
  }
  const rows: LaisRow[] = [];
  for (const line of lines.slice(1)) {
    const p = line.split(",");
    if (p.length !== 7) throw new Error(`bad lais row: ${line}`);
    rows.push({
      sweep: p[0],
      method: p[1],
      varied: Number(p[2]),
      nTotal: Number(p[3]),
      absError: Number(p[4]),
      ess: Number(p[5]),
      wallTime: Number(p[6]),
    });
  }
  if (rows.length === 0) throw new Error("lais CSV has no data rows");
  return rows;
}

export function readText(path: string): string {
  return readFileSync(path, "utf8");
}
