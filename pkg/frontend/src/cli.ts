#!/usr/bin/env node
/**
 * Render figures from mixtransport CSV/JSON outputs.
 *
 *   plot convergence-loglog --in records.csv --out fig.svg
 *   plot pointcloud --in points.csv [--density mixture.json] --out fig.svg
 *   plot lais-comparison --in lais.csv --out fig.svg
 *
 * SVG output is deterministic: identical inputs give identical bytes
 * (--reproducible is accepted for symmetry with the producer CLI and is a
 * no-op because no timestamps are emitted in the first place).
 */
import { writeFileSync } from "node:fs";
import process from "node:process";

import { parseConvergence, parseLais, parsePointSet, readText } from "./csv.js";
import { plotConvergence, plotLaisComparison } from "./convergence.js";
import { plotPointCloud } from "./pointcloud.js";
import { MixtureDoc } from "./mixture.js";

const KINDS = ["convergence-loglog", "pointcloud", "lais-comparison"];

function usage(): never {
  console.error(
    "usage: plot <convergence-loglog|pointcloud|lais-comparison> " +
      "--in <csv> [--density <json>] --out <file> [--reproducible]",
  );
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv.length === 0) usage();
  const kind = argv[0] === "convergence" ? "convergence-loglog" : argv[0];
  if (!KINDS.includes(kind)) usage();
  let input: string | undefined;
  let density: string | undefined;
  let out: string | undefined;
  for (let i = 1; i < argv.length; i++) {
    switch (argv[i]) {
      case "--in":
        input = argv[++i];
        break;
      case "--density":
        density = argv[++i];
        break;
      case "--out":
        out = argv[++i];
        break;
      case "--reproducible":
        break;
      default:
        usage();
    }
  }
  if (!input || !out) usage();
  try {
    let svg: string;
    if (kind === "convergence-loglog") {
      svg = plotConvergence(parseConvergence(readText(input)));
    } else if (kind === "lais-comparison") {
      svg = plotLaisComparison(parseLais(readText(input)));
    } else {
      const doc = density
        ? (JSON.parse(readText(density)) as MixtureDoc)
        : undefined;
      svg = plotPointCloud(parsePointSet(readText(input)), doc);
    }
    writeFileSync(out, svg);
    console.log(`wrote ${out}`);
    return 0;
  } catch (err) {
    console.error(`plot error: ${(err as Error).message}`);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
