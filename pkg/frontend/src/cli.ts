/**
 * plot --family <name> --in <csv...> --out <path> [--window N]
 *
 * Reads one or more harness metrics CSVs, renders the requested figure
 * family to an SVG at <path>, and writes the companion summary table
 * next to it with a .txt extension.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { FAMILIES, Family, renderFamily } from "./families.js";
import { parseMetricsCsv } from "./csv.js";

interface Args {
  family: Family;
  inputs: string[];
  out: string;
  window: number;
}

export function parseArgs(argv: string[]): Args {
  if (argv[0] !== "plot") {
    throw new Error(`usage: plot --family <${FAMILIES.join("|")}> --in <csv...> --out <path> [--window N]`);
  }
  let family: string | undefined;
  const inputs: string[] = [];
  let out: string | undefined;
  let window = 20;
  for (let i = 1; i < argv.length; i++) {
    switch (argv[i]) {
      case "--family":
        family = argv[++i];
        break;
      case "--in":
        while (argv[i + 1] && !argv[i + 1].startsWith("--")) inputs.push(argv[++i]);
        break;
      case "--out":
        out = argv[++i];
        break;
      case "--window":
        window = Number(argv[++i]);
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!family || !(FAMILIES as readonly string[]).includes(family)) {
    throw new Error(`--family must be one of ${FAMILIES.join(", ")}`);
  }
  if (inputs.length === 0) throw new Error("--in requires at least one CSV path");
  if (!out) throw new Error("--out is required");
  if (!Number.isInteger(window) || window < 1) {
    throw new Error(`--window must be a positive integer, got ${window}`);
  }
  return { family: family as Family, inputs, out, window };
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const rows = args.inputs.flatMap((path) => parseMetricsCsv(readFileSync(path, "utf8")));
    const { svg, summary } = renderFamily(args.family, rows, args.window);
    writeFileSync(args.out, svg);
    const summaryPath = args.out.replace(/\.svg$/, "") + ".txt";
    writeFileSync(summaryPath, summary);
    console.log(`wrote ${args.out} and ${summaryPath}`);
    return 0;
  } catch (error) {
    console.error(`ERROR ${JSON.stringify({ error: String(error instanceof Error ? error.message : error) })}`);
    return 2;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
