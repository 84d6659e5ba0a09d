/**
 * CLI: render figures from stiffsde experiment CSVs.
 *
 *   stiffsde-plot strong_error --in levels.csv --out fig.svg [--ref-slope 1.0]
 *   stiffsde-plot stability_decay --in stability_traces.csv --out fig.svg
 *
 * On any input problem the process exits nonzero and no image is written.
 */

import { writeFileSync } from "fs";
import { buildStabilitySvg } from "./stability.js";
import { buildStrongErrorSvg } from "./strongError.js";

export interface CliOptions {
  kind: string;
  input: string;
  output: string;
  refSlope: number;
}

const USAGE =
  "usage: stiffsde-plot <strong_error|stability_decay> --in FILE --out FILE [--ref-slope S]";

export function parseArgs(argv: string[]): CliOptions {
  if (argv.length === 0) throw new Error(USAGE);
  const [kind, ...rest] = argv;
  if (kind !== "strong_error" && kind !== "stability_decay") {
    throw new Error(`unknown figure kind ${JSON.stringify(kind)}\n${USAGE}`);
  }
  let input = "";
  let output = "";
  let refSlope = 1.0;
  for (let i = 0; i < rest.length; i += 2) {
    const flag = rest[i];
    const value = rest[i + 1];
    if (value === undefined) throw new Error(`missing value for ${flag}`);
    if (flag === "--in") input = value;
    else if (flag === "--out") output = value;
    else if (flag === "--ref-slope") {
      refSlope = Number(value);
      if (!Number.isFinite(refSlope)) {
        throw new Error(`--ref-slope is not a number: ${value}`);
      }
    } else throw new Error(`unknown flag ${flag}\n${USAGE}`);
  }
  if (!input || !output) throw new Error(USAGE);
  return { kind, input, output, refSlope };
}

export function run(argv: string[]): number {
  let opts: CliOptions;
  try {
    opts = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const svg =
      opts.kind === "strong_error"
        ? buildStrongErrorSvg({ input: opts.input, refSlope: opts.refSlope })
        : buildStabilitySvg({ input: opts.input });
    writeFileSync(opts.output, svg);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
  console.log(`wrote ${opts.output}`);
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
