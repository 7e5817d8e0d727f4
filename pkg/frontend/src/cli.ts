/**
 * Batch figure renderer.
 *
 * Usage:
 *   node dist/cli.js --input run.csv [--input more.csv] --out figure.svg \
 *     [--label CASE-1] [--panels p,q,v,f] [--format svg]
 */

import { writeFileSync } from "node:fs";
import process from "node:process";

import { mergeRunLogs, readRunLog } from "./csv.js";
import { renderFigure, type PanelId } from "./figure.js";

export interface CliArgs {
  inputs: string[];
  out: string;
  label?: string;
  panels?: PanelId[];
  format: string;
}

export function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = { inputs: [], out: "", format: "svg" };
  for (let i = 0; i < argv.length; i += 1) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) {
        throw new Error(`missing value for ${flag}`);
      }
      return argv[i];
    };
    switch (flag) {
      case "--input":
        args.inputs.push(next());
        break;
      case "--out":
        args.out = next();
        break;
      case "--label":
        args.label = next();
        break;
      case "--format":
        args.format = next();
        break;
      case "--panels": {
        const ids = next().split(",").map((p) => p.trim());
        for (const id of ids) {
          if (!["p", "q", "v", "f"].includes(id)) {
            throw new Error(`unknown panel '${id}' (choose from p,q,v,f)`);
          }
        }
        args.panels = ids as PanelId[];
        break;
      }
      default:
        throw new Error(`unknown flag '${flag}'`);
    }
  }
  if (args.inputs.length === 0) {
    throw new Error("--input is required");
  }
  if (!args.out) {
    throw new Error("--out is required");
  }
  if (args.format !== "svg") {
    throw new Error(`unsupported format '${args.format}' (only svg is implemented)`);
  }
  return args;
}

export function main(argv: string[]): number {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const log = mergeRunLogs(args.inputs.map(readRunLog));
    const svg = renderFigure(log, { label: args.label, panels: args.panels });
    writeFileSync(args.out, svg, "utf-8");
    console.error(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
