#!/usr/bin/env node
/**
 * Figure renderer for the smoothmpc CSV artifacts.
 *
 * Usage:
 *   smoothmpc-figures --in <csv...> --kind <name> --out <path.svg>
 *
 * Kinds and their inputs:
 *   policy-overlay   dp_policy.csv [smoothing-profile_<seed>.csv]
 *   density          gradient-density_<seed>.csv
 *   learning-curves  <trace>.csv
 *   comparison       <trace-a>.csv <trace-b>.csv
 *   improvement      policy_snapshots_<seed>.csv
 *
 * Inputs are read-only; one SVG is written per invocation. A CSV whose
 * header lacks a required column exits nonzero naming the column; an
 * empty-but-valid-header CSV renders empty axes and exits 0.
 */

import { writeFile } from "fs/promises";
import { pathToFileURL } from "url";

import { SchemaError, readTable } from "./csv.js";
import { INPUT_ARITY, KINDS, Kind, render } from "./figures.js";

export class UsageError extends Error {}

interface Args {
  inputs: string[];
  kind: Kind;
  out: string;
}

export function parseArgs(argv: string[]): Args {
  const inputs: string[] = [];
  let kind: string | undefined;
  let out: string | undefined;
  let i = 0;
  while (i < argv.length) {
    const a = argv[i]!;
    if (a === "--in") {
      i += 1;
      const start = i;
      while (i < argv.length && !argv[i]!.startsWith("--")) {
        inputs.push(argv[i]!);
        i += 1;
      }
      if (i === start) throw new UsageError("--in expects one or more CSV paths");
    } else if (a === "--kind") {
      kind = argv[i + 1];
      if (kind === undefined) throw new UsageError("--kind expects a figure kind");
      i += 2;
    } else if (a === "--out") {
      out = argv[i + 1];
      if (out === undefined) throw new UsageError("--out expects an output path");
      i += 2;
    } else if (a === "--help" || a === "-h") {
      throw new UsageError("help");
    } else {
      throw new UsageError(`unknown argument: ${a}`);
    }
  }
  if (kind === undefined || !KINDS.includes(kind as Kind)) {
    throw new UsageError(
      `--kind must be one of ${KINDS.join(", ")}${kind === undefined ? "" : `, got ${kind}`}`
    );
  }
  if (out === undefined) throw new UsageError("--out is required");
  const [lo, hi] = INPUT_ARITY[kind as Kind];
  if (inputs.length < lo || inputs.length > hi) {
    const want = lo === hi ? `${lo}` : `${lo}..${hi}`;
    throw new UsageError(`kind ${kind} expects ${want} input file(s), got ${inputs.length}`);
  }
  return { inputs, kind: kind as Kind, out };
}

const USAGE =
  "usage: smoothmpc-figures --in <csv...> --kind " +
  `{${KINDS.join("|")}} --out <path.svg>`;

export async function main(argv: string[]): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      const log = err.message === "help" ? console.log : console.error;
      if (err.message !== "help") log(`error: ${err.message}`);
      log(USAGE);
      return err.message === "help" ? 0 : 2;
    }
    throw err;
  }
  try {
    const tables = await Promise.all(args.inputs.map(readTable));
    const svg = render(args.kind, tables);
    await writeFile(args.out, svg, "utf-8");
    console.log(`SVG -> ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

if (process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
