#!/usr/bin/env node
/**
 * `embed --input X --output Y [--model M] [--dim D --fake] [--batch-size B]`
 *
 * Exit codes: 0 success, 1 runtime failure (unreadable input, model load
 * failure), 2 usage error.
 */

import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { encodeDataset, EmbedJob } from "./encode.js";

const USAGE =
  "usage: embed --input X --output Y [--model M] [--dim D --fake] " +
  "[--batch-size B] [--seed S]";

function integer(name: string, raw: string, minimum: number): number {
  const value = Number(raw);
  if (!Number.isInteger(value) || value < minimum) {
    throw new Error(`--${name} must be an integer >= ${minimum}, got ${raw}`);
  }
  return value;
}

function parseJob(argv: string[]): EmbedJob | "help" {
  const args = parseArgs({
    args: argv,
    options: {
      input: { type: "string" },
      output: { type: "string" },
      model: { type: "string" },
      dim: { type: "string" },
      fake: { type: "boolean", default: false },
      "batch-size": { type: "string", default: "32" },
      seed: { type: "string", default: "0" },
      help: { type: "boolean", short: "h", default: false },
    },
  }).values;
  if (args.help) {
    return "help";
  }
  if (!args.input || !args.output) {
    throw new Error("--input and --output are required");
  }
  if (args.dim !== undefined && !args.fake) {
    throw new Error("--dim only applies to --fake mode; real models fix their own width");
  }
  if (args.model !== undefined && args.fake) {
    throw new Error("--model and --fake are mutually exclusive");
  }
  return {
    input: args.input,
    output: args.output,
    model: args.model,
    dim: args.dim === undefined ? undefined : integer("dim", args.dim, 1),
    fake: args.fake,
    seed: integer("seed", args.seed, 0),
    batchSize: integer("batch-size", args["batch-size"], 1),
    normalize: true,
  };
}

export async function main(argv: string[]): Promise<number> {
  let job: EmbedJob | "help";
  try {
    job = parseJob(argv);
  } catch (err) {
    console.error(`embed: ${err instanceof Error ? err.message : err}`);
    console.error(USAGE);
    return 2;
  }
  if (job === "help") {
    console.log(USAGE);
    return 0;
  }

  try {
    const result = await encodeDataset(job);
    console.log(`wrote ${result.count} embeddings of dim ${result.dim} to ${job.output}`);
    return 0;
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    console.error(`embed: ${message}`);
    if (/memory|allocat/i.test(message)) {
      console.error("embed: try a smaller --batch-size");
    }
    return 1;
  }
}

const entry = process.argv[1];
if (entry !== undefined && import.meta.url === pathToFileURL(entry).href) {
  process.exitCode = await main(process.argv.slice(2));
}
