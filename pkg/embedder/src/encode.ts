/**
 * Batch encoding of a dataset into the embedding JSONL the router loads:
 * one `{"id": ..., "vector": [...]}` record per input row, ids bijective
 * with the input, every vector the same dimension.
 */

import { writeFileSync } from "node:fs";

import { readDataset } from "./dataset.js";
import { embeddingLine } from "./format.js";
import { hashedEmbedding } from "./hashing.js";
import { DEFAULT_MODEL, DEFAULT_MODEL_DIM, loadEncoder } from "./model.js";

export interface EmbedJob {
  input: string;
  output: string;
  /** Real-encoder name; ignored when `fake` is set. */
  model?: string;
  /** Vector size for fake mode (default 768, the real default's width). */
  dim?: number;
  /** Feature-hashed pseudo-embeddings instead of a model. */
  fake: boolean;
  /** Seed for fake mode. */
  seed: number;
  batchSize: number;
  /** L2-normalize model outputs (fake vectors are unit-norm already). */
  normalize: boolean;
}

export interface EncodeResult {
  count: number;
  dim: number;
}

function batches<T>(items: T[], size: number): T[][] {
  const out: T[][] = [];
  for (let i = 0; i < items.length; i += size) {
    out.push(items.slice(i, i + size));
  }
  return out;
}

async function encodeBatch(job: EmbedJob, texts: string[]): Promise<number[][]> {
  if (job.fake) {
    return texts.map((text) => hashedEmbedding(text, job.dim ?? DEFAULT_MODEL_DIM, job.seed));
  }
  const encoder = await loadEncoder(job.model ?? DEFAULT_MODEL);
  const output = await encoder(texts, { pooling: "mean", normalize: job.normalize });
  const dim = output.dims[output.dims.length - 1];
  const data = Array.from(output.data, Number);
  return texts.map((_, i) => data.slice(i * dim, (i + 1) * dim));
}

/** Encode every dataset row and write the embedding JSONL. */
export async function encodeDataset(job: EmbedJob): Promise<EncodeResult> {
  if (job.batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${job.batchSize}`);
  }
  const rows = readDataset(job.input);
  const lines: string[] = [];
  let dim = 0;
  for (const batch of batches(rows, job.batchSize)) {
    const vectors = await encodeBatch(job, batch.map((row) => row.text));
    for (let i = 0; i < batch.length; i++) {
      const vector = vectors[i];
      if (dim === 0) {
        dim = vector.length;
      } else if (vector.length !== dim) {
        throw new Error(
          `inconsistent embedding dims: got ${vector.length} after ${dim} (${batch[i].id})`,
        );
      }
      lines.push(embeddingLine(batch[i].id, vector) + "\n");
    }
  }
  if (!job.fake && (job.model ?? DEFAULT_MODEL) === DEFAULT_MODEL && dim !== DEFAULT_MODEL_DIM) {
    throw new Error(`embedding size mismatch: expected ${DEFAULT_MODEL_DIM}, got ${dim}`);
  }
  writeFileSync(job.output, lines.join(""));
  return { count: rows.length, dim };
}
