/**
 * Deterministic feature-hashed text embeddings.
 *
 * A model-free stand-in for a sentence encoder: unit-norm vectors of any
 * dimension, computed from sha256 of the lowercased word tokens. The scheme
 * is runtime-neutral (bytes of `${seed}:${token}`), so files written here
 * are byte-compatible with the Python router's own hashed embedder.
 */

import { createHash } from "node:crypto";

const TOKEN_RE = /[a-z0-9]+/g;

/**
 * Embed `text` into a unit-norm vector of length `dim`.
 *
 * Each token adds +/-1 to one bucket: the bucket is the first 8 digest
 * bytes (big endian) mod dim, the sign is the parity of byte 8. Texts with
 * no tokens, or whose contributions cancel exactly, fall back to a single
 * seed-derived spike so the result is never the zero vector.
 */
export function hashedEmbedding(text: string, dim: number, seed = 0): number[] {
  if (!Number.isInteger(dim) || dim < 1) {
    throw new Error(`dim must be an integer >= 1, got ${dim}`);
  }
  const vec = new Float64Array(dim);
  const tokens = text.toLowerCase().match(TOKEN_RE) ?? [];
  for (const token of tokens) {
    const digest = createHash("sha256").update(`${seed}:${token}`, "utf8").digest();
    const bucket = Number(digest.readBigUInt64BE(0) % BigInt(dim));
    vec[bucket] += digest[8] % 2 === 0 ? 1 : -1;
  }
  if (!vec.some((v) => v !== 0)) {
    const digest = createHash("sha256").update(`${seed}:`, "utf8").digest();
    vec[Number(digest.readBigUInt64BE(0) % BigInt(dim))] = 1;
  }
  let sumSquares = 0;
  for (let i = 0; i < dim; i++) {
    sumSquares += vec[i] * vec[i];
  }
  const norm = Math.sqrt(sumSquares);
  const out = new Array<number>(dim);
  for (let i = 0; i < dim; i++) {
    out[i] = vec[i] / norm;
  }
  return out;
}
