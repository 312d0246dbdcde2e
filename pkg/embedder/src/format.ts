/**
 * Output serialization: one compact JSON record per line, floats rounded to
 * 9 significant digits for cross-platform diffability.
 */

/** Round to 9 significant digits, the cross-runtime serialization contract. */
export function fixedPrecision(value: number): number {
  return Number(value.toPrecision(9));
}

/** One embedding JSONL line (no trailing newline). */
export function embeddingLine(id: string, vector: number[]): string {
  return JSON.stringify({ id, vector: vector.map(fixedPrecision) });
}
