/**
 * Real sentence-encoder support via `@huggingface/transformers`, installed
 * as an optional dependency; everything here degrades to a clear error so
 * `--fake` remains usable on machines without the package or model weights.
 */

export const DEFAULT_MODEL = "Xenova/all-mpnet-base-v2";
export const DEFAULT_MODEL_DIM = 768;

export interface EncoderOutput {
  dims: number[];
  data: ArrayLike<number>;
}

export type Encoder = (
  texts: string[],
  options: { pooling: "mean"; normalize: boolean },
) => Promise<EncoderOutput>;

/** Load a feature-extraction pipeline, or fail with an actionable message. */
export async function loadEncoder(model: string): Promise<Encoder> {
  let transformers: { pipeline: (task: string, model: string) => Promise<unknown> };
  try {
    transformers = await import("@huggingface/transformers");
  } catch {
    throw new Error(
      "real-model mode needs the optional @huggingface/transformers package; " +
        "install it or use --fake",
    );
  }
  try {
    const pipe = await transformers.pipeline("feature-extraction", model);
    return pipe as unknown as Encoder;
  } catch (err) {
    const detail = err instanceof Error ? err.message : String(err);
    throw new Error(`could not load encoder ${model}: ${detail}`);
  }
}
