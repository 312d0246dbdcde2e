export { hashedEmbedding } from "./hashing.js";
export { fixedPrecision, embeddingLine } from "./format.js";
export { readDataset } from "./dataset.js";
export { encodeDataset } from "./encode.js";
export { loadEncoder, DEFAULT_MODEL, DEFAULT_MODEL_DIM } from "./model.js";
export { main } from "./cli.js";
export type { DatasetRow } from "./dataset.js";
export type { EmbedJob, EncodeResult } from "./encode.js";
export type { Encoder, EncoderOutput } from "./model.js";
