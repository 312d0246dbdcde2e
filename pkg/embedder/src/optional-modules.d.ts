// ambient fallback so the optional real-model dependency can be absent at
// build time; when installed, its own bundled types take precedence
declare module "@huggingface/transformers" {
  export function pipeline(task: string, model?: string): Promise<unknown>;
}
