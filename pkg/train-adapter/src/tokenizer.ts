/**
 * Byte-level tokenizer: ids 0..255 are raw UTF-8 bytes, 256 is BOS, 257 is
 * EOS. No external vocabulary files, so the adapter works fully offline.
 */

export const BOS = 256;
export const EOS = 257;
export const VOCAB_SIZE = 258;

const encoder = new TextEncoder();
const decoder = new TextDecoder();

export function encode(text: string): number[] {
  return Array.from(encoder.encode(text));
}

export function decode(tokens: number[]): string {
  return decoder.decode(Uint8Array.from(tokens.filter((t) => t < 256)));
}
