/**
 * Deterministic "toy-v1" joint encoder.
 *
 * The engine's embedding format is encoder-agnostic; this encoder exists so
 * the exporter and the end-to-end retrieval path can be exercised without a
 * neural runtime. Image features are per-channel means over a 2x2 grid
 * (12 dims); text features are L2-normalized hashed character uni/bigram
 * counts (16 dims). Same input, same vector, on every platform.
 */

import type { PpmImage } from "./ppm.js";

export const ENCODER_NAME = "toy-v1";
export const IMAGE_DIM = 12;
export const TEXT_DIM = 16;

const FNV_OFFSET_32 = 0x811c9dc5;
const FNV_PRIME_32 = 0x01000193;

export function fnv1a32(text: string): number {
  let hash = FNV_OFFSET_32;
  for (const ch of text) {
    // Hash full code points so multi-byte scripts spread across buckets.
    let cp = ch.codePointAt(0)!;
    while (cp > 0) {
      hash ^= cp & 0xff;
      hash = Math.imul(hash, FNV_PRIME_32) >>> 0;
      cp >>>= 8;
    }
  }
  return hash >>> 0;
}

/** Per-channel means over a 2x2 spatial grid, scaled to [0, 1]. */
export function encodeImage(image: PpmImage): number[] {
  const { width, height, pixels } = image;
  const sums = new Float64Array(IMAGE_DIM);
  const counts = new Float64Array(IMAGE_DIM);
  for (let y = 0; y < height; y++) {
    const gy = y * 2 >= height ? 1 : 0;
    for (let x = 0; x < width; x++) {
      const gx = x * 2 >= width ? 1 : 0;
      const cell = (gy * 2 + gx) * 3;
      const p = (y * width + x) * 3;
      sums[cell] += pixels[p];
      sums[cell + 1] += pixels[p + 1];
      sums[cell + 2] += pixels[p + 2];
      counts[cell] += 1;
      counts[cell + 1] += 1;
      counts[cell + 2] += 1;
    }
  }
  const out = new Array<number>(IMAGE_DIM);
  for (let i = 0; i < IMAGE_DIM; i++) {
    out[i] = counts[i] > 0 ? sums[i] / counts[i] / 255 : 0;
  }
  return out;
}

/** Hashed uni+bigram counts over code points, L2-normalized. */
export function encodeText(text: string): number[] {
  const counts = new Float64Array(TEXT_DIM);
  const chars = Array.from(text);
  for (let i = 0; i < chars.length; i++) {
    counts[fnv1a32(chars[i]) % TEXT_DIM] += 1;
    if (i + 1 < chars.length) {
      counts[fnv1a32(chars[i] + chars[i + 1]) % TEXT_DIM] += 1;
    }
  }
  let norm = 0;
  for (let i = 0; i < TEXT_DIM; i++) norm += counts[i] * counts[i];
  norm = Math.sqrt(norm);
  const out = new Array<number>(TEXT_DIM);
  for (let i = 0; i < TEXT_DIM; i++) {
    out[i] = norm > 0 ? counts[i] / norm : 0;
  }
  return out;
}
