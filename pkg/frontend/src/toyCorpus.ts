/**
 * Deterministic 20-image toy corpus: PPM images plus an annotation JSONL in
 * the engine's format, for exporter round-trip and retrieval smoke tests.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { writePpm } from "./ppm.js";
import { EMOTION_NAMES } from "./mockServer.js";

const LANGUAGES = ["english", "arabic", "chinese"] as const;
const STYLES = ["Impressionism", "Cubism", "Baroque", "Ukiyo-e"] as const;

const UTTERANCES = [
  "a calm lake at dawn",
  "storm clouds crush the little harbor",
  "golden wheat and a sleeping dog",
  "the dancer frozen mid turn",
  "ruins where the market used to sing",
  "children racing paper boats downstream",
  "a butcher counter under cold light",
  "the last lamp on an empty pier",
  "سوق قديم يضج بالألوان",
  "قارب وحيد في عاصفة سوداء",
  "حديقة تنام تحت المطر",
  "وجه يضحك خلف النافذة",
  "雪后的庭院一片安静",
  "码头上堆满了旧渔网",
  "孩子们围着糖人摊子笑",
  "暮色里的孤塔与乌鸦",
  "a violin left on a green chair",
  "ظلال طويلة فوق الرمال",
  "集市的灯一盏盏熄灭",
  "the tide erasing footprints slowly",
] as const;

/** Small deterministic PRNG (mulberry32) so image bytes never drift. */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function makeToyCorpus(root: string, count = 20): { annotationsPath: string; imageRoot: string } {
  const imageRoot = join(root, "images");
  mkdirSync(imageRoot, { recursive: true });
  const lines: string[] = [];
  for (let i = 0; i < count; i++) {
    const id = `img-${String(i).padStart(3, "0")}`;
    const rand = mulberry32(1000 + i);
    const width = 24;
    const height = 18;
    const pixels = new Uint8Array(width * height * 3);
    // Gradient keyed to the sample index plus mild noise: distinct but
    // stable per-image statistics for the encoder to pick up.
    const baseR = (i * 37) % 256;
    const baseG = (i * 59) % 256;
    const baseB = (i * 83) % 256;
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        const p = (y * width + x) * 3;
        pixels[p] = (baseR + ((x * 255) / width) | 0) % 256;
        pixels[p + 1] = (baseG + ((y * 255) / height) | 0) % 256;
        pixels[p + 2] = (baseB + ((rand() * 64) | 0)) % 256;
      }
    }
    writePpm(join(imageRoot, `${id}.ppm`), { width, height, pixels });
    const split = i < 12 ? "train" : i < 16 ? "val" : "test";
    lines.push(
      JSON.stringify({
        id,
        art_style: STYLES[i % STYLES.length],
        language: LANGUAGES[i % LANGUAGES.length],
        utterance: UTTERANCES[i % UTTERANCES.length],
        split,
        image_ref: `${id}.ppm`,
        emotion: EMOTION_NAMES[i % EMOTION_NAMES.length],
      }),
    );
  }
  const annotationsPath = join(root, "annotations.jsonl");
  writeFileSync(annotationsPath, lines.join("\n") + "\n", "utf-8");
  return { annotationsPath, imageRoot };
}
