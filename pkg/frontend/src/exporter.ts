/**
 * Embedding exporter: run an encoder over an annotation file and write the
 * engine's embedding JSONL format.
 *
 * Only the "toy-v1" encoder ships here; the encoder name stays a job
 * parameter so a real image/text model can slot in behind the same output
 * contract (constant dims, one row per annotation id).
 */

import { existsSync, readFileSync, writeFileSync } from "node:fs";
import { isAbsolute, join } from "node:path";

import { readPpm } from "./ppm.js";
import { ENCODER_NAME, encodeImage, encodeText } from "./toyEncoder.js";

export interface ExportJob {
  annotationsPath: string;
  imageRoot: string;
  encoder: string;
  outputPath: string;
  batchSize?: number;
}

export interface AnnotationRow {
  id: string;
  art_style: string;
  language: string;
  utterance: string;
  split: string;
  image_ref: string;
  emotion?: string;
}

export class MissingImage extends Error {
  constructor(public id: string, path: string) {
    super(`missing image for ${id}: ${path}`);
    this.name = "MissingImage";
  }
}

export class EncoderFailure extends Error {
  constructor(public id: string, cause: unknown) {
    super(`encoder failed on ${id}: ${cause instanceof Error ? cause.message : String(cause)}`);
    this.name = "EncoderFailure";
  }
}

export function readAnnotations(path: string): AnnotationRow[] {
  const rows: AnnotationRow[] = [];
  const lines = readFileSync(path, "utf-8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch (err) {
      throw new Error(`bad annotation JSON at line ${i + 1}`);
    }
    rows.push(parsed as AnnotationRow);
  }
  return rows;
}

export interface EmbeddingRow {
  id: string;
  image_embed: number[];
  text_embed: number[];
}

export function encodeRecord(row: AnnotationRow, imageRoot: string): EmbeddingRow {
  const imagePath = isAbsolute(row.image_ref) ? row.image_ref : join(imageRoot, row.image_ref);
  if (!existsSync(imagePath)) {
    throw new MissingImage(row.id, imagePath);
  }
  try {
    return {
      id: row.id,
      image_embed: encodeImage(readPpm(imagePath)),
      text_embed: encodeText(row.utterance),
    };
  } catch (err) {
    if (err instanceof MissingImage) throw err;
    throw new EncoderFailure(row.id, err);
  }
}

export function exportEmbeddings(job: ExportJob): EmbeddingRow[] {
  if (job.encoder !== ENCODER_NAME) {
    throw new EncoderFailure("*", `unknown encoder ${JSON.stringify(job.encoder)}`);
  }
  const annotations = readAnnotations(job.annotationsPath);
  const seen = new Set<string>();
  const rows: EmbeddingRow[] = [];
  const batchSize = job.batchSize ?? 32;
  for (let start = 0; start < annotations.length; start += batchSize) {
    for (const annotation of annotations.slice(start, start + batchSize)) {
      if (seen.has(annotation.id)) {
        throw new EncoderFailure(annotation.id, "duplicate annotation id");
      }
      seen.add(annotation.id);
      rows.push(encodeRecord(annotation, job.imageRoot));
    }
  }
  const out = rows.map((r) => JSON.stringify(r)).join("\n") + (rows.length ? "\n" : "");
  writeFileSync(job.outputPath, out, "utf-8");
  return rows;
}
