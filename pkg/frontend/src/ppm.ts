/**
 * Minimal binary PPM (P6, 8-bit) reader/writer.
 *
 * The toy corpus uses PPM so the exporter needs no image codec; any
 * whitespace/comment layout allowed by the header grammar is accepted.
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface PpmImage {
  width: number;
  height: number;
  /** RGB interleaved, length = width * height * 3 */
  pixels: Uint8Array;
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d || byte === 0x0c || byte === 0x0b;
}

class HeaderScanner {
  constructor(private data: Uint8Array, public offset = 0) {}

  /** Read the next whitespace-delimited token, skipping '#' comments. */
  nextToken(): string {
    const d = this.data;
    while (this.offset < d.length) {
      if (isSpace(d[this.offset])) {
        this.offset++;
      } else if (d[this.offset] === 0x23) {
        while (this.offset < d.length && d[this.offset] !== 0x0a) this.offset++;
      } else {
        break;
      }
    }
    const start = this.offset;
    while (this.offset < d.length && !isSpace(d[this.offset])) this.offset++;
    if (start === this.offset) throw new Error("unexpected end of PPM header");
    return Buffer.from(d.subarray(start, this.offset)).toString("ascii");
  }
}

export function decodePpm(data: Uint8Array): PpmImage {
  const scanner = new HeaderScanner(data);
  const magic = scanner.nextToken();
  if (magic !== "P6") {
    throw new Error(`not a binary PPM (magic ${JSON.stringify(magic)})`);
  }
  const width = Number(scanner.nextToken());
  const height = Number(scanner.nextToken());
  const maxval = Number(scanner.nextToken());
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new Error(`bad PPM dimensions ${width}x${height}`);
  }
  if (maxval !== 255) {
    throw new Error(`unsupported PPM maxval ${maxval}`);
  }
  // Exactly one whitespace byte separates the header from the raster.
  const start = scanner.offset + 1;
  const expected = width * height * 3;
  if (data.length - start < expected) {
    throw new Error(`truncated PPM raster (${data.length - start} of ${expected} bytes)`);
  }
  return { width, height, pixels: data.subarray(start, start + expected) };
}

export function readPpm(path: string): PpmImage {
  return decodePpm(readFileSync(path));
}

export function encodePpm(image: PpmImage): Buffer {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(image.pixels)]);
}

export function writePpm(path: string, image: PpmImage): void {
  writeFileSync(path, encodePpm(image));
}
