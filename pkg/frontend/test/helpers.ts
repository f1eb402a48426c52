/** Node-side test helpers: filesystem bundle I/O and PSNR. */

import { readFile } from "node:fs/promises";
import { inflateSync } from "node:zlib";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import type { BundleIo } from "../src/bundle.js";

export const GOLDEN_DIR = join(fileURLToPath(import.meta.url), "..", "..", "..", "test", "golden");

export function fileIo(baseDir: string): BundleIo {
  return {
    async fetchJson(path: string): Promise<unknown> {
      return JSON.parse(await readFile(join(baseDir, path), "utf-8"));
    },
    async fetchBytes(path: string): Promise<Uint8Array> {
      return new Uint8Array(await readFile(join(baseDir, path)));
    },
    inflate(data: Uint8Array): Uint8Array {
      return new Uint8Array(inflateSync(data));
    },
  };
}

/** PSNR between float [0,1] RGB buffers of equal length. */
export function psnr(a: Float32Array | number[], b: Float32Array | number[]): number {
  if (a.length !== b.length) throw new Error("length mismatch");
  let sum = 0;
  for (let i = 0; i < a.length; i++) {
    const d = a[i] - b[i];
    sum += d * d;
  }
  const mse = sum / a.length;
  if (mse === 0) return Infinity;
  return 10 * Math.log10(1 / mse);
}
