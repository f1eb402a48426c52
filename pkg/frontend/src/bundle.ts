/** MSI bundle loading and validation.
 *
 * I/O is injected (fetch vs filesystem, DecompressionStream vs zlib), so
 * loading logic and validation behave identically in the browser and in
 * the node test-suite. Every schema violation is reported with the field
 * that caused it.
 */

import { decodePng, toFloatRgba, type Inflate } from "./png.js";
import {
  BundleValidationError,
  type BundleManifest,
  type BundleViolation,
  type MsiBundle,
} from "./types.js";

export interface BundleIo {
  /** Read and parse `<base>/manifest.json`. */
  fetchJson(path: string): Promise<unknown>;
  /** Read a sibling file's raw bytes; reject if missing. */
  fetchBytes(path: string): Promise<Uint8Array>;
  inflate: Inflate;
}

export function validateManifest(data: unknown): BundleManifest {
  const violations: BundleViolation[] = [];
  const obj = (typeof data === "object" && data !== null ? data : {}) as Record<string, unknown>;
  if (typeof data !== "object" || data === null) {
    throw new BundleValidationError([{ field: "manifest", message: "not a JSON object" }]);
  }

  const requireNumber = (field: string): number => {
    const value = obj[field];
    if (typeof value !== "number" || !Number.isFinite(value)) {
      violations.push({ field, message: "missing or not a finite number" });
      return 0;
    }
    return value;
  };

  const version = requireNumber("format_version");
  const width = requireNumber("width");
  const height = requireNumber("height");
  const numLayers = requireNumber("num_layers");

  if (version !== 0 && version !== 1) {
    violations.push({ field: "format_version", message: `unsupported version ${version}` });
  }
  if (width <= 0 || height <= 0) {
    violations.push({ field: "width", message: "dimensions must be positive" });
  }

  let radii: number[] = [];
  if (!Array.isArray(obj.radii_m) || obj.radii_m.some((r) => typeof r !== "number")) {
    violations.push({ field: "radii_m", message: "must be an array of numbers" });
  } else {
    radii = obj.radii_m as number[];
    if (radii.length !== numLayers) {
      violations.push({ field: "radii_m", message: `length ${radii.length} != num_layers ${numLayers}` });
    }
    for (let i = 1; i < radii.length; i++) {
      if (!(radii[i] > radii[i - 1])) {
        violations.push({
          field: "radii_m",
          message: `radii must be strictly ascending (index ${i}: ${radii[i]} <= ${radii[i - 1]})`,
        });
        break;
      }
    }
    if (radii.length > 0 && radii[0] <= 0) {
      violations.push({ field: "radii_m", message: "radii must be positive" });
    }
  }

  let layerFiles: string[] = [];
  if (!Array.isArray(obj.layer_files) || obj.layer_files.some((f) => typeof f !== "string")) {
    violations.push({ field: "layer_files", message: "must be an array of file names" });
  } else {
    layerFiles = obj.layer_files as string[];
    if (layerFiles.length !== numLayers) {
      violations.push({
        field: "layer_files",
        message: `length ${layerFiles.length} != num_layers ${numLayers}`,
      });
    }
  }

  if (violations.length > 0) throw new BundleValidationError(violations);
  return {
    format_version: version,
    width,
    height,
    num_layers: numLayers,
    radii_m: radii,
    color_space: typeof obj.color_space === "string" ? obj.color_space : "srgb",
    alpha: typeof obj.alpha === "string" ? obj.alpha : "straight",
    layer_files: layerFiles,
  };
}

export async function loadBundle(io: BundleIo): Promise<MsiBundle> {
  let manifestData: unknown;
  try {
    manifestData = await io.fetchJson("manifest.json");
  } catch (err) {
    throw new BundleValidationError([
      { field: "manifest.json", message: `unreadable: ${(err as Error).message}` },
    ]);
  }
  const manifest = validateManifest(manifestData);

  const layers: Float32Array[] = [];
  for (const name of manifest.layer_files) {
    let bytes: Uint8Array;
    try {
      bytes = await io.fetchBytes(name);
    } catch {
      throw new BundleValidationError([
        { field: "layer_files", message: `missing layer file ${name}` },
      ]);
    }
    const img = await decodePng(bytes, io.inflate);
    if (img.width !== manifest.width || img.height !== manifest.height) {
      throw new BundleValidationError([
        {
          field: "layer_files",
          message: `${name} is ${img.width}x${img.height}, manifest says ${manifest.width}x${manifest.height}`,
        },
      ]);
    }
    layers.push(toFloatRgba(img));
  }
  return { manifest, layers };
}

/** Browser I/O: plain HTTP fetch + DecompressionStream("deflate"). */
export function httpIo(baseUrl: string): BundleIo {
  const base = baseUrl.endsWith("/") ? baseUrl : baseUrl + "/";
  return {
    async fetchJson(path: string): Promise<unknown> {
      const res = await fetch(base + path);
      if (!res.ok) throw new Error(`${res.status} ${res.statusText}`);
      return res.json();
    },
    async fetchBytes(path: string): Promise<Uint8Array> {
      const res = await fetch(base + path);
      if (!res.ok) throw new Error(`${res.status} ${res.statusText}`);
      return new Uint8Array(await res.arrayBuffer());
    },
    async inflate(data: Uint8Array): Promise<Uint8Array> {
      const stream = new Blob([data as BlobPart])
        .stream()
        .pipeThrough(new DecompressionStream("deflate"));
      return new Uint8Array(await new Response(stream).arrayBuffer());
    },
  };
}
