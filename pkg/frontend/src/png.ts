/** Minimal PNG decoder for bundle layers.
 *
 * Handles what the pipeline writes: 8-bit truecolor (RGB) and
 * truecolor+alpha (RGBA), non-interlaced, all five scanline filters.
 * Decompression is injected so the same code runs on node (zlib) and in
 * the browser (DecompressionStream).
 */

export interface RawImage {
  width: number;
  height: number;
  channels: number; // 3 or 4
  data: Uint8Array; // interleaved, row-major
}

export type Inflate = (data: Uint8Array) => Uint8Array | Promise<Uint8Array>;

const PNG_SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

function readU32(bytes: Uint8Array, off: number): number {
  return (
    ((bytes[off] << 24) | (bytes[off + 1] << 16) | (bytes[off + 2] << 8) | bytes[off + 3]) >>> 0
  );
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export async function decodePng(bytes: Uint8Array, inflate: Inflate): Promise<RawImage> {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== PNG_SIGNATURE[i]) throw new Error("not a PNG file");
  }

  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  let interlace = 0;
  const idatParts: Uint8Array[] = [];

  let off = 8;
  while (off + 8 <= bytes.length) {
    const length = readU32(bytes, off);
    const kind = String.fromCharCode(bytes[off + 4], bytes[off + 5], bytes[off + 6], bytes[off + 7]);
    const body = bytes.subarray(off + 8, off + 8 + length);
    if (kind === "IHDR") {
      width = readU32(body, 0);
      height = readU32(body, 4);
      bitDepth = body[8];
      colorType = body[9];
      interlace = body[12];
    } else if (kind === "IDAT") {
      idatParts.push(body);
    } else if (kind === "IEND") {
      break;
    }
    off += 12 + length; // length + type + data + crc
  }

  if (width === 0 || height === 0) throw new Error("PNG missing IHDR");
  if (bitDepth !== 8) throw new Error(`unsupported PNG bit depth ${bitDepth}`);
  if (colorType !== 2 && colorType !== 6) {
    throw new Error(`unsupported PNG color type ${colorType} (want RGB or RGBA)`);
  }
  if (interlace !== 0) throw new Error("interlaced PNG not supported");

  const compressed = new Uint8Array(idatParts.reduce((n, p) => n + p.length, 0));
  let pos = 0;
  for (const part of idatParts) {
    compressed.set(part, pos);
    pos += part.length;
  }
  const raw = await inflate(compressed);

  const channels = colorType === 6 ? 4 : 3;
  const stride = width * channels;
  if (raw.length < height * (stride + 1)) throw new Error("PNG data truncated");

  const out = new Uint8Array(height * stride);
  let prev = new Uint8Array(stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const line = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const cur = out.subarray(y * stride, (y + 1) * stride);
    switch (filter) {
      case 0:
        cur.set(line);
        break;
      case 1:
        for (let i = 0; i < stride; i++) {
          cur[i] = (line[i] + (i >= channels ? cur[i - channels] : 0)) & 0xff;
        }
        break;
      case 2:
        for (let i = 0; i < stride; i++) {
          cur[i] = (line[i] + prev[i]) & 0xff;
        }
        break;
      case 3:
        for (let i = 0; i < stride; i++) {
          const left = i >= channels ? cur[i - channels] : 0;
          cur[i] = (line[i] + ((left + prev[i]) >> 1)) & 0xff;
        }
        break;
      case 4:
        for (let i = 0; i < stride; i++) {
          const left = i >= channels ? cur[i - channels] : 0;
          const upLeft = i >= channels ? prev[i - channels] : 0;
          cur[i] = (line[i] + paeth(left, prev[i], upLeft)) & 0xff;
        }
        break;
      default:
        throw new Error(`unknown PNG filter ${filter}`);
    }
    prev = cur;
  }
  return { width, height, channels, data: out };
}

/** Decoded bytes to interleaved RGBA floats in [0, 1] (alpha 1 if absent). */
export function toFloatRgba(img: RawImage): Float32Array {
  const n = img.width * img.height;
  const out = new Float32Array(n * 4);
  for (let i = 0; i < n; i++) {
    const src = i * img.channels;
    out[i * 4] = img.data[src] / 255;
    out[i * 4 + 1] = img.data[src + 1] / 255;
    out[i * 4 + 2] = img.data[src + 2] / 255;
    out[i * 4 + 3] = img.channels === 4 ? img.data[src + 3] / 255 : 1.0;
  }
  return out;
}
