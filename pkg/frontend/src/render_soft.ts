/** CPU reference renderer.
 *
 * Per output pixel: build the view ray, intersect every concentric sphere
 * analytically (the eye is always inside the inmost one), sample that
 * layer's ERP texture bilinearly (wrapping in longitude, clamping at the
 * poles), and composite front to back with the over operator.
 *
 * This path is the testable ground truth for the WebGL renderer and uses
 * exactly the ERP conventions of the bundle producer: pixel i is sampled
 * at longitude (i + 0.5)/W * 2pi - pi, forward is +z, up is +y.
 */

import { cameraRotation, type CameraState } from "./camera.js";
import type { MsiBundle } from "./types.js";

export interface RenderOptions {
  /** Render a single layer's alpha as grayscale instead of compositing. */
  inspectLayer?: number;
}

function sampleBilinearWrap(
  layer: Float32Array,
  w: number,
  h: number,
  u: number,
  v: number,
  out: Float32Array,
): void {
  u = ((u % w) + w) % w;
  v = Math.min(Math.max(v, 0), h - 1);
  const u0 = Math.floor(u);
  const v0 = Math.floor(v);
  const fu = u - u0;
  const fv = v - v0;
  const u1 = (u0 + 1) % w;
  const v1 = Math.min(v0 + 1, h - 1);
  const w00 = (1 - fu) * (1 - fv);
  const w10 = fu * (1 - fv);
  const w01 = (1 - fu) * fv;
  const w11 = fu * fv;
  const i00 = (v0 * w + u0) * 4;
  const i10 = (v0 * w + u1) * 4;
  const i01 = (v1 * w + u0) * 4;
  const i11 = (v1 * w + u1) * 4;
  for (let c = 0; c < 4; c++) {
    out[c] = w00 * layer[i00 + c] + w10 * layer[i10 + c] + w01 * layer[i01 + c] + w11 * layer[i11 + c];
  }
}

/** ERP coordinates of a unit direction (seam-safe shifted atan2). */
export function dirToErp(
  x: number, y: number, z: number, w: number, h: number,
): [number, number] {
  const planar = Math.hypot(x, z);
  if (planar < 1e-15) {
    return [w / 2, y > 0 ? 0 : h];
  }
  let shifted = Math.atan2(-x, -z);
  if (shifted <= 0) shifted += 2 * Math.PI;
  let u = (shifted / (2 * Math.PI)) * w - 0.5;
  u = ((u % w) + w) % w;
  const lat = Math.asin(Math.min(Math.max(y, -1), 1));
  const v = Math.min(Math.max(((Math.PI / 2 - lat) / Math.PI) * h - 0.5, 0), h);
  return [u, v];
}

/** Render into an RGB Float32Array of length width*height*3. */
export function renderView(
  bundle: MsiBundle,
  camera: CameraState,
  width: number,
  height: number,
  opts: RenderOptions = {},
): Float32Array {
  const { manifest, layers } = bundle;
  const radii = manifest.radii_m;
  const texW = manifest.width;
  const texH = manifest.height;
  const eyeNorm = Math.hypot(camera.x, camera.y, camera.z);
  if (eyeNorm >= radii[0]) {
    throw new Error(`camera outside the inmost sphere (${eyeNorm} >= ${radii[0]})`);
  }

  const rot = cameraRotation(camera);
  const focal = width / 2 / Math.tan(camera.fov / 2);
  const out = new Float32Array(width * height * 3);
  const rgba = new Float32Array(4);
  const eyeDot = camera.x * camera.x + camera.y * camera.y + camera.z * camera.z;

  const inspect = opts.inspectLayer;
  const layerOrder = inspect === undefined ? radii.map((_, i) => i) : [inspect];

  for (let py = 0; py < height; py++) {
    for (let px = 0; px < width; px++) {
      // pinhole ray in camera frame, then rotated into the rig frame
      const cx = (px + 0.5 - width / 2) / focal;
      const cy = -(py + 0.5 - height / 2) / focal;
      const cz = 1;
      const inv = 1 / Math.hypot(cx, cy, cz);
      const dx = (rot[0] * cx + rot[3] * cy + rot[6] * cz) * inv;
      const dy = (rot[1] * cx + rot[4] * cy + rot[7] * cz) * inv;
      const dz = (rot[2] * cx + rot[5] * cy + rot[8] * cz) * inv;

      let r = 0;
      let g = 0;
      let b = 0;
      let trans = 1;
      const od = camera.x * dx + camera.y * dy + camera.z * dz;
      for (const li of layerOrder) {
        const radius = radii[li];
        const t = -od + Math.sqrt(od * od - eyeDot + radius * radius);
        const sx = (camera.x + t * dx) / radius;
        const sy = (camera.y + t * dy) / radius;
        const sz = (camera.z + t * dz) / radius;
        const [u, v] = dirToErp(sx, sy, sz, texW, texH);
        sampleBilinearWrap(layers[li], texW, texH, u, v, rgba);
        if (inspect !== undefined) {
          r = g = b = rgba[3];
          trans = 0;
          break;
        }
        const a = rgba[3];
        r += trans * a * rgba[0];
        g += trans * a * rgba[1];
        b += trans * a * rgba[2];
        trans *= 1 - a;
        if (trans < 1e-6) break;
      }
      const o = (py * width + px) * 3;
      out[o] = r;
      out[o + 1] = g;
      out[o + 2] = b;
    }
  }
  return out;
}
