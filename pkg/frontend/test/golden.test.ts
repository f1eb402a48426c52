/** Golden comparison against the primary renderer plus rendering
 * semantics that do not need a reference image. */

import assert from "node:assert/strict";
import { test } from "node:test";
import { readFile } from "node:fs/promises";
import { join } from "node:path";

import { loadBundle } from "../src/bundle.js";
import { initialCamera } from "../src/camera.js";
import { decodePng, toFloatRgba } from "../src/png.js";
import { renderView } from "../src/render_soft.js";
import type { MsiBundle } from "../src/types.js";
import { GOLDEN_DIR, fileIo, psnr } from "./helpers.js";

interface GoldenView {
  name: string;
  eye: number[];
  yaw_deg: number;
  pitch_deg: number;
  fov_deg: number;
  width: number;
  height: number;
  image: string;
  min_psnr_db: number;
}

async function goldenRgb(name: string): Promise<Float32Array> {
  const io = fileIo(GOLDEN_DIR);
  const img = await decodePng(await io.fetchBytes(name), io.inflate);
  const rgba = toFloatRgba(img);
  const rgb = new Float32Array(img.width * img.height * 3);
  for (let i = 0; i < img.width * img.height; i++) {
    rgb[i * 3] = rgba[i * 4];
    rgb[i * 3 + 1] = rgba[i * 4 + 1];
    rgb[i * 3 + 2] = rgba[i * 4 + 2];
  }
  return rgb;
}

async function loadGolden(): Promise<{ bundle: MsiBundle; views: GoldenView[] }> {
  const meta = JSON.parse(await readFile(join(GOLDEN_DIR, "golden_meta.json"), "utf-8"));
  const bundle = await loadBundle(fileIo(join(GOLDEN_DIR, meta.bundle)));
  return { bundle, views: meta.views };
}

test("viewer reproduces the primary renderer at the origin (>= 40 dB)", async () => {
  const { bundle, views } = await loadGolden();
  const spec = views.find((v) => v.name === "origin")!;
  const cam = {
    ...initialCamera((spec.fov_deg * Math.PI) / 180),
    x: spec.eye[0], y: spec.eye[1], z: spec.eye[2],
    yaw: (spec.yaw_deg * Math.PI) / 180,
    pitch: (spec.pitch_deg * Math.PI) / 180,
  };
  const ours = renderView(bundle, cam, spec.width, spec.height);
  const reference = await goldenRgb(spec.image);
  const score = psnr(ours, reference);
  assert.ok(score >= spec.min_psnr_db, `PSNR ${score.toFixed(2)} dB < ${spec.min_psnr_db}`);
});

test("viewer reproduces the primary renderer at a translated pose", async () => {
  const { bundle, views } = await loadGolden();
  const spec = views.find((v) => v.name === "offset")!;
  const cam = {
    ...initialCamera((spec.fov_deg * Math.PI) / 180),
    x: spec.eye[0], y: spec.eye[1], z: spec.eye[2],
    yaw: (spec.yaw_deg * Math.PI) / 180,
    pitch: (spec.pitch_deg * Math.PI) / 180,
  };
  const ours = renderView(bundle, cam, spec.width, spec.height);
  const reference = await goldenRgb(spec.image);
  const score = psnr(ours, reference);
  assert.ok(score >= spec.min_psnr_db, `PSNR ${score.toFixed(2)} dB < ${spec.min_psnr_db}`);
});

function syntheticBundle(): MsiBundle {
  const w = 16;
  const h = 8;
  const inner = new Float32Array(w * h * 4);
  const outer = new Float32Array(w * h * 4);
  for (let i = 0; i < w * h; i++) {
    inner.set([0.8, 0.2, 0.1, 1.0], i * 4); // fully opaque
    outer.set([0.0, 0.9, 0.3, 1.0], i * 4);
  }
  return {
    manifest: {
      format_version: 1, width: w, height: h, num_layers: 2,
      radii_m: [1.0, 5.0], color_space: "srgb", alpha: "straight",
      layer_files: ["a", "b"],
    },
    layers: [inner, outer],
  };
}

test("fully opaque inmost layer hides the outer layers", () => {
  const bundle = syntheticBundle();
  const img = renderView(bundle, initialCamera(), 32, 24);
  for (let i = 0; i < img.length; i += 3) {
    assert.ok(Math.abs(img[i] - 0.8) < 1e-6);
    assert.ok(Math.abs(img[i + 1] - 0.2) < 1e-6);
  }
});

test("rendering is a pure function of bundle and camera", () => {
  const bundle = syntheticBundle();
  const cam = { ...initialCamera(), x: 0.2, y: -0.1, z: 0.05, yaw: 1.1, pitch: 0.2 };
  const a = renderView(bundle, cam, 40, 30);
  const b = renderView(bundle, cam, 40, 30);
  assert.deepEqual(Array.from(a), Array.from(b));
});

test("alpha-inspect renders the chosen layer's alpha as grayscale", () => {
  const bundle = syntheticBundle();
  // make the outer layer's alpha a gradient to distinguish it
  for (let i = 0; i < 16 * 8; i++) {
    bundle.layers[1][i * 4 + 3] = (i % 16) / 15;
  }
  const img = renderView(bundle, initialCamera(), 32, 24, { inspectLayer: 1 });
  let varies = false;
  for (let i = 0; i < img.length; i += 3) {
    assert.equal(img[i], img[i + 1]);
    assert.equal(img[i + 1], img[i + 2]);
    if (Math.abs(img[i] - img[0]) > 0.05) varies = true;
  }
  assert.ok(varies, "inspect view should show the alpha gradient");
});

test("camera outside the inmost sphere is rejected", () => {
  const bundle = syntheticBundle();
  const cam = { ...initialCamera(), x: 1.5 };
  assert.throws(() => renderView(bundle, cam, 8, 8), /inmost/);
});

// The >= 30 fps requirement concerns the WebGL path on a desktop GPU; it is
// measured in the browser HUD and has no meaningful headless equivalent.
test("perf smoke: 30 fps at N=32 / 640x320 on a desktop GPU", { skip: "needs a GPU; run in the browser and read the HUD fps" }, () => {});
