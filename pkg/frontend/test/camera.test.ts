import assert from "node:assert/strict";
import { test } from "node:test";

import {
  CLAMP_FACTOR,
  cameraRotation,
  controlTick,
  emptyInput,
  initialCamera,
} from "../src/camera.js";

const D1 = 0.8; // inmost sphere radius used throughout

function norm(cam: { x: number; y: number; z: number }): number {
  return Math.hypot(cam.x, cam.y, cam.z);
}

test("no input leaves the camera stationary (no drift)", () => {
  let cam = initialCamera();
  cam = { ...cam, x: 0.1, y: -0.05, z: 0.2, yaw: 0.3, pitch: -0.1 };
  const before = { ...cam };
  for (let i = 0; i < 240; i++) {
    cam = controlTick(cam, emptyInput(), 1 / 60, D1);
  }
  assert.deepEqual(cam, before);
});

test("holding forward at the clamp boundary keeps the camera on it", () => {
  let cam = initialCamera();
  const input = { ...emptyInput(), forward: true };
  for (let i = 0; i < 600; i++) {
    cam = controlTick(cam, input, 1 / 60, D1);
  }
  const limit = CLAMP_FACTOR * D1;
  assert.ok(Math.abs(norm(cam) - limit) < 1e-12, `norm ${norm(cam)} vs ${limit}`);
  // still on the surface after more input, not oscillating past it
  cam = controlTick(cam, input, 1 / 60, D1);
  assert.ok(norm(cam) <= limit + 1e-12);
});

test("clamp invariant survives a 10-second scripted input fuzz", () => {
  // deterministic LCG so the fuzz is reproducible
  let state = 0x2545f491;
  const rand = () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 0xffffffff;
  };
  let cam = initialCamera();
  const limit = CLAMP_FACTOR * D1 + 1e-12;
  for (let tick = 0; tick < 600; tick++) {
    const input = {
      forward: rand() < 0.45,
      back: rand() < 0.25,
      left: rand() < 0.3,
      right: rand() < 0.3,
      up: rand() < 0.25,
      down: rand() < 0.2,
      dragX: (rand() - 0.5) * 60,
      dragY: (rand() - 0.5) * 60,
    };
    cam = controlTick(cam, input, 1 / 60, D1, { moveSpeed: 2.5 });
    assert.ok(norm(cam) <= limit, `tick ${tick}: ${norm(cam)} > ${limit}`);
    assert.ok(Math.abs(cam.pitch) < Math.PI / 2);
  }
});

test("rotation matches yaw-then-pitch composition", () => {
  const cam = { ...initialCamera(), yaw: 0.6, pitch: -0.25 };
  const r = cameraRotation(cam);
  const cy = Math.cos(0.6);
  const sy = Math.sin(0.6);
  const cp = Math.cos(-0.25);
  const sp = Math.sin(-0.25);
  // R_yaw @ R_pitch applied to +z: (sy*cp, -sp, cy*cp)
  const fwd = [r[6], r[7], r[8]];
  assert.ok(Math.abs(fwd[0] - sy * cp) < 1e-12);
  assert.ok(Math.abs(fwd[1] - -sp) < 1e-12);
  assert.ok(Math.abs(fwd[2] - cy * cp) < 1e-12);
  // orthonormality
  for (const [a, b, want] of [
    [[r[0], r[1], r[2]], [r[3], r[4], r[5]], 0],
    [[r[0], r[1], r[2]], [r[0], r[1], r[2]], 1],
    [[r[6], r[7], r[8]], [r[6], r[7], r[8]], 1],
  ] as const) {
    const dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    assert.ok(Math.abs(dot - want) < 1e-12);
  }
});

test("yaw stays wrapped after long drags", () => {
  let cam = initialCamera();
  const input = { ...emptyInput(), dragX: 500 };
  for (let i = 0; i < 400; i++) {
    cam = controlTick(cam, input, 1 / 60, D1);
  }
  assert.ok(cam.yaw > -Math.PI && cam.yaw <= Math.PI);
});
