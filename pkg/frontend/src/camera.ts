/** Viewer camera state and the input-driven update step.
 *
 * The camera lives in the rig frame (+z forward, +y up). Its position is
 * clamped to 0.9 x the inmost sphere radius after every tick, so the view
 * can never reach the degenerate grazing geometry at the first layer.
 */

export const CLAMP_FACTOR = 0.9;
const PITCH_LIMIT = Math.PI / 2 - 0.01;

export interface CameraState {
  x: number;
  y: number;
  z: number;
  yaw: number; // radians, + turns toward +x
  pitch: number; // radians, + tilts toward -y (down), matching the pipeline
  fov: number; // horizontal, radians
}

export interface InputState {
  forward: boolean;
  back: boolean;
  left: boolean;
  right: boolean;
  up: boolean;
  down: boolean;
  /** accumulated mouse drag since the last tick, pixels */
  dragX: number;
  dragY: number;
}

export function initialCamera(fov = Math.PI / 2): CameraState {
  return { x: 0, y: 0, z: 0, yaw: 0, pitch: 0, fov };
}

export function emptyInput(): InputState {
  return {
    forward: false, back: false, left: false, right: false,
    up: false, down: false, dragX: 0, dragY: 0,
  };
}

/** Column-major 3x3 rotation: yaw about +y then pitch about +x. */
export function cameraRotation(cam: CameraState): number[] {
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  // R = R_yaw * R_pitch, columns are camera axes in rig coordinates
  return [
    cy, 0, -sy, // right
    sy * sp, cp, cy * sp, // up
    sy * cp, -sp, cy * cp, // forward
  ];
}

export function clampPosition(cam: CameraState, inmostRadius: number): CameraState {
  const limit = CLAMP_FACTOR * inmostRadius;
  const norm = Math.hypot(cam.x, cam.y, cam.z);
  if (norm <= limit || norm === 0) return cam;
  const scale = limit / norm;
  return { ...cam, x: cam.x * scale, y: cam.y * scale, z: cam.z * scale };
}

export interface ControlOptions {
  moveSpeed?: number; // m/s
  lookSpeed?: number; // rad/pixel
}

/** One event-loop tick: apply accumulated input over dt seconds.
 *
 * Pure: returns the next camera state, never mutates. The position clamp
 * is enforced on the result unconditionally.
 */
export function controlTick(
  cam: CameraState,
  input: InputState,
  dt: number,
  inmostRadius: number,
  opts: ControlOptions = {},
): CameraState {
  const moveSpeed = opts.moveSpeed ?? 0.4;
  const lookSpeed = opts.lookSpeed ?? 0.005;

  let yaw = cam.yaw + input.dragX * lookSpeed;
  let pitch = cam.pitch + input.dragY * lookSpeed; // drag down looks down
  pitch = Math.min(PITCH_LIMIT, Math.max(-PITCH_LIMIT, pitch));
  // keep yaw in (-pi, pi]; rewrap only when outside so an idle camera
  // holds its state bit-exactly
  if (yaw <= -Math.PI || yaw > Math.PI) {
    yaw = Math.atan2(Math.sin(yaw), Math.cos(yaw));
  }

  // translation in the yaw frame; vertical motion stays world-aligned
  const fx = Math.sin(yaw);
  const fz = Math.cos(yaw);
  let dxr = 0;
  let dzr = 0;
  let dy = 0;
  if (input.forward) { dxr += fx; dzr += fz; }
  if (input.back) { dxr -= fx; dzr -= fz; }
  if (input.right) { dxr += fz; dzr -= fx; }
  if (input.left) { dxr -= fz; dzr += fx; }
  if (input.up) dy += 1;
  if (input.down) dy -= 1;

  const step = moveSpeed * dt;
  const next: CameraState = {
    ...cam,
    yaw,
    pitch,
    x: cam.x + dxr * step,
    y: cam.y + dy * step,
    z: cam.z + dzr * step,
  };
  return clampPosition(next, inmostRadius);
}
