/** On-screen status overlay: position, layer count, fps, inspect state. */

import type { CameraState } from "./camera.js";

export interface HudState {
  layerCount: number;
  inspectLayer?: number;
  fps: number;
  backend: string;
}

export function hudText(cam: CameraState, hud: HudState): string {
  const pos = `(${cam.x.toFixed(3)}, ${cam.y.toFixed(3)}, ${cam.z.toFixed(3)}) m`;
  const inspect =
    hud.inspectLayer === undefined
      ? "off"
      : `layer ${hud.inspectLayer} / ${hud.layerCount - 1} (alpha)`;
  return [
    `position ${pos}`,
    `layers ${hud.layerCount}`,
    `inspect ${inspect}`,
    `${hud.fps.toFixed(0)} fps [${hud.backend}]`,
    "drag: look | WASD+QE: move | tab: alpha inspect | [ ]: layer",
  ].join("\n");
}

export function createHudElement(): HTMLDivElement {
  const el = document.createElement("div");
  el.style.position = "absolute";
  el.style.left = "12px";
  el.style.top = "12px";
  el.style.padding = "8px 10px";
  el.style.background = "rgba(0, 0, 0, 0.55)";
  el.style.color = "#e8e8e8";
  el.style.font = "12px/1.5 monospace";
  el.style.whiteSpace = "pre";
  el.style.pointerEvents = "none";
  el.style.borderRadius = "4px";
  return el;
}
