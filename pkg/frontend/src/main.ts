/** Browser entry point: load the bundle, run the input/render loop.
 *
 * Renders with WebGL2 when available and falls back to the CPU reference
 * renderer on a 2D canvas otherwise (identical output, lower frame rate).
 */

import { httpIo, loadBundle } from "./bundle.js";
import {
  CLAMP_FACTOR,
  controlTick,
  emptyInput,
  initialCamera,
  type CameraState,
  type InputState,
} from "./camera.js";
import { createHudElement, hudText } from "./hud.js";
import { GlRenderer } from "./render_gl.js";
import { renderView } from "./render_soft.js";
import { BundleValidationError, type MsiBundle } from "./types.js";

function showError(message: string): void {
  const el = document.createElement("div");
  el.style.cssText =
    "position:absolute;inset:0;display:flex;align-items:center;justify-content:center;" +
    "background:#1a1a1a;color:#ff8080;font:14px monospace;white-space:pre-wrap;padding:32px";
  el.textContent = message;
  document.body.appendChild(el);
}

function softwareBlit(
  ctx: CanvasRenderingContext2D,
  bundle: MsiBundle,
  cam: CameraState,
  w: number,
  h: number,
  inspectLayer?: number,
): void {
  const rgb = renderView(bundle, cam, w, h, { inspectLayer });
  const img = ctx.createImageData(w, h);
  for (let i = 0; i < w * h; i++) {
    img.data[i * 4] = Math.round(Math.min(Math.max(rgb[i * 3], 0), 1) * 255);
    img.data[i * 4 + 1] = Math.round(Math.min(Math.max(rgb[i * 3 + 1], 0), 1) * 255);
    img.data[i * 4 + 2] = Math.round(Math.min(Math.max(rgb[i * 3 + 2], 0), 1) * 255);
    img.data[i * 4 + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
}

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const bundleUrl = params.get("bundle") ?? "test/golden/bundle/";

  let bundle: MsiBundle;
  try {
    bundle = await loadBundle(httpIo(bundleUrl));
  } catch (err) {
    if (err instanceof BundleValidationError) {
      showError(
        "Could not load MSI bundle:\n\n" +
          err.violations.map((v) => `  ${v.field}: ${v.message}`).join("\n"),
      );
    } else {
      showError(`Could not load MSI bundle: ${(err as Error).message}`);
    }
    return;
  }

  const inmost = bundle.manifest.radii_m[0];
  let camera = initialCamera();
  const input: InputState = emptyInput();
  let inspectLayer: number | undefined;

  const canvas = document.createElement("canvas");
  canvas.style.cssText = "position:absolute;inset:0;width:100%;height:100%";
  document.body.style.margin = "0";
  document.body.style.background = "#000";
  document.body.appendChild(canvas);
  const hud = createHudElement();
  document.body.appendChild(hud);

  let gl: WebGL2RenderingContext | null = canvas.getContext("webgl2");
  let renderer: GlRenderer | null = null;
  let ctx2d: CanvasRenderingContext2D | null = null;
  if (gl) {
    renderer = new GlRenderer(gl);
    renderer.setBundle(bundle);
  } else {
    ctx2d = canvas.getContext("2d");
  }
  canvas.addEventListener("webglcontextlost", (e) => {
    e.preventDefault();
    showError("WebGL context lost: reload the page to continue.");
  });

  const keymap: Record<string, keyof InputState> = {
    KeyW: "forward", KeyS: "back", KeyA: "left", KeyD: "right",
    KeyQ: "down", KeyE: "up",
  };
  window.addEventListener("keydown", (e) => {
    const k = keymap[e.code];
    if (k) (input[k] as boolean) = true;
    if (e.code === "Tab") {
      e.preventDefault();
      inspectLayer = inspectLayer === undefined ? 0 : undefined;
    }
    if (e.code === "BracketLeft" && inspectLayer !== undefined) {
      inspectLayer = Math.max(0, inspectLayer - 1);
    }
    if (e.code === "BracketRight" && inspectLayer !== undefined) {
      inspectLayer = Math.min(bundle.manifest.num_layers - 1, inspectLayer + 1);
    }
  });
  window.addEventListener("keyup", (e) => {
    const k = keymap[e.code];
    if (k) (input[k] as boolean) = false;
  });

  let dragging = false;
  canvas.addEventListener("mousedown", () => { dragging = true; });
  window.addEventListener("mouseup", () => { dragging = false; });
  window.addEventListener("mousemove", (e) => {
    if (dragging) {
      input.dragX += e.movementX;
      input.dragY += e.movementY;
    }
  });

  let last = performance.now();
  let fps = 0;
  const frame = (now: number): void => {
    const dt = Math.min((now - last) / 1000, 0.1);
    last = now;
    fps = fps * 0.9 + (dt > 0 ? 0.1 / dt : 0);

    camera = controlTick(camera, input, dt, inmost);
    input.dragX = 0;
    input.dragY = 0;

    const w = canvas.clientWidth || 960;
    const h = canvas.clientHeight || 540;
    if (renderer && gl) {
      if (canvas.width !== w || canvas.height !== h) {
        canvas.width = w;
        canvas.height = h;
      }
      renderer.render(camera, w, h, inspectLayer);
    } else if (ctx2d) {
      // CPU fallback at reduced resolution
      const sw = 320;
      const sh = Math.round((sw * h) / w);
      if (canvas.width !== sw || canvas.height !== sh) {
        canvas.width = sw;
        canvas.height = sh;
      }
      softwareBlit(ctx2d, bundle, camera, sw, sh, inspectLayer);
    }

    hud.textContent = hudText(camera, {
      layerCount: bundle.manifest.num_layers,
      inspectLayer,
      fps,
      backend: renderer ? "webgl2" : "cpu",
    });
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);

  // sanity note in console: clamp radius for this bundle
  console.log(`msi-viewer: ${bundle.manifest.num_layers} layers, ` +
    `clamp radius ${(CLAMP_FACTOR * inmost).toFixed(3)} m`);
}

start();
