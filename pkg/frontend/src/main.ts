/** DOM wiring: scene picker, canvas, orbit drag, plane and mode controls. */

import { ViewerClient } from "./client.js";
import { debounce } from "./debounce.js";
import * as proto from "./protocol.js";
import {
  SceneDescriptor,
  ViewerState,
  applyOrbitDrag,
  boundsCenter,
  cameraEye,
  initialState,
  planeNormal,
  planeOffset,
  sliderRange,
} from "./state.js";

const RESOLUTION = 512;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d")!;
const banner = el<HTMLDivElement>("banner");
const stats = el<HTMLDivElement>("stats");
const sceneSelect = el<HTMLSelectElement>("scene");
const modeSelect = el<HTMLSelectElement>("mode");
const compareBox = el<HTMLInputElement>("compare");
const planeTheta = el<HTMLInputElement>("plane-theta");
const planePhi = el<HTMLInputElement>("plane-phi");
const planeSlider = el<HTMLInputElement>("plane-offset");
const sweepButton = el<HTMLButtonElement>("sweep");
const retryButton = el<HTMLButtonElement>("retry");

let state: ViewerState | null = null;
let client: ViewerClient | null = null;

function showBanner(message: string, withRetry = false): void {
  banner.textContent = message;
  banner.style.display = "block";
  retryButton.style.display = withRetry ? "inline-block" : "none";
}

function hideBanner(): void {
  banner.style.display = "none";
  retryButton.style.display = "none";
}

function setRendering(on: boolean): void {
  if (state) state.rendering = on;
  stats.classList.toggle("rendering", on);
  if (on) stats.textContent = "rendering…";
}

async function drawFrame(meta: proto.FrameMeta, frame: proto.BinaryFrame): Promise<void> {
  const bitmaps = await Promise.all(
    frame.pngs.map((png) =>
      createImageBitmap(new Blob([png.slice().buffer], { type: "image/png" })),
    ),
  );
  const width = bitmaps.reduce((acc, b) => acc + b.width, 0);
  const height = Math.max(...bitmaps.map((b) => b.height));
  if (canvas.width !== width || canvas.height !== height) {
    canvas.width = width;
    canvas.height = height;
  }
  let x = 0;
  for (const b of bitmaps) {
    ctx.drawImage(b, x, 0);
    x += b.width;
  }
  if (state) {
    state.lastFrame = { id: frame.id, renderMs: meta.render_ms, mode: meta.mode };
  }
  setRendering(false);
  stats.textContent = `frame ${frame.id} · ${meta.mode} · ${meta.render_ms.toFixed(0)} ms`;
}

function sendCamera(): void {
  if (!client || !state || !state.scene) return;
  client.send(
    proto.setCamera(cameraEye(state), boundsCenter(state.scene.bounds)),
  );
  setRendering(true);
}

function sendPlane(): void {
  if (!client || !state || !state.scene) return;
  const normal = planeNormal(state.plane.theta, state.plane.phi);
  const offset = planeOffset(normal, boundsCenter(state.scene.bounds), state.plane.slider);
  state.planeActive = true;
  client.send(proto.setPlane(normal, offset));
  setRendering(true);
}

const debouncedCamera = debounce(sendCamera, 16);
const debouncedPlane = debounce(sendPlane, 16);

function connect(scene: SceneDescriptor): void {
  client?.close();
  state = initialState(scene);
  const range = sliderRange(scene);
  planeSlider.min = String(range.min);
  planeSlider.max = String(range.max);
  planeSlider.step = String((range.max - range.min) / 200 || 1);
  planeSlider.value = "0";
  hideBanner();
  setRendering(true);

  const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
  client = new ViewerClient(
    wsUrl,
    {
      onFrame: (meta, frame) => {
        if (state) state.status = "connected";
        void drawFrame(meta, frame);
      },
      onError: (message) => showBanner(message, true),
      onClose: () => {
        if (state) state.status = "disconnected";
        showBanner("connection closed", true);
      },
    },
    proto.init(scene.name, RESOLUTION, RESOLUTION),
  );
}

async function loadScenes(): Promise<void> {
  const res = await fetch("/scenes");
  if (!res.ok) {
    showBanner(`failed to list scenes (HTTP ${res.status})`, true);
    return;
  }
  const scenes = (await res.json()) as SceneDescriptor[];
  sceneSelect.innerHTML = "";
  for (const s of scenes) {
    const opt = document.createElement("option");
    opt.value = s.name;
    opt.textContent = `${s.name} (${s.count.toLocaleString()} splats)`;
    sceneSelect.appendChild(opt);
  }
  if (scenes.length === 0) {
    showBanner("no scenes found in the scene directory");
    return;
  }
  const byName = new Map(scenes.map((s) => [s.name, s]));
  sceneSelect.onchange = () => {
    const s = byName.get(sceneSelect.value);
    if (s) connect(s);
  };
  connect(scenes[0]);
}

canvas.addEventListener("pointerdown", (down) => {
  canvas.setPointerCapture(down.pointerId);
  let last = { x: down.clientX, y: down.clientY };
  const move = (ev: PointerEvent) => {
    if (!state) return;
    state.orbit = applyOrbitDrag(
      state.orbit,
      (ev.clientX - last.x) * 0.4,
      (ev.clientY - last.y) * 0.4,
    );
    last = { x: ev.clientX, y: ev.clientY };
    debouncedCamera();
  };
  const up = () => {
    canvas.removeEventListener("pointermove", move);
    canvas.removeEventListener("pointerup", up);
  };
  canvas.addEventListener("pointermove", move);
  canvas.addEventListener("pointerup", up);
});

canvas.addEventListener("wheel", (ev) => {
  if (!state) return;
  ev.preventDefault();
  state.orbit = { ...state.orbit, radius: state.orbit.radius * (ev.deltaY > 0 ? 1.1 : 1 / 1.1) };
  debouncedCamera();
});

for (const [input, key] of [
  [planeTheta, "theta"],
  [planePhi, "phi"],
  [planeSlider, "slider"],
] as const) {
  input.addEventListener("input", () => {
    if (!state) return;
    state.plane = { ...state.plane, [key]: Number(input.value) };
    debouncedPlane();
  });
}

modeSelect.addEventListener("change", () => {
  if (!client || !state) return;
  state.mode = modeSelect.value as proto.ClipMode;
  client.send(proto.setMode(state.mode));
  setRendering(true);
});

compareBox.addEventListener("change", () => {
  if (!client || !state) return;
  state.compare = compareBox.checked;
  client.send(proto.setCompare(state.compare));
  setRendering(true);
});

sweepButton.addEventListener("click", () => {
  if (!client || !state) return;
  if (!state.planeActive) sendPlane();
  client.send(proto.sweep(30));
  setRendering(true);
});

retryButton.addEventListener("click", () => {
  if (state?.scene) connect(state.scene);
  else void loadScenes();
});

void loadScenes();
