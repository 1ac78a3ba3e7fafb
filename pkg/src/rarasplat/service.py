"""Local render service: scene listing over HTTP, frame streaming over WS.

Protocol (all client messages are JSON text frames with a ``type`` key):

  init        {scene, width?, height?}   -- must come first
  set_camera  {eye, target, up?, fov?}
  set_plane   {normal, offset}
  set_mode    {mode: none|hard|rara}
  set_compare {on: bool}
  sweep       {frames}

Every state-changing message yields one frame; messages arriving while a
render is in flight coalesce (latest state wins).  A frame is sent as a
JSON text frame ``{type: "frame", id, render_ms, mode, payloads}``
followed by one binary frame: 8-byte little-endian frame id, then the
PNG bytes.  In compare mode the binary frame carries two PNGs (hard then
rara) separated by a 4-byte little-endian length prefix of the first.
"""

from __future__ import annotations

import asyncio
import json
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .camera import Camera
from .clip import ClipPlane
from .metrics import sweep_planes
from .raster import ClipConfig, ClipMode, render
from .scene import Scene, load_scene

MAX_RESOLUTION = 1024
SCENE_SUFFIXES = {".ply", ".json"}


class SceneCache:
    """Read-shared scene cache keyed by file stem."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._scenes: dict[str, Scene] = {}
        self._lock = threading.Lock()

    def names(self) -> list[str]:
        return sorted(
            p.stem for p in self.directory.iterdir()
            if p.is_file() and p.suffix.lower() in SCENE_SUFFIXES
        )

    def path_for(self, name: str) -> Path | None:
        for suffix in (".ply", ".json"):
            p = self.directory / f"{name}{suffix}"
            if p.is_file():
                return p
        return None

    def get(self, name: str) -> Scene:
        with self._lock:
            if name not in self._scenes:
                path = self.path_for(name)
                if path is None:
                    raise KeyError(name)
                self._scenes[name] = load_scene(path)
            return self._scenes[name]


@dataclass
class SessionState:
    """Per-connection render state; one scene per session."""

    scene: Scene
    camera: Camera
    plane: ClipPlane | None = None
    mode: ClipMode = ClipMode.NONE
    compare: bool = False
    frame_id: int = 0
    last_render_ms: float = 0.0
    pending_sweep: int | None = None
    dirty: asyncio.Event = field(default_factory=asyncio.Event)


def _default_camera(scene: Scene, width: int, height: int) -> Camera:
    c = scene.bounds.center
    diag = max(scene.bounds.diagonal, 1e-6)
    return Camera.look_at(c + np.array([0.0, 0.0, -1.2 * diag]), c,
                          width=width, height=height)


def _clip_config(snap, mode: ClipMode) -> ClipConfig:
    if mode is ClipMode.NONE or snap.plane is None:
        return ClipConfig(ClipMode.NONE)
    return ClipConfig(mode, snap.plane)


@dataclass(frozen=True)
class _Snapshot:
    """Immutable copy of the renderable state, taken on the event loop so
    the render thread never sees a half-applied message."""

    scene: Scene
    camera: Camera
    plane: ClipPlane | None
    mode: ClipMode
    compare: bool


def _render_payloads(snap: _Snapshot) -> tuple[list[bytes], str]:
    if snap.compare:
        hard = render(snap.scene, snap.camera, _clip_config(snap, ClipMode.HARD))
        rara = render(snap.scene, snap.camera, _clip_config(snap, ClipMode.RARA))
        return [hard.to_png_bytes(), rara.to_png_bytes()], "compare"
    img = render(snap.scene, snap.camera, _clip_config(snap, snap.mode))
    return [img.to_png_bytes()], snap.mode.value


def _encode_binary(frame_id: int, payloads: list[bytes]) -> bytes:
    head = struct.pack("<Q", frame_id)
    if len(payloads) == 1:
        return head + payloads[0]
    return head + struct.pack("<I", len(payloads[0])) + payloads[0] + payloads[1]


async def _send_frame(ws: WebSocket, state: SessionState) -> None:
    snap = _Snapshot(scene=state.scene, camera=state.camera, plane=state.plane,
                     mode=state.mode, compare=state.compare)
    t0 = time.perf_counter()
    payloads, mode = await asyncio.to_thread(_render_payloads, snap)
    state.last_render_ms = (time.perf_counter() - t0) * 1000.0
    state.frame_id += 1
    await ws.send_text(json.dumps({
        "type": "frame",
        "id": state.frame_id,
        "render_ms": state.last_render_ms,
        "mode": mode,
        "payloads": len(payloads),
    }))
    await ws.send_bytes(_encode_binary(state.frame_id, payloads))


def _apply_message(state: SessionState, msg: dict) -> None:
    kind = msg.get("type")
    if kind == "set_camera":
        up = msg.get("up", (0.0, 1.0, 0.0))
        fov = float(msg.get("fov", 60.0))
        state.camera = Camera.look_at(msg["eye"], msg["target"], up, fov,
                                      width=state.camera.width,
                                      height=state.camera.height)
    elif kind == "set_plane":
        n = np.asarray(msg["normal"], dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("plane normal must be nonzero")
        state.plane = ClipPlane(n / norm, float(msg["offset"]))
        if state.mode is ClipMode.NONE and not state.compare:
            state.mode = ClipMode.RARA
    elif kind == "set_mode":
        state.mode = ClipMode(msg["mode"])
    elif kind == "set_compare":
        state.compare = bool(msg.get("on", True))
    elif kind == "sweep":
        frames = int(msg.get("frames", 30))
        if frames < 1:
            raise ValueError("sweep frames must be >= 1")
        state.pending_sweep = frames
    else:
        raise ValueError(f"unknown message type {kind!r}")
    state.dirty.set()


async def _render_worker(ws: WebSocket, state: SessionState) -> None:
    """Renders whenever the state is dirty; latest-wins coalescing.

    Messages applied while a render is in flight just re-set the dirty
    flag, so intermediate states are skipped rather than queued.
    """
    while True:
        await state.dirty.wait()
        state.dirty.clear()
        sweep = state.pending_sweep
        state.pending_sweep = None
        if sweep:
            normal = state.plane.normal if state.plane is not None else np.array([1.0, 0.0, 0.0])
            for plane in sweep_planes(state.scene, normal, sweep):
                state.plane = plane
                if state.mode is ClipMode.NONE and not state.compare:
                    state.mode = ClipMode.RARA
                await _send_frame(ws, state)
        else:
            await _send_frame(ws, state)


def create_app(scene_dir: str | Path, static_dir: str | Path | None = None) -> FastAPI:
    cache = SceneCache(scene_dir)
    app = FastAPI(title="rarasplat render service")

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.get("/scenes")
    async def scenes():
        try:
            names = cache.names()
        except OSError as exc:
            return JSONResponse({"error": str(exc)}, status_code=500)
        out = []
        for name in names:
            try:
                sc = cache.get(name)
            except Exception:
                continue  # not a loadable scene file
            out.append({
                "name": name,
                "count": len(sc),
                "bounds": {"lo": sc.bounds.lo.tolist(), "hi": sc.bounds.hi.tolist()},
            })
        return out

    @app.websocket("/ws")
    async def ws_session(ws: WebSocket):
        await ws.accept()
        state: SessionState | None = None
        worker: asyncio.Task | None = None
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await ws.send_text(json.dumps({"type": "error",
                                                   "message": f"malformed JSON: {exc}"}))
                    continue
                if state is None:
                    if msg.get("type") != "init":
                        await ws.send_text(json.dumps(
                            {"type": "error", "message": "first message must be init"}))
                        continue
                    try:
                        scene = cache.get(msg["scene"])
                    except KeyError:
                        await ws.send_text(json.dumps(
                            {"type": "error", "message": f"unknown scene {msg.get('scene')!r}"}))
                        await ws.close()
                        return
                    width = min(int(msg.get("width", 512)), MAX_RESOLUTION)
                    height = min(int(msg.get("height", 512)), MAX_RESOLUTION)
                    state = SessionState(scene=scene,
                                         camera=_default_camera(scene, width, height))
                    worker = asyncio.create_task(_render_worker(ws, state))
                    state.dirty.set()  # initial frame
                    continue
                try:
                    _apply_message(state, msg)
                except (ValueError, KeyError) as exc:
                    await ws.send_text(json.dumps({"type": "error", "message": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            if worker is not None:
                worker.cancel()

    if static_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = candidate if candidate.is_dir() else None
    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="viewer")
    return app
