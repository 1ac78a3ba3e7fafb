"""Image-error metrics plus the ablation and plane-sweep benchmark harnesses.

L1 is mean absolute error in 8-bit units (channels scaled to [0, 255]).
SSIM is the canonical single-scale variant: 11x11 Gaussian window with
sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 255, computed on Rec.601
luma and averaged over the valid window positions.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import convolve2d

from .camera import Camera
from .clip import ClipPlane
from .raster import ClipConfig, ClipMode, Image, render
from .scene import Scene

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 255.0


@dataclass(frozen=True)
class AblationReport:
    mode_compared: str
    l1: float
    ssim: float


@dataclass(frozen=True)
class SweepBenchReport:
    mode: str
    frames: int
    mean_fps: float
    min_fps: float
    max_fps: float
    plane_start: float
    plane_end: float


def _check_dims(a: Image, b: Image) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"image dimensions differ: {a.pixels.shape} vs {b.pixels.shape}")


def l1_error(a: Image, b: Image) -> float:
    """Mean |a - b| over all pixels and channels, in 8-bit units."""
    _check_dims(a, b)
    return float(np.mean(np.abs(a.pixels - b.pixels)) * 255.0)


def _luma255(img: Image) -> np.ndarray:
    r, g, b = img.pixels[..., 0], img.pixels[..., 1], img.pixels[..., 2]
    return (0.299 * r + 0.587 * g + 0.114 * b) * 255.0


def _ssim_window() -> np.ndarray:
    half = (SSIM_WINDOW - 1) / 2.0
    ax = np.arange(SSIM_WINDOW) - half
    g = np.exp(-(ax**2) / (2.0 * SSIM_SIGMA**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: Image, b: Image) -> float:
    """Structural similarity of the two images' luma channels."""
    _check_dims(a, b)
    if min(a.height, a.width) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side")
    x = _luma255(a)
    y = _luma255(b)
    win = _ssim_window()
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2

    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    sig_xx = convolve2d(x * x, win, mode="valid") - mu_x * mu_x
    sig_yy = convolve2d(y * y, win, mode="valid") - mu_y * mu_y
    sig_xy = convolve2d(x * y, win, mode="valid") - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sig_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sig_xx + sig_yy + c2)
    return float(np.mean(num / den))


def infinity_plane(scene: Scene, normal=(0.0, 0.0, 1.0)) -> ClipPlane:
    """A plane whose visible half-space contains the whole scene by a
    margin of 1e9 beyond its bounds along the normal."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    lowest = float(min(np.dot(n, c) for c in _bounds_corners(scene)))
    return ClipPlane(normal=n, offset=1e9 - lowest)


def _bounds_corners(scene: Scene):
    lo, hi = scene.bounds.lo, scene.bounds.hi
    for i in range(8):
        yield np.array([hi[0] if i & 1 else lo[0],
                        hi[1] if i & 2 else lo[1],
                        hi[2] if i & 4 else lo[2]])


def run_ablation(scene: Scene, cam: Camera, **render_kw) -> list[AblationReport]:
    """Infinite-plane ablation: compare the selective-ray and naive
    force-all-rays variants against the unclipped reference render."""
    plane = infinity_plane(scene)
    reference = render(scene, cam, ClipConfig(ClipMode.NONE), **render_kw)
    naive = render(
        scene, cam, ClipConfig(ClipMode.RARA, plane, force_ray_all=True), **render_kw
    )
    selective = render(scene, cam, ClipConfig(ClipMode.RARA, plane), **render_kw)
    return [
        AblationReport("wo RaRa", l1_error(naive, reference), ssim(naive, reference)),
        AblationReport("w RaRa", l1_error(selective, reference), ssim(selective, reference)),
    ]


def sweep_planes(scene: Scene, normal, frames: int) -> list[ClipPlane]:
    """Planes sweeping the visible half-space across the scene bounds:
    frame 0 leaves everything invisible, the last frame everything visible."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    projs = [float(np.dot(n, c)) for c in _bounds_corners(scene)]
    d_start = -max(projs)  # n.x + d < 0 everywhere
    d_end = -min(projs)    # n.x + d > 0 everywhere
    if frames == 1:
        return [ClipPlane(n, 0.5 * (d_start + d_end))]
    return [
        ClipPlane(n, d_start + (d_end - d_start) * i / (frames - 1))
        for i in range(frames)
    ]


def run_sweep_bench(
    scene: Scene,
    cam: Camera,
    mode: ClipMode,
    frames: int = 30,
    normal=(1.0, 0.0, 0.0),
    **render_kw,
) -> SweepBenchReport:
    """Time a fixed-camera render while the clip plane sweeps the bounds.

    Timing covers projection, binning, sorting and compositing; PNG
    encoding and scene loading are excluded.  ``mean_fps`` is the
    aggregate throughput frames / total wall-clock time (the harmonic
    mean of per-frame rates, so min <= mean <= max always holds);
    ``min_fps``/``max_fps`` are the slowest and fastest single frames.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    planes = sweep_planes(scene, normal, frames)
    times = []
    for plane in planes:
        cfg = ClipConfig(ClipMode.NONE) if mode is ClipMode.NONE else ClipConfig(mode, plane)
        t0 = time.perf_counter()
        render(scene, cam, cfg, **render_kw)
        times.append(time.perf_counter() - t0)
    fps = [1.0 / t for t in times]
    return SweepBenchReport(
        mode=mode.value,
        frames=frames,
        mean_fps=float(frames / np.sum(times)),
        min_fps=float(np.min(fps)),
        max_fps=float(np.max(fps)),
        plane_start=planes[0].offset,
        plane_end=planes[-1].offset,
    )


# --- Report serialization --------------------------------------------------


def reports_to_json(reports) -> str:
    return json.dumps([asdict(r) for r in reports], indent=2)


def ablation_table(reports: list[AblationReport]) -> str:
    rows = [("", "L1", "SSIM")]
    rows += [(r.mode_compared, f"{r.l1:.4f}", f"{r.ssim:.4f}") for r in reports]
    return _align(rows)


def bench_table(reports: list[SweepBenchReport]) -> str:
    rows = [("mode", "frames", "mean FPS", "min FPS", "max FPS")]
    rows += [
        (r.mode, str(r.frames), f"{r.mean_fps:.2f}", f"{r.min_fps:.2f}", f"{r.max_fps:.2f}")
        for r in reports
    ]
    return _align(rows)


def _align(rows) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in rows
    )
