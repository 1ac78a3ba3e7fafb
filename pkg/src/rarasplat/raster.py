"""Tile-based software rasterizer with hybrid clipping-plane support.

Pipeline: project every Gaussian to a 2D splat (EWA-style covariance
transform), bin splats to tiles, sort each tile by camera depth (ties by
source index), then composite front-to-back.  Clipping modes:

  - NONE: plain splatting.
  - HARD: Gaussians whose center lies on the invisible side are dropped.
  - RARA: three-way classification; invisible Gaussians are dropped,
    visible ones splat normally, and cutoff ones get a per-pixel opacity
    multiplier from the visible ray-chord fraction through their 3-sigma
    ellipsoid.

Rendering parallelizes over tiles (each tile owns its pixels); output is
bit-identical across thread counts and tile sizes.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .camera import Camera
from .clip import ClipPlane, VisibilityClass, chord_weights_pairs
from .scene import EmptySceneError, Gaussian, Scene, quats_to_matrices

ALPHA_CLAMP = 0.99
# Early compositing stop once transmittance drops below 8-bit quantization.
MIN_TRANSMITTANCE = 1.0 / 255.0
# Anti-aliasing floor added to both diagonal entries of the 2D covariance.
COV2D_FLOOR = 0.3
# Splats contribute only within Mahalanobis distance 3 of their 2D center.
MAX_MAHALANOBIS_SQ = 9.0


class ClipMode(Enum):
    NONE = "none"
    HARD = "hard"
    RARA = "rara"


@dataclass(frozen=True)
class ClipConfig:
    """Clipping mode plus its plane (required unless mode is NONE).

    ``force_ray_all`` switches on the naive ablation variant: every
    non-invisible Gaussian takes the per-ray chord path, and rays that
    miss the 3-sigma ellipsoid zero the contribution instead of keeping
    the rasterized alpha.
    """

    mode: ClipMode = ClipMode.NONE
    plane: ClipPlane | None = None
    force_ray_all: bool = False

    def __post_init__(self):
        if (self.plane is None) != (self.mode is ClipMode.NONE):
            raise ValueError("a clip plane is required exactly when mode != none")
        if self.force_ray_all and self.mode is not ClipMode.RARA:
            raise ValueError("force_ray_all only applies to rara mode")


@dataclass(frozen=True)
class Splat2D:
    """One projected Gaussian: pixel center, 2x2 covariance, depth."""

    center2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    delta: float
    vis: VisibilityClass
    source: int


@dataclass
class Image:
    """H x W RGB frame with float channels in [0, 1]."""

    pixels: np.ndarray  # (H, W, 3) float

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def to_uint8(self) -> np.ndarray:
        """8-bit quantization: clamp to [0, 1], scale by 255, round half up."""
        return np.floor(np.clip(self.pixels, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        PILImage.fromarray(self.to_uint8(), mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def save_png(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_png_bytes())

    @staticmethod
    def from_png_bytes(data: bytes) -> "Image":
        arr = np.asarray(PILImage.open(io.BytesIO(data)).convert("RGB"), dtype=float)
        return Image(pixels=arr / 255.0)


# --- Projection ------------------------------------------------------------


def _project_arrays(
    mu: np.ndarray,
    scale: np.ndarray,
    rotation: np.ndarray,
    cam: Camera,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized EWA projection.

    Returns (keep_mask, center2d, cov2d, depth, rx_px, ry_px) with the
    per-splat arrays already restricted to kept Gaussians.  The 2D
    covariance is the top-left 2x2 of J W V W^T J^T plus the low-pass
    floor, with J the pinhole Jacobian at the camera-space center.
    """
    p_cam = mu @ cam.rotation.T + cam.translation
    z = p_cam[:, 2]
    keep = z > cam.near

    p = p_cam[keep]
    z = z[keep]
    u = cam.fx * p[:, 0] / z + cam.cx
    v = cam.fy * p[:, 1] / z + cam.cy

    rot = quats_to_matrices(rotation[keep])
    s2 = scale[keep] ** 2
    cov3d = np.einsum("nij,nj,nkj->nik", rot, s2, rot)
    cov_cam = cam.rotation @ cov3d @ cam.rotation.T

    n = len(p)
    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = cam.fx / z
    jac[:, 0, 2] = -cam.fx * p[:, 0] / z**2
    jac[:, 1, 1] = cam.fy / z
    jac[:, 1, 2] = -cam.fy * p[:, 1] / z**2
    cov2d = np.einsum("nij,njk,nlk->nil", jac, cov_cam, jac)
    cov2d[:, 0, 0] += COV2D_FLOOR
    cov2d[:, 1, 1] += COV2D_FLOOR

    # Tight axis-aligned footprint of the 3-sigma ellipse: per-axis
    # marginal sigmas, not the (square) spectral radius.
    rx = 3.0 * np.sqrt(cov2d[:, 0, 0])
    ry = 3.0 * np.sqrt(cov2d[:, 1, 1])

    inside = (
        (u + rx > 0) & (u - rx < cam.width)
        & (v + ry > 0) & (v - ry < cam.height)
    )
    keep_idx = np.flatnonzero(keep)[inside]
    mask = np.zeros(len(mu), dtype=bool)
    mask[keep_idx] = True
    center2d = np.stack([u[inside], v[inside]], axis=1)
    return mask, center2d, cov2d[inside], z[inside], rx[inside], ry[inside]


def project_gaussian(g: Gaussian, cam: Camera) -> Splat2D | None:
    """Project a single Gaussian; None when behind the near plane or when
    its 3-sigma footprint falls entirely outside the image."""
    mask, center2d, cov2d, depth, _, _ = _project_arrays(
        g.mu[None, :], g.scale[None, :], g.rotation[None, :], cam
    )
    if not mask[0]:
        return None
    return Splat2D(
        center2d=center2d[0],
        cov2d=cov2d[0],
        depth=float(depth[0]),
        color=g.color,
        delta=g.delta,
        vis=VisibilityClass.VISIBLE,
        source=0,
    )


def evaluate_alpha(s: Splat2D, pixel: np.ndarray) -> float:
    """delta * exp(-0.5 * d^T cov2d^-1 d) at the pixel, clamped to 0.99."""
    dx, dy = np.asarray(pixel, dtype=float) - s.center2d
    a, b, c = s.cov2d[0, 0], s.cov2d[0, 1], s.cov2d[1, 1]
    det = a * c - b * b
    power = -0.5 * (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det
    return min(ALPHA_CLAMP, s.delta * float(np.exp(power)))


# --- Rendering -------------------------------------------------------------


def _bin_tiles(
    center2d: np.ndarray, rx: np.ndarray, ry: np.ndarray,
    depth: np.ndarray, source: np.ndarray,
    width: int, height: int, tile: int,
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Assign splats to tiles and depth-sort within each tile.

    Returns (order, tile_starts, ntx, nty): ``order`` lists splat indices
    expanded per overlapped tile, lexsorted by (tile, depth, source);
    ``tile_starts`` gives slice offsets per tile id.
    """
    ntx = (width + tile - 1) // tile
    nty = (height + tile - 1) // tile
    tx0 = np.clip(((center2d[:, 0] - rx) // tile).astype(int), 0, ntx - 1)
    tx1 = np.clip(((center2d[:, 0] + rx) // tile).astype(int), 0, ntx - 1)
    ty0 = np.clip(((center2d[:, 1] - ry) // tile).astype(int), 0, nty - 1)
    ty1 = np.clip(((center2d[:, 1] + ry) // tile).astype(int), 0, nty - 1)

    spans_x = tx1 - tx0 + 1
    spans_y = ty1 - ty0 + 1
    reps = spans_x * spans_y
    ids = np.repeat(np.arange(len(center2d)), reps)
    # Local index within each splat's tile rectangle, row-major.
    offsets = np.concatenate(([0], np.cumsum(reps)[:-1]))
    local = np.arange(reps.sum()) - np.repeat(offsets, reps)
    lx = local % spans_x[ids]
    ly = local // spans_x[ids]
    tiles = (ty0[ids] + ly) * ntx + (tx0[ids] + lx)

    order = np.lexsort((source[ids], depth[ids], tiles))
    ids = ids[order]
    tiles = tiles[order]
    starts = np.searchsorted(tiles, np.arange(ntx * nty + 1))
    return ids, starts, ntx, nty


def _tile_pixels(x0: int, y0: int, tw: int, th: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened pixel-center coordinates of a tile, row-major."""
    xs = x0 + np.arange(tw) + 0.5
    ys = y0 + np.arange(th) + 0.5
    px, py = np.meshgrid(xs, ys)
    return px.ravel(), py.ravel()


def _tile_alpha(
    center2d: np.ndarray, conic: np.ndarray, delta: np.ndarray,
    px: np.ndarray, py: np.ndarray,
) -> np.ndarray:
    """(K, P) per-splat, per-pixel alpha before chord decay and clamping."""
    dx = center2d[:, 0, None] - px[None, :]
    dy = center2d[:, 1, None] - py[None, :]
    maha = conic[:, 0, None] * dx * dx + 2.0 * conic[:, 1, None] * dx * dy \
        + conic[:, 2, None] * dy * dy
    live = maha <= MAX_MAHALANOBIS_SQ
    alpha = np.zeros_like(maha)
    alpha[live] = np.broadcast_to(delta[:, None], maha.shape)[live] \
        * np.exp(-0.5 * maha[live])
    return alpha


def _finish_tile(
    out: np.ndarray,
    x0: int, y0: int, tw: int, th: int,
    alpha: np.ndarray, color: np.ndarray,
    early_stop: bool,
    background: np.ndarray,
) -> None:
    """Clamp, accumulate transmittance and write the tile into ``out``."""
    # Rows that are zero everywhere (footprint-box overlap without real
    # coverage, or chord decay wiping a splat out) neither contribute nor
    # change transmittance; drop them before the scans.
    live_rows = alpha.any(axis=1)
    if not live_rows.all():
        alpha = alpha[live_rows]
        color = color[live_rows]
        if alpha.shape[0] == 0:
            out[y0:y0 + th, x0:x0 + tw] = background
            return
    alpha = np.minimum(alpha, ALPHA_CLAMP)
    trans = np.cumprod(1.0 - alpha, axis=0)
    t_excl = np.empty_like(trans)
    t_excl[0] = 1.0
    t_excl[1:] = trans[:-1]
    contrib = alpha * t_excl
    if early_stop:
        # Per-pixel early stop: drop contributions once the remaining
        # transmittance is below quantization; the prefix structure of
        # t_excl makes this identical to a sequential break.
        included = t_excl >= MIN_TRANSMITTANCE
        contrib[~included] = 0.0
        cnt = included.sum(axis=0)
        t_final = np.where(
            cnt > 0,
            np.take_along_axis(trans, np.maximum(cnt - 1, 0)[None, :], axis=0)[0],
            1.0,
        )
    else:
        t_final = trans[-1]
    tile_rgb = np.einsum("kp,kc->pc", contrib, color) + t_final[:, None] * background
    out[y0:y0 + th, x0:x0 + tw] = tile_rgb.reshape(th, tw, 3)


def _composite_tile(
    out: np.ndarray,
    x0: int, y0: int, tw: int, th: int,
    center2d: np.ndarray, conic: np.ndarray, color: np.ndarray, delta: np.ndarray,
    early_stop: bool,
    background: np.ndarray,
) -> None:
    """Composite one tile's sorted splats into out[y0:y0+th, x0:x0+tw]."""
    px, py = _tile_pixels(x0, y0, tw, th)
    alpha = _tile_alpha(center2d, conic, delta, px, py)
    _finish_tile(out, x0, y0, tw, th, alpha, color, early_stop, background)


def render(
    scene: Scene,
    cam: Camera,
    clip: ClipConfig | None = None,
    tile: int = 16,
    threads: int = 1,
    early_stop: bool = True,
    background=(0.0, 0.0, 0.0),
) -> Image:
    """Render the scene through the camera under the given clip config."""
    if len(scene) == 0:
        raise EmptySceneError("cannot render an empty scene")
    clip = clip or ClipConfig()

    ell_invisible = None
    if clip.mode is ClipMode.NONE:
        select = np.ones(len(scene), dtype=bool)
        cut = np.zeros(len(scene), dtype=bool)
    elif clip.mode is ClipMode.HARD:
        # Center-only test: drop when strictly on the invisible side.
        select = scene.mu @ clip.plane.normal + clip.plane.offset >= 0.0
        cut = np.zeros(len(scene), dtype=bool)
    else:
        # Inline three-way classification (matches classify_all): invisible
        # when d < -r, visible when d > r, cutoff in between.
        d = scene.mu @ clip.plane.normal + clip.plane.offset
        r = scene.clip_radii()
        select = d >= -r
        cut = select & (d <= r)
        if not clip.force_ray_all and cut.any():
            # The isotropic radius is conservative for anisotropic splats.
            # A cutoff candidate whose ellipsoid lies strictly on the
            # visible side of the plane (tight support radius 3|S R^T n|
            # along the normal) has chord weight exactly 1 on every ray,
            # so the ray path can be skipped without changing the output.
            # One strictly on the invisible side keeps the ray path (rays
            # missing the ellipsoid keep their alpha) but needs only the
            # hit test: every hit has weight exactly 0.
            ci = np.flatnonzero(cut)
            rot_c = quats_to_matrices(scene.rotation[ci])
            v = np.einsum("nji,j->ni", rot_c, clip.plane.normal)
            supp = 3.0 * np.sqrt(((scene.scale[ci] * v) ** 2).sum(axis=1))
            cut[ci[d[ci] > supp]] = False
            ell_invisible = np.zeros(len(scene), dtype=bool)
            ell_invisible[ci[d[ci] < -supp]] = True
    if clip.force_ray_all:
        cut = select.copy()

    src = np.flatnonzero(select)
    bg = np.asarray(background, dtype=float)
    out = np.empty((cam.height, cam.width, 3))
    out[:] = bg
    if src.size == 0:
        return Image(pixels=out)

    mask, center2d, cov2d, depth, rx, ry = _project_arrays(
        scene.mu[src], scene.scale[src], scene.rotation[src], cam
    )
    src = src[mask]
    if src.size == 0:
        return Image(pixels=out)
    color = scene.color[src]
    delta = scene.delta[src]
    is_cut = cut[src]

    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] ** 2
    conic = np.stack(
        [cov2d[:, 1, 1] / det, -cov2d[:, 0, 1] / det, cov2d[:, 0, 0] / det], axis=1
    )

    ids, starts, ntx, nty = _bin_tiles(
        center2d, rx, ry, depth, src, cam.width, cam.height, tile
    )

    minv = None
    if is_cut.any():
        origin = cam.position
        cut_idx = np.flatnonzero(is_cut)
        rot_cut = quats_to_matrices(scene.rotation[src[cut_idx]])
        minv_cut = rot_cut.transpose(0, 2, 1) / (3.0 * scene.scale[src[cut_idx]])[:, :, None]
        minv = np.zeros((src.size, 3, 3))
        minv[cut_idx] = minv_cut
        # The sphere-space ray origin and the quadratic's constant term
        # are per-Gaussian, not per-pixel: hoist them out of the kernel.
        o_cut = np.einsum("cij,cj->ci", minv_cut, origin[None, :] - scene.mu[src[cut_idx]])
        o_sphere = np.zeros((src.size, 3))
        o_sphere[cut_idx] = o_cut
        c_sphere = np.zeros(src.size)
        c_sphere[cut_idx] = np.einsum("ci,ci->c", o_cut, o_cut) - 1.0
        deep_src = None if ell_invisible is None else ell_invisible[src]

    miss_weight = 0.0 if clip.force_ray_all else 1.0

    def tile_geometry(t: int) -> tuple[int, int, int, int]:
        ty, tx = divmod(t, ntx)
        x0, y0 = tx * tile, ty * tile
        return x0, y0, min(tile, cam.width - x0), min(tile, cam.height - y0)

    def run(fn, items) -> None:
        if threads <= 1 or len(items) <= 1:
            for it in items:
                fn(it)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(fn, items))

    nonempty = [t for t in range(ntx * nty) if starts[t + 1] > starts[t]]

    if minv is None:
        def plain_tile(t: int) -> None:
            rows = ids[starts[t]:starts[t + 1]]
            x0, y0, tw, th = tile_geometry(t)
            _composite_tile(out, x0, y0, tw, th, center2d[rows], conic[rows],
                            color[rows], delta[rows], early_stop, bg)

        run(plain_tile, nonempty)
        return Image(pixels=out)

    # Chord path: per-tile alpha matrices are computed first, the decay
    # weights for every live (cutoff splat, pixel) pair are then evaluated
    # in one batched call, and the tiles are finished afterwards.  Tiles
    # are processed in groups bounded by the total alpha-matrix size so
    # peak memory stays flat; grouping cannot affect the output because
    # every per-pair operation is elementwise.
    # Per-pixel quantities (unit ray direction, its dot with the plane
    # normal) are computed once for the whole image and gathered per pair.
    xs = (np.arange(cam.width) + 0.5 - cam.cx) / cam.fx
    ys = (np.arange(cam.height) + 0.5 - cam.cy) / cam.fy
    d_cam = np.empty((cam.height * cam.width, 3))
    d_cam[:, 0] = np.tile(xs, cam.height)
    d_cam[:, 1] = np.repeat(ys, cam.width)
    d_cam[:, 2] = 1.0
    dirs_img = d_cam @ cam.rotation
    dirs_img /= np.linalg.norm(dirs_img, axis=1, keepdims=True)
    sd_img = dirs_img @ clip.plane.normal

    ELEMENT_BUDGET = 16_000_000
    groups: list[list[int]] = []
    cur: list[int] = []
    acc = 0
    for t in nonempty:
        cur.append(t)
        acc += (starts[t + 1] - starts[t]) * tile * tile
        if acc >= ELEMENT_BUDGET:
            groups.append(cur)
            cur, acc = [], 0
    if cur:
        groups.append(cur)

    for gtiles in groups:
        entries: dict[int, list] = {}

        def phase_a(t: int) -> None:
            rows = ids[starts[t]:starts[t + 1]]
            x0, y0, tw, th = tile_geometry(t)
            px, py = _tile_pixels(x0, y0, tw, th)
            alpha = _tile_alpha(center2d[rows], conic[rows], delta[rows], px, py)
            qk_rows = qp = gi = gp = None
            cut_local = np.flatnonzero(is_cut[rows])
            if cut_local.size:
                # alpha > 0 exactly on the live (Mahalanobis <= 3) support
                qk, qp_ = np.nonzero(alpha[cut_local] > 0.0)
                if qk.size:
                    qk_rows = cut_local[qk]
                    qp = qp_
                    gi = rows[qk_rows]
                    gp = (y0 + qp_ // tw) * cam.width + x0 + qp_ % tw
            entries[t] = [alpha, qk_rows, qp, gi, gp, None]

        run(phase_a, gtiles)

        pair_tiles = [t for t in gtiles if entries[t][3] is not None]
        if pair_tiles:
            gi = np.concatenate([entries[t][3] for t in pair_tiles])
            gp = np.concatenate([entries[t][4] for t in pair_tiles])
            w = chord_weights_pairs(
                origin, dirs_img[gp], minv[gi], None, clip.plane,
                miss_weight=miss_weight, o=o_sphere[gi], c=c_sphere[gi],
                sd=sd_img[gp],
                deep=None if deep_src is None else deep_src[gi],
            )
            off = 0
            for t in pair_tiles:
                n = entries[t][3].size
                entries[t][5] = w[off:off + n]
                off += n

        def phase_b(t: int) -> None:
            alpha, qk_rows, qp, gi, _, w = entries[t]
            if gi is not None:
                alpha[qk_rows, qp] *= w
            rows = ids[starts[t]:starts[t + 1]]
            x0, y0, tw, th = tile_geometry(t)
            _finish_tile(out, x0, y0, tw, th, alpha, color[rows], early_stop, bg)

        run(phase_b, gtiles)
    return Image(pixels=out)
