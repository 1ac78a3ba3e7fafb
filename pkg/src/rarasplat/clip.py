"""Clipping-plane geometry: classification, intersections and decay weights.

All operations here are pure functions, safe for unrestricted parallel
use.  The "ellipsoid" of a Gaussian is its 3-sigma iso-surface, i.e. the
image of the unit sphere under M = R * diag(3 * sigma); the same surface
drives both the three-way visibility classification and the per-ray
chord computation, so the two stay mutually consistent.

Scalar entry points (signed_distance, classify, ray_ellipsoid_intersect,
ray_plane_intersect, decay_weight) mirror the vectorized kernels used by
the rasterizer (classify_all, chord_weights).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scene import Gaussian, quat_to_matrix

# Discriminants at or below this are treated as tangent rays (a miss).
TANGENT_EPS = 1e-12
# |n . dir| below this means the ray is parallel to the plane.
PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class ClipPlane:
    """Implicit plane n.x + d = 0; the visible half-space is {x : n.x + d > 0}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-9:
            raise ValueError(f"plane normal must be unit length, |n| = {norm}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def flipped(self) -> "ClipPlane":
        """Same plane with the visible half-space swapped."""
        return ClipPlane(normal=-self.normal, offset=-self.offset)


@dataclass(frozen=True)
class Ray:
    """origin + t * direction, with unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        norm = np.linalg.norm(d)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d| = {norm}")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


class VisibilityClass(Enum):
    INVISIBLE = -1
    CUTOFF = 0
    VISIBLE = 1


@dataclass(frozen=True)
class ChordClip:
    """Result of clipping one ray's chord through a 3-sigma ellipsoid.

    ``t_enter``/``t_exit`` bound the chord (equal when the ray misses),
    ``t_plane`` is the ray-plane parameter (None when parallel) and
    ``weight`` in [0, 1] is the visible fraction of the chord.
    """

    t_enter: float
    t_exit: float
    t_plane: float | None
    weight: float


def signed_distance(plane: ClipPlane, point: np.ndarray) -> float:
    """n . point + d; positive exactly on the visible side."""
    return float(np.dot(plane.normal, point) + plane.offset)


def classify(g: Gaussian, plane: ClipPlane) -> VisibilityClass:
    """Three-way visibility of a Gaussian against the plane.

    Uses the isotropic over-approximation r = 3 * max(sigma); anisotropic
    primitives may land in CUTOFF even when fully on one side, which is
    safe (the per-ray path handles them exactly).
    """
    r = 3.0 * float(np.max(g.scale))
    d = signed_distance(plane, g.mu)
    if d < -r:
        return VisibilityClass.INVISIBLE
    if d > r:
        return VisibilityClass.VISIBLE
    return VisibilityClass.CUTOFF


def classify_all(
    mu: np.ndarray,
    scale: np.ndarray,
    plane: ClipPlane,
    radii: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized classify over (N, 3) centers and (N, 3) sigmas.

    Returns an int8 array of VisibilityClass values.  ``radii`` may carry
    precomputed 3 * max(sigma) values (e.g. Scene.clip_radii()).
    """
    if radii is None:
        radii = 3.0 * np.maximum(np.maximum(scale[:, 0], scale[:, 1]), scale[:, 2])
    r = radii
    d = mu @ plane.normal + plane.offset
    out = np.zeros(len(mu), dtype=np.int8)
    out[d < -r] = VisibilityClass.INVISIBLE.value
    out[d > r] = VisibilityClass.VISIBLE.value
    return out


def _ellipsoid_inverse(g: Gaussian) -> np.ndarray:
    """M^-1 for the 3-sigma ellipsoid (maps world to unit-sphere space)."""
    rot = quat_to_matrix(g.rotation)
    return np.diag(1.0 / (3.0 * g.scale)) @ rot.T


def ray_ellipsoid_intersect(ray: Ray, g: Gaussian) -> tuple[float, float] | None:
    """Both roots of the ray against the 3-sigma ellipsoid, sorted ascending.

    Transforms the ray into the unit-sphere space of the ellipsoid and
    solves the quadratic |r~(t)|^2 = 1.  Returns None for misses and
    tangencies (discriminant <= 1e-12).  Roots may be negative; callers
    filter by sign when only the forward ray matters.
    """
    minv = _ellipsoid_inverse(g)
    o = minv @ (ray.origin - g.mu)
    d = minv @ ray.direction
    a = float(d @ d)
    b = 2.0 * float(o @ d)
    c = float(o @ o) - 1.0
    disc = b * b - 4.0 * a * c
    if disc <= TANGENT_EPS:
        return None
    sq = np.sqrt(disc)
    t1 = (-b - sq) / (2.0 * a)
    t2 = (-b + sq) / (2.0 * a)
    return (t1, t2)


def ray_plane_intersect(ray: Ray, plane: ClipPlane) -> float | None:
    """t at which the ray crosses the plane; None when (near-)parallel."""
    denom = float(np.dot(plane.normal, ray.direction))
    if abs(denom) <= PARALLEL_EPS:
        return None
    return -(float(np.dot(plane.normal, ray.origin)) + plane.offset) / denom


def decay_weight(ray: Ray, g: Gaussian, plane: ClipPlane) -> ChordClip:
    """Visible-chord opacity weight for a cutoff Gaussian along one ray.

    The weight is the visible fraction of the ray's chord through the
    3-sigma ellipsoid:
      - ray misses the ellipsoid         -> 1 (keep the rasterized alpha)
      - plane does not split the chord   -> 1 or 0 by the chord midpoint side
      - plane splits the chord           -> visible sub-segment / full chord
      - both chord endpoints visible while the plane parameter still falls
        inside the chord (round-off near tangency) -> 1
    Total over all inputs; callers normally restrict it to CUTOFF Gaussians.
    """
    hit = ray_ellipsoid_intersect(ray, g)
    t_p = ray_plane_intersect(ray, plane)
    if hit is None:
        return ChordClip(t_enter=0.0, t_exit=0.0, t_plane=t_p, weight=1.0)
    t1, t2 = hit
    # Signed distance along the ray: s(t) = (n.e + d) + t * (n.dir).
    s0 = float(np.dot(plane.normal, ray.origin)) + plane.offset
    sd = float(np.dot(plane.normal, ray.direction))

    def visible(t: float) -> bool:
        return s0 + t * sd > 0.0

    if t_p is not None and t1 < t_p < t2:
        if visible(t1) and visible(t2):
            weight = 1.0
        elif visible(0.5 * (t1 + t_p)):
            weight = (t_p - t1) / (t2 - t1)
        elif visible(0.5 * (t_p + t2)):
            weight = (t2 - t_p) / (t2 - t1)
        else:
            weight = 0.0
    else:
        weight = 1.0 if visible(0.5 * (t1 + t2)) else 0.0
    return ChordClip(t_enter=t1, t_exit=t2, t_plane=t_p, weight=weight)


def chord_weights(
    origin: np.ndarray,
    dirs: np.ndarray,
    g_mu: np.ndarray,
    g_rot: np.ndarray,
    g_scale: np.ndarray,
    plane: ClipPlane,
    miss_weight: float = 1.0,
) -> np.ndarray:
    """Vectorized decay_weight for one Gaussian over many unit rays.

    ``dirs`` is (P, 3); returns (P,) weights.  ``miss_weight`` overrides
    the weight assigned to rays that miss the 3-sigma ellipsoid (the
    naive force-everything ablation uses 0 there).
    """
    minv = np.diag(1.0 / (3.0 * g_scale)) @ g_rot.T
    o = minv @ (origin - g_mu)
    dl = dirs @ minv.T
    a = np.einsum("pi,pi->p", dl, dl)
    b = 2.0 * (dl @ o)
    c = float(o @ o) - 1.0
    disc = b * b - 4.0 * a * c

    weights = np.full(len(dirs), miss_weight)
    hit = disc > TANGENT_EPS
    if not hit.any():
        return weights

    sq = np.sqrt(disc[hit])
    ah, bh = a[hit], b[hit]
    t1 = (-bh - sq) / (2.0 * ah)
    t2 = (-bh + sq) / (2.0 * ah)

    s0 = float(np.dot(plane.normal, origin)) + plane.offset
    sd = dirs[hit] @ plane.normal
    parallel = np.abs(sd) <= PARALLEL_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        t_p = np.where(parallel, np.inf, -s0 / sd)

    chord_len = t2 - t1
    vis1 = s0 + t1 * sd > 0.0
    vis2 = s0 + t2 * sd > 0.0
    split = ~parallel & (t1 < t_p) & (t_p < t2)

    w = np.where(s0 + 0.5 * (t1 + t2) * sd > 0.0, 1.0, 0.0)  # unsplit chords
    mid_lo_vis = s0 + 0.5 * (t1 + t_p) * sd > 0.0
    mid_hi_vis = s0 + 0.5 * (t_p + t2) * sd > 0.0
    with np.errstate(invalid="ignore"):
        w_split = np.where(
            mid_lo_vis,
            (t_p - t1) / chord_len,
            np.where(mid_hi_vis, (t2 - t_p) / chord_len, 0.0),
        )
    w = np.where(split, np.where(vis1 & vis2, 1.0, w_split), w)

    weights[hit] = w
    return weights


def chord_weights_pairs(
    origin: np.ndarray,
    dirs: np.ndarray,
    minv: np.ndarray,
    mu: np.ndarray | None,
    plane: ClipPlane,
    miss_weight: float = 1.0,
    o: np.ndarray | None = None,
    c: np.ndarray | None = None,
    sd: np.ndarray | None = None,
    deep: np.ndarray | None = None,
) -> np.ndarray:
    """chord_weights over Q independent (Gaussian, ray) pairs.

    ``dirs`` is (Q, 3) unit directions from the shared ``origin``;
    ``minv`` (Q, 3, 3) holds each pair's world-to-unit-sphere transform
    and ``mu`` (Q, 3) the centers.  Returns (Q,) weights.  The rasterizer
    gathers one pair per live (cutoff splat, pixel) combination so no
    work is spent on pixels the splat cannot touch.

    The optional arrays carry quantities that are cheaper to precompute
    once and gather per pair: ``o`` is the sphere-space origin
    minv @ (origin - mu) and ``c`` = |o|^2 - 1 (both constant per
    Gaussian); ``sd`` = n . dir (constant per pixel).  ``deep`` flags
    pairs whose ellipsoid lies entirely on the invisible side of the
    plane: every hit there has weight exactly 0, so the chord/plane
    logic runs only on the remaining pairs.
    """
    if o is None:
        o = np.einsum("qij,qj->qi", minv, origin[None, :] - mu)
    dl = np.einsum("qij,qj->qi", minv, dirs)
    a = np.einsum("qi,qi->q", dl, dl)
    b = 2.0 * np.einsum("qi,qi->q", dl, o)
    if c is None:
        c = np.einsum("qi,qi->q", o, o) - 1.0
    disc = b * b - 4.0 * a * c
    hit = disc > TANGENT_EPS

    s0 = float(np.dot(plane.normal, origin)) + plane.offset
    if sd is None:
        sd = dirs @ plane.normal

    full = None
    if deep is not None and deep.any():
        full = np.flatnonzero(~deep)
        a, b, disc, sd = a[full], b[full], disc[full], sd[full]

    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = (-b - sq) / (2.0 * a)
    t2 = (-b + sq) / (2.0 * a)
    chord_len = t2 - t1

    parallel = np.abs(sd) <= PARALLEL_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        t_p = np.where(parallel, np.inf, -s0 / sd)

    vis1 = s0 + t1 * sd > 0.0
    vis2 = s0 + t2 * sd > 0.0
    split = ~parallel & (t1 < t_p) & (t_p < t2)

    wf = np.where(s0 + 0.5 * (t1 + t2) * sd > 0.0, 1.0, 0.0)
    mid_lo_vis = s0 + 0.5 * (t1 + t_p) * sd > 0.0
    mid_hi_vis = s0 + 0.5 * (t_p + t2) * sd > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        w_split = np.where(
            mid_lo_vis,
            (t_p - t1) / chord_len,
            np.where(mid_hi_vis, (t2 - t_p) / chord_len, 0.0),
        )
    wf = np.where(split, np.where(vis1 & vis2, 1.0, w_split), wf)

    if full is None:
        w = wf
    else:
        w = np.zeros(len(dirs))
        w[full] = wf
    return np.where(hit, w, miss_weight)
