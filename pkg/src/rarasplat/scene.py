"""Gaussian scene containers, binary PLY I/O and synthetic scene generators.

Scenes hold one anisotropic 3D Gaussian per primitive: center, per-axis
standard deviations, unit quaternion rotation, opacity density and RGB
color.  Storage is struct-of-arrays (numpy) for fast batch rendering;
``Scene.gaussian(i)`` gives a per-primitive view when scalar math is
more convenient.

Scenes are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# DC spherical-harmonic basis constant (1 / (2 sqrt(pi))), 3DGS color convention.
SH_C0 = 0.28209479177387814


class SceneFormatError(ValueError):
    """Raised for malformed or unsupported scene files."""


class EmptySceneError(ValueError):
    """Raised when an operation requires at least one Gaussian."""


class ParameterError(ValueError):
    """Raised for invalid synthetic-generator parameters."""


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quats_to_matrices(q: np.ndarray) -> np.ndarray:
    """Vectorized (N, 4) quaternions -> (N, 3, 3) rotation matrices."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(q), 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


@dataclass(frozen=True)
class Gaussian:
    """A single anisotropic Gaussian primitive.

    ``scale`` holds per-axis standard deviations (strictly positive),
    ``rotation`` a unit quaternion (w, x, y, z), ``delta`` the opacity
    density in (0, 1] and ``color`` an RGB triple in [0, 1].
    """

    mu: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray
    delta: float
    color: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))
        q = np.asarray(self.rotation, dtype=float)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("degenerate quaternion")
        object.__setattr__(self, "rotation", q / n)
        object.__setattr__(self, "color", np.asarray(self.color, dtype=float))
        if not (np.all(np.isfinite(self.scale)) and np.all(self.scale > 0)):
            raise ValueError(f"scale must be finite and positive, got {self.scale}")
        if not (0 < self.delta <= 1):
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if np.any(self.color < 0) or np.any(self.color > 1):
            raise ValueError(f"color channels must be in [0, 1], got {self.color}")

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    @property
    def covariance(self) -> np.ndarray:
        """World-space covariance R S^2 R^T (derived, never stored)."""
        r = self.rotation_matrix
        return r @ np.diag(self.scale**2) @ r.T


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned box in world units."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, p: np.ndarray) -> bool:
        return bool(np.all(p >= self.lo - 1e-9) and np.all(p <= self.hi + 1e-9))


@dataclass(frozen=True)
class Scene:
    """An ordered collection of Gaussians with precomputed bounds.

    Arrays: ``mu`` (N, 3), ``scale`` (N, 3), ``rotation`` (N, 4) unit
    quaternions, ``delta`` (N,), ``color`` (N, 3).
    """

    mu: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray
    delta: np.ndarray
    color: np.ndarray
    name: str = "scene"
    bounds: Bounds = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        for attr in ("mu", "scale", "rotation", "delta", "color"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float))
        for arr in (self.mu, self.scale, self.rotation, self.delta, self.color):
            arr.setflags(write=False)
        if self.bounds is None:
            object.__setattr__(self, "bounds", compute_bounds(self))

    def __len__(self) -> int:
        return self.mu.shape[0]

    def clip_radii(self) -> np.ndarray:
        """Per-Gaussian isotropic bound 3 * max(sigma), cached (scenes are
        immutable, and plane sweeps reclassify every frame)."""
        cached = getattr(self, "_clip_radii", None)
        if cached is None:
            s = self.scale
            cached = 3.0 * np.maximum(np.maximum(s[:, 0], s[:, 1]), s[:, 2])
            cached.setflags(write=False)
            object.__setattr__(self, "_clip_radii", cached)
        return cached

    def gaussian(self, i: int) -> Gaussian:
        return Gaussian(
            mu=self.mu[i],
            scale=self.scale[i],
            rotation=self.rotation[i],
            delta=float(self.delta[i]),
            color=self.color[i],
        )

    @property
    def gaussians(self) -> list[Gaussian]:
        return [self.gaussian(i) for i in range(len(self))]

    @staticmethod
    def from_gaussians(gaussians, name: str = "scene") -> "Scene":
        gs = list(gaussians)
        if not gs:
            raise EmptySceneError("scene needs at least one Gaussian")
        return Scene(
            mu=np.stack([g.mu for g in gs]),
            scale=np.stack([g.scale for g in gs]),
            rotation=np.stack([g.rotation for g in gs]),
            delta=np.array([g.delta for g in gs]),
            color=np.stack([g.color for g in gs]),
            name=name,
        )


def compute_bounds(scene: Scene) -> Bounds:
    """Axis-aligned box covering mu +/- 3 * max(scale) of every Gaussian."""
    if len(scene) == 0:
        raise EmptySceneError("cannot compute bounds of an empty scene")
    r = 3.0 * scene.scale.max(axis=1, keepdims=True)
    return Bounds(lo=(scene.mu - r).min(axis=0), hi=(scene.mu + r).max(axis=0))


# --- PLY -------------------------------------------------------------------

_REQUIRED_PROPS = (
    "x", "y", "z",
    "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
    "opacity",
    "f_dc_0", "f_dc_1", "f_dc_2",
)

_PLY_DTYPES = {
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
    "uchar": "u1", "uint8": "u1", "char": "i1", "int8": "i1",
    "short": "<i2", "int16": "<i2", "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
}


def _parse_ply_header(f) -> tuple[int, list[tuple[str, str]]]:
    magic = f.readline().strip()
    if magic != b"ply":
        raise SceneFormatError("not a PLY file")
    vertex_count = None
    properties: list[tuple[str, str]] = []
    in_vertex = False
    while True:
        line = f.readline()
        if not line:
            raise SceneFormatError("unterminated PLY header")
        tokens = line.decode("ascii", errors="replace").strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1] != "binary_little_endian":
                raise SceneFormatError(f"unsupported PLY format {tokens[1]!r}")
        elif tokens[0] == "element":
            in_vertex = tokens[1] == "vertex"
            if in_vertex:
                vertex_count = int(tokens[2])
        elif tokens[0] == "property" and in_vertex:
            if tokens[1] == "list":
                raise SceneFormatError("list properties not supported on vertices")
            dtype = _PLY_DTYPES.get(tokens[1])
            if dtype is None:
                raise SceneFormatError(f"unsupported property type {tokens[1]!r}")
            properties.append((tokens[2], dtype))
        elif tokens[0] == "end_header":
            break
    if vertex_count is None:
        raise SceneFormatError("PLY file has no vertex element")
    return vertex_count, properties


def _logistic(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_finite(values: np.ndarray, fields: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        idx = int(np.argwhere(bad)[0][0])
        raise SceneFormatError(f"non-finite decoded value at vertex {idx}, field {fields}")


def load_ply(path: str | Path, name: str | None = None) -> Scene:
    """Load a 3DGS-convention binary little-endian PLY file.

    Stored scales are log-sigmas (decoded with exp), opacity is a logit
    (decoded with the logistic function) and colors are degree-0 SH
    coefficients.  Higher-order SH properties (f_rest_*) and any other
    extra properties are tolerated and ignored.
    """
    path = Path(path)
    with open(path, "rb") as f:
        count, props = _parse_ply_header(f)
        prop_names = [p[0] for p in props]
        for req in _REQUIRED_PROPS:
            if req not in prop_names:
                raise SceneFormatError(f"missing required vertex property {req!r}")
        if count == 0:
            raise EmptySceneError(f"{path} contains zero vertices")
        dtype = np.dtype([(n, t) for n, t in props])
        raw = np.frombuffer(f.read(count * dtype.itemsize), dtype=dtype, count=count)

    mu = np.stack([raw["x"], raw["y"], raw["z"]], axis=1).astype(float)
    scale = np.exp(np.stack([raw[f"scale_{i}"] for i in range(3)], axis=1).astype(float))
    quat = np.stack([raw[f"rot_{i}"] for i in range(4)], axis=1).astype(float)
    delta = _logistic(raw["opacity"].astype(float))
    color = 0.5 + SH_C0 * np.stack([raw[f"f_dc_{i}"] for i in range(3)], axis=1).astype(float)

    _check_finite(mu, "x/y/z")
    _check_finite(scale, "scale")
    _check_finite(quat, "rot")
    _check_finite(delta, "opacity")
    _check_finite(color, "f_dc")
    if np.any(scale <= 0):
        idx = int(np.argwhere(scale <= 0)[0][0])
        raise SceneFormatError(f"non-positive decoded scale at vertex {idx}, field scale")

    norms = np.linalg.norm(quat, axis=1, keepdims=True)
    if np.any(norms == 0):
        idx = int(np.argwhere(norms == 0)[0][0])
        raise SceneFormatError(f"zero quaternion at vertex {idx}, field rot")
    quat = quat / norms
    color = np.clip(color, 0.0, 1.0)

    return Scene(mu=mu, scale=scale, rotation=quat, delta=delta, color=color,
                 name=name or path.stem)


def write_ply(scene: Scene, path: str | Path) -> None:
    """Write a Scene back to 3DGS-convention binary PLY (inverse of load_ply)."""
    path = Path(path)
    n = len(scene)
    if n == 0:
        raise EmptySceneError("refusing to write an empty scene")
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {p}" for p in _REQUIRED_PROPS]
    header.append("end_header")

    delta = np.clip(scene.delta, 1e-12, 1.0 - 1e-12)
    cols = [
        scene.mu[:, 0], scene.mu[:, 1], scene.mu[:, 2],
        np.log(scene.scale[:, 0]), np.log(scene.scale[:, 1]), np.log(scene.scale[:, 2]),
        scene.rotation[:, 0], scene.rotation[:, 1], scene.rotation[:, 2], scene.rotation[:, 3],
        np.log(delta / (1.0 - delta)),
        (scene.color[:, 0] - 0.5) / SH_C0,
        (scene.color[:, 1] - 0.5) / SH_C0,
        (scene.color[:, 2] - 0.5) / SH_C0,
    ]
    body = np.stack(cols, axis=1).astype("<f4")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(body.tobytes())


# --- Synthetic generators --------------------------------------------------


def generate_synthetic(spec: dict) -> Scene:
    """Build a deterministic synthetic scene from a JSON-style descriptor.

    ``spec["kind"]`` selects the generator:
      - "grid":    regular lattice; keys count (int or [nx,ny,nz]), spacing, sigma
      - "cluster": random blob; keys count, seed, sigma_range, extent
      - "strands": bundle of elongated primitives; keys strands, segments,
                   elongation (>= 10), sigma, seed
    """
    kind = spec.get("kind")
    if kind == "grid":
        return _gen_grid(spec)
    if kind == "cluster":
        return _gen_cluster(spec)
    if kind == "strands":
        return _gen_strands(spec)
    raise ParameterError(f"unknown synthetic scene kind {kind!r}")


def _gen_grid(spec: dict) -> Scene:
    count = spec.get("count", 3)
    if isinstance(count, int):
        counts = (count, count, count)
    else:
        counts = tuple(int(c) for c in count)
    spacing = float(spec.get("spacing", 1.0))
    sigma = float(spec.get("sigma", 0.1))
    if any(c <= 0 for c in counts) or spacing <= 0 or sigma <= 0:
        raise ParameterError("grid counts, spacing and sigma must be positive")
    axes = [spacing * (np.arange(c) - (c - 1) / 2.0) for c in counts]
    xs, ys, zs = np.meshgrid(*axes, indexing="ij")
    mu = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)
    n = len(mu)
    # Color by lattice position so neighbouring cells are distinguishable.
    span = max(spacing * (max(counts) - 1), spacing)
    color = np.clip(0.5 + mu / span, 0.05, 0.95)
    return Scene(
        mu=mu,
        scale=np.full((n, 3), sigma),
        rotation=np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)),
        delta=np.full(n, float(spec.get("delta", 0.8))),
        color=color,
        name=spec.get("name", "grid"),
    )


def _gen_cluster(spec: dict) -> Scene:
    count = int(spec.get("count", 100))
    if count <= 0:
        raise ParameterError("cluster count must be positive")
    lo, hi = spec.get("sigma_range", (0.05, 0.2))
    if not (0 < lo <= hi):
        raise ParameterError("sigma_range must be positive and ordered")
    extent = float(spec.get("extent", 2.0))
    rng = np.random.default_rng(int(spec.get("seed", 0)))
    mu = rng.uniform(-extent, extent, size=(count, 3))
    scale = rng.uniform(lo, hi, size=(count, 3))
    quat = rng.normal(size=(count, 4))
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    delta = rng.uniform(0.2, 1.0, size=count)
    color = rng.uniform(0.1, 1.0, size=(count, 3))
    return Scene(mu=mu, scale=scale, rotation=quat, delta=delta, color=color,
                 name=spec.get("name", "cluster"))


def _quat_from_z_to(direction: np.ndarray) -> np.ndarray:
    """Shortest-arc quaternion rotating +z onto ``direction`` (unit)."""
    z = np.array([0.0, 0.0, 1.0])
    c = float(np.dot(z, direction))
    if c < -1 + 1e-12:
        return np.array([0.0, 1.0, 0.0, 0.0])  # 180 deg about x
    axis = np.cross(z, direction)
    q = np.array([1.0 + c, *axis])
    return q / np.linalg.norm(q)


def _gen_strands(spec: dict) -> Scene:
    strands = int(spec.get("strands", 100))
    segments = int(spec.get("segments", 10))
    elongation = float(spec.get("elongation", 15.0))
    sigma = float(spec.get("sigma", 0.01))  # cross-section sigma
    extent = float(spec.get("extent", 1.0))
    if strands <= 0 or segments <= 0 or sigma <= 0:
        raise ParameterError("strand counts and sigma must be positive")
    if elongation < 10:
        raise ParameterError("elongation ratio must be >= 10 for strand scenes")
    rng = np.random.default_rng(int(spec.get("seed", 0)))

    mus, quats, colors = [], [], []
    for _ in range(strands):
        root = rng.uniform(-extent, extent, size=3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        curl = 0.3 * rng.normal(size=3)
        base = rng.uniform(0.3, 0.9, size=3)
        seg_len = 2.0 * sigma * elongation * 0.8
        p = root
        d = direction
        for s in range(segments):
            mus.append(p + 0.5 * seg_len * d)
            quats.append(_quat_from_z_to(d))
            colors.append(np.clip(base + 0.05 * rng.normal(size=3), 0.0, 1.0))
            p = p + seg_len * d
            d = d + curl * (seg_len)
            d /= np.linalg.norm(d)

    n = len(mus)
    scale = np.tile([sigma, sigma, sigma * elongation], (n, 1))
    return Scene(
        mu=np.array(mus),
        scale=scale,
        rotation=np.array(quats),
        delta=np.full(n, float(spec.get("delta", 0.9))),
        color=np.array(colors),
        name=spec.get("name", "strands"),
    )


def load_scene(path: str | Path) -> Scene:
    """Load a scene from a .ply file or a .json synthetic-scene descriptor."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path) as f:
            return generate_synthetic(json.load(f))
    return load_ply(path)
