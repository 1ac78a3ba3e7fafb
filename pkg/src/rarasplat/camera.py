"""Pinhole camera model and per-pixel ray generation.

Convention: right-handed, camera looks down +z in camera space, image x
to the right and image y downward.  A world point p maps to camera space
as ``R @ p + t`` and to pixels as ``(fx * x / z + cx, fy * y / z + cy)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clip import Ray


@dataclass(frozen=True)
class Camera:
    """World-to-camera rigid transform plus pinhole intrinsics."""

    rotation: np.ndarray      # (3, 3) world-to-camera
    translation: np.ndarray   # (3,)
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.01

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise ValueError("camera rotation must be orthonormal")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.near <= 0:
            raise ValueError("near must be positive")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def position(self) -> np.ndarray:
        """Camera origin in world space."""
        return -self.rotation.T @ self.translation

    @property
    def forward(self) -> np.ndarray:
        """World-space viewing direction (+z row of the rotation)."""
        return self.rotation[2]

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World -> camera space for (..., 3) points."""
        return points @ self.rotation.T + self.translation

    def project_point(self, point: np.ndarray) -> np.ndarray:
        """World point -> continuous pixel coordinates (u, v)."""
        p = self.to_camera(np.asarray(point, dtype=float))
        return np.array([
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        ])

    @staticmethod
    def look_at(
        eye,
        target,
        up=(0.0, 1.0, 0.0),
        fov_deg: float = 60.0,
        width: int = 512,
        height: int = 512,
        near: float = 0.01,
    ) -> "Camera":
        """Camera at ``eye`` looking at ``target``; vertical field of view."""
        eye = np.asarray(eye, dtype=float)
        target = np.asarray(target, dtype=float)
        z = target - eye
        nz = np.linalg.norm(z)
        if nz == 0:
            raise ValueError("eye and target coincide")
        z = z / nz
        x = np.cross(z, np.asarray(up, dtype=float))
        nx = np.linalg.norm(x)
        if nx < 1e-12:
            raise ValueError("up vector parallel to view direction")
        x = x / nx
        y = np.cross(z, x)
        rot = np.stack([x, y, z])
        f = 0.5 * height / np.tan(np.radians(fov_deg) / 2.0)
        return Camera(
            rotation=rot,
            translation=-rot @ eye,
            fx=f, fy=f,
            cx=width / 2.0, cy=height / 2.0,
            width=width, height=height, near=near,
        )


def pixel_ray(cam: Camera, px: float, py: float) -> Ray:
    """World-space ray through continuous pixel coordinates (px, py).

    Integer pixel (i, j) is sampled at (i + 0.5, j + 0.5) by the renderer;
    this function accepts any coordinates inside [0, width] x [0, height].
    """
    if not (0.0 <= px <= cam.width and 0.0 <= py <= cam.height):
        raise ValueError(f"pixel ({px}, {py}) outside image {cam.width}x{cam.height}")
    d_cam = np.array([(px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0])
    d = cam.rotation.T @ d_cam
    return Ray(origin=cam.position, direction=d / np.linalg.norm(d))


def ray_grid(cam: Camera) -> np.ndarray:
    """Unit ray directions through every pixel center, shape (H, W, 3)."""
    us = (np.arange(cam.width) + 0.5 - cam.cx) / cam.fx
    vs = (np.arange(cam.height) + 0.5 - cam.cy) / cam.fy
    uu, vv = np.meshgrid(us, vs)
    d_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
    d = d_cam @ cam.rotation
    return d / np.linalg.norm(d, axis=-1, keepdims=True)
