"""CPU Gaussian-splatting renderer with hybrid raster/ray clipping planes."""

from .camera import Camera, pixel_ray, ray_grid
from .clip import (
    ChordClip,
    ClipPlane,
    Ray,
    VisibilityClass,
    classify,
    decay_weight,
    ray_ellipsoid_intersect,
    ray_plane_intersect,
    signed_distance,
)
from .metrics import (
    AblationReport,
    SweepBenchReport,
    l1_error,
    run_ablation,
    run_sweep_bench,
    ssim,
)
from .raster import ClipConfig, ClipMode, Image, Splat2D, evaluate_alpha, project_gaussian, render
from .scene import (
    Bounds,
    EmptySceneError,
    Gaussian,
    ParameterError,
    Scene,
    SceneFormatError,
    compute_bounds,
    generate_synthetic,
    load_ply,
    load_scene,
    write_ply,
)

__version__ = "0.1.0"

__all__ = [
    "AblationReport", "Bounds", "Camera", "ChordClip", "ClipConfig", "ClipMode",
    "ClipPlane", "EmptySceneError", "Gaussian", "Image", "ParameterError", "Ray",
    "Scene", "SceneFormatError", "Splat2D", "SweepBenchReport", "VisibilityClass",
    "classify", "compute_bounds", "decay_weight", "evaluate_alpha",
    "generate_synthetic", "l1_error", "load_ply", "load_scene", "pixel_ray",
    "project_gaussian", "ray_ellipsoid_intersect", "ray_grid",
    "ray_plane_intersect", "render", "run_ablation", "run_sweep_bench",
    "signed_distance", "ssim", "write_ply",
]
