"""Command-line interface: render, compare, ablate, bench, synth, serve.

Flag values override config-file values (JSON, via --config), which
override built-in defaults.  Set RARA_LOG to control log verbosity.
"""

from __future__ import annotations

import functools
import json
import logging
import os
from pathlib import Path

import click
import numpy as np

from . import metrics as metrics_mod
from .camera import Camera
from .clip import ClipPlane
from .raster import ClipConfig, ClipMode, Image, render
from .scene import Scene, generate_synthetic, load_scene, write_ply

log = logging.getLogger("rarasplat")


def _setup_logging() -> None:
    level = os.environ.get("RARA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def parse_plane(text: str) -> ClipPlane:
    """Parse 'nx,ny,nz,d'; auto-normalizes the normal with a warning."""
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise click.BadParameter("plane must be nx,ny,nz,d")
    n = np.array(parts[:3])
    norm = np.linalg.norm(n)
    if norm == 0:
        raise click.BadParameter("plane normal must be nonzero")
    if abs(norm - 1.0) > 1e-6:
        click.echo(f"warning: normalizing plane normal (|n| = {norm:.6g})", err=True)
    return ClipPlane(normal=n / norm, offset=parts[3])


def parse_res(text: str) -> tuple[int, int]:
    try:
        w, h = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise click.BadParameter("resolution must be WxH, e.g. 512x512")
    if w < 16 or h < 16:
        raise click.BadParameter("resolution must be at least 16x16")
    return w, h


def parse_camera(text: str | None, scene: Scene, width: int, height: int) -> Camera:
    """Camera from 'from=x,y,z;at=x,y,z;up=x,y,z;fov=deg', with every part
    optional; defaults frame the scene bounds from -z."""
    center = scene.bounds.center
    diag = max(scene.bounds.diagonal, 1e-6)
    opts = {"from": center + np.array([0.0, 0.0, -1.2 * diag]),
            "at": center, "up": np.array([0.0, 1.0, 0.0]), "fov": 60.0}
    if text:
        for part in text.split(";"):
            if not part:
                continue
            key, _, value = part.partition("=")
            key = key.strip()
            if key == "fov":
                opts["fov"] = float(value)
            elif key in ("from", "at", "up"):
                opts[key] = np.array([float(v) for v in value.split(",")])
            else:
                raise click.BadParameter(f"unknown camera key {key!r}")
    return Camera.look_at(opts["from"], opts["at"], opts["up"], opts["fov"],
                          width=width, height=height)


def _load(scene_path: str | None, synth: str | None, seed: int | None) -> Scene:
    if (scene_path is None) == (synth is None):
        raise click.UsageError("exactly one of --scene or --synth is required")
    if scene_path:
        return load_scene(scene_path)
    spec = json.loads(Path(synth).read_text()) if Path(synth).exists() else json.loads(synth)
    if seed is not None:
        spec["seed"] = seed
    return generate_synthetic(spec)


def common_options(fn):
    @click.option("--scene", "scene_path", type=str, default=None,
                  help="Scene file (.ply or .json synthetic descriptor).")
    @click.option("--synth", type=str, default=None,
                  help="Inline JSON synthetic-scene descriptor, or a path to one.")
    @click.option("--camera", "camera_spec", type=str, default=None,
                  help="Camera as 'from=x,y,z;at=x,y,z;up=x,y,z;fov=deg'.")
    @click.option("--res", default="512x512", show_default=True, help="Resolution WxH.")
    @click.option("--tile", default=16, show_default=True, help="Tile size in pixels.")
    @click.option("--threads", default=1, show_default=True, help="Render worker threads.")
    @click.option("--seed", type=int, default=None, help="Override synthetic-scene seed.")
    @click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                  help="JSON config file supplying defaults for any flag.")
    @functools.wraps(fn)
    def wrapper(*args, **kw):
        cfg_path = kw.pop("config_path", None)
        if cfg_path:
            # Config precedence: explicit flags > config file > defaults.
            cfg = json.loads(Path(cfg_path).read_text())
            ctx = click.get_current_context()
            for key, value in cfg.items():
                key = key.replace("-", "_")
                if key in kw and ctx.get_parameter_source(key).name == "DEFAULT":
                    kw[key] = value
        return fn(*args, **kw)
    return wrapper


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Gaussian-splatting renderer with plane clipping (hard and RaRa modes)."""
    _setup_logging()


@main.command("render")
@common_options
@click.option("--mode", type=click.Choice([m.value for m in ClipMode]), default="none",
              show_default=True)
@click.option("--plane", type=str, default=None, help="Clip plane as nx,ny,nz,d.")
@click.option("-o", "--output", type=click.Path(), required=True, help="Output PNG path.")
def cmd_render(scene_path, synth, camera_spec, res, tile, threads, seed, mode, plane, output):
    """Render a scene to a PNG."""
    mode = ClipMode(mode)
    if mode is not ClipMode.NONE and plane is None:
        raise click.UsageError(f"--mode {mode.value} requires --plane")
    if mode is ClipMode.NONE and plane is not None:
        raise click.UsageError("--plane requires --mode hard or rara")
    scene = _load(scene_path, synth, seed)
    w, h = parse_res(res)
    cam = parse_camera(camera_spec, scene, w, h)
    clip = ClipConfig(mode, parse_plane(plane) if plane else None)
    img = render(scene, cam, clip, tile=tile, threads=threads)
    img.save_png(output)
    log.info("wrote %s", output)


@main.command("compare")
@common_options
@click.option("--plane", type=str, required=True, help="Clip plane as nx,ny,nz,d.")
@click.option("-o", "--output", type=click.Path(), required=True,
              help="Output triptych PNG (none | hard | rara).")
@click.option("--json", "json_out", type=click.Path(), default=None,
              help="Write pairwise L1/SSIM metrics as JSON.")
def cmd_compare(scene_path, synth, camera_spec, res, tile, threads, seed, plane, output, json_out):
    """Render all three modes side by side and report pairwise errors."""
    scene = _load(scene_path, synth, seed)
    w, h = parse_res(res)
    cam = parse_camera(camera_spec, scene, w, h)
    pl = parse_plane(plane)
    imgs = {
        "none": render(scene, cam, ClipConfig(ClipMode.NONE), tile=tile, threads=threads),
        "hard": render(scene, cam, ClipConfig(ClipMode.HARD, pl), tile=tile, threads=threads),
        "rara": render(scene, cam, ClipConfig(ClipMode.RARA, pl), tile=tile, threads=threads),
    }
    trip = Image(pixels=np.concatenate([imgs[m].pixels for m in ("none", "hard", "rara")], axis=1))
    trip.save_png(output)
    pairs = {}
    names = list(imgs)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            pairs[f"{a}_vs_{b}"] = {
                "l1": metrics_mod.l1_error(imgs[a], imgs[b]),
                "ssim": metrics_mod.ssim(imgs[a], imgs[b]),
            }
    text = json.dumps(pairs, indent=2)
    if json_out:
        Path(json_out).write_text(text)
    click.echo(text)


@main.command("ablate")
@common_options
@click.option("-o", "--output", type=click.Path(), default=None, help="Write report JSON.")
def cmd_ablate(scene_path, synth, camera_spec, res, tile, threads, seed, output):
    """Infinite-plane ablation: selective vs forced ray tracing."""
    scene = _load(scene_path, synth, seed)
    w, h = parse_res(res)
    cam = parse_camera(camera_spec, scene, w, h)
    reports = metrics_mod.run_ablation(scene, cam, tile=tile, threads=threads)
    click.echo(metrics_mod.ablation_table(reports))
    if output:
        Path(output).write_text(metrics_mod.reports_to_json(reports))


@main.command("bench")
@common_options
@click.option("--mode", type=click.Choice([m.value for m in ClipMode]), default="rara",
              show_default=True)
@click.option("--frames", default=30, show_default=True)
@click.option("--normal", default="1,0,0", show_default=True, help="Sweep plane normal.")
@click.option("-o", "--output", type=click.Path(), default=None, help="Write report JSON.")
def cmd_bench(scene_path, synth, camera_spec, res, tile, threads, seed, mode, frames,
              normal, output):
    """Fixed-camera plane-sweep FPS benchmark."""
    scene = _load(scene_path, synth, seed)
    w, h = parse_res(res)
    cam = parse_camera(camera_spec, scene, w, h)
    n = np.array([float(v) for v in normal.split(",")])
    report = metrics_mod.run_sweep_bench(scene, cam, ClipMode(mode), frames=frames,
                                         normal=n, tile=tile, threads=threads)
    click.echo(metrics_mod.bench_table([report]))
    if output:
        Path(output).write_text(metrics_mod.reports_to_json([report]))


@main.command("synth")
@click.argument("kind", type=click.Choice(["grid", "cluster", "strands"]))
@click.option("--params", type=str, default="{}",
              help="JSON object of generator parameters.")
@click.option("--seed", type=int, default=None)
@click.option("-o", "--output", type=click.Path(), required=True, help="Output PLY path.")
def cmd_synth(kind, params, seed, output):
    """Generate a synthetic scene and write it as a 3DGS-convention PLY."""
    spec = json.loads(params)
    spec["kind"] = kind
    if seed is not None:
        spec["seed"] = seed
    scene = generate_synthetic(spec)
    write_ply(scene, output)
    click.echo(f"wrote {len(scene)} Gaussians to {output}")


@main.command("serve")
@click.option("--scenes", "scene_dir", type=click.Path(exists=True, file_okay=False),
              required=True, help="Directory of .ply / .json scenes.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def cmd_serve(scene_dir, host, port):
    """Run the interactive render service (HTTP + WebSocket)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(scene_dir), host=host, port=port)


if __name__ == "__main__":
    main()
