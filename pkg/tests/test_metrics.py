import numpy as np
import pytest

from rarasplat.camera import Camera
from rarasplat.clip import ClipPlane, classify_all
from rarasplat.metrics import (
    AblationReport,
    SweepBenchReport,
    ablation_table,
    bench_table,
    infinity_plane,
    l1_error,
    reports_to_json,
    run_ablation,
    run_sweep_bench,
    ssim,
    sweep_planes,
)
from rarasplat.raster import ClipMode, Image
from rarasplat.scene import generate_synthetic


def img(arr):
    return Image(pixels=np.asarray(arr, dtype=float))


def random_image(rng, h=32, w=32):
    return img(rng.uniform(0, 1, size=(h, w, 3)))


# --- L1 ---------------------------------------------------------------------


def test_l1_identical_is_zero():
    a = random_image(np.random.default_rng(0))
    assert l1_error(a, a) == 0.0


def test_l1_constant_offset():
    a = img(np.zeros((16, 16, 3)))
    b = img(np.full((16, 16, 3), 0.5))
    assert l1_error(a, b) == pytest.approx(127.5)


def test_l1_matches_double_loop_oracle():
    rng = np.random.default_rng(3)
    a = random_image(rng, 9, 7)
    b = random_image(rng, 9, 7)
    total = 0.0
    for iy in range(9):
        for ix in range(7):
            for c in range(3):
                total += abs(a.pixels[iy, ix, c] - b.pixels[iy, ix, c]) * 255.0
    assert l1_error(a, b) == pytest.approx(total / (9 * 7 * 3), abs=1e-9)


def test_l1_symmetric():
    rng = np.random.default_rng(5)
    a, b = random_image(rng), random_image(rng)
    assert l1_error(a, b) == l1_error(b, a)


def test_l1_dimension_mismatch():
    with pytest.raises(ValueError):
        l1_error(img(np.zeros((8, 8, 3))), img(np.zeros((8, 9, 3))))


# --- SSIM -------------------------------------------------------------------


def test_ssim_identity_is_exactly_one():
    a = random_image(np.random.default_rng(1))
    assert ssim(a, a) == 1.0


def test_ssim_constant_images_closed_form():
    # Constant images have zero variance, so only the luminance term acts:
    # (2 c1 c2 + C1) / (c1^2 + c2^2 + C1) with C1 = (0.01 * 255)^2.
    v1, v2 = 0.25, 0.75
    a = img(np.full((32, 32, 3), v1))
    b = img(np.full((32, 32, 3), v2))
    l1_, l2_ = v1 * 255.0, v2 * 255.0
    c1 = (0.01 * 255.0) ** 2
    expected = (2 * l1_ * l2_ + c1) / (l1_**2 + l2_**2 + c1)
    assert ssim(a, b) == pytest.approx(expected, abs=1e-9)


def test_ssim_symmetric_and_bounded():
    rng = np.random.default_rng(8)
    a, b = random_image(rng), random_image(rng)
    s = ssim(a, b)
    assert s == pytest.approx(ssim(b, a), abs=1e-12)
    assert -1.0 <= s <= 1.0
    assert s < 1.0  # different images


def test_ssim_too_small():
    with pytest.raises(ValueError):
        ssim(img(np.zeros((8, 8, 3))), img(np.zeros((8, 8, 3))))


# --- plane helpers ----------------------------------------------------------


def test_infinity_plane_classifies_everything_visible():
    scene = generate_synthetic({"kind": "cluster", "count": 50, "seed": 2})
    plane = infinity_plane(scene)
    assert np.all(classify_all(scene.mu, scene.scale, plane) == 1)


def test_sweep_endpoints_all_invisible_then_all_visible():
    scene = generate_synthetic({"kind": "cluster", "count": 50, "seed": 2})
    planes = sweep_planes(scene, (1.0, 0.0, 0.0), 10)
    assert len(planes) == 10
    first = classify_all(scene.mu, scene.scale, planes[0])
    last = classify_all(scene.mu, scene.scale, planes[-1])
    # Endpoints touch the bounds exactly, so extremal Gaussians may sit
    # tangent (Cutoff); nothing may land on the wrong side outright.
    assert np.all(first <= 0) and np.mean(first == -1) > 0.9
    assert np.all(last >= 0) and np.mean(last == 1) > 0.9
    offsets = [p.offset for p in planes]
    assert offsets == sorted(offsets)
    # The final sweep frame shows the whole scene: identical to unclipped.
    from rarasplat.raster import ClipConfig
    from rarasplat.raster import render as _render

    cam = front_camera(scene, 48)
    a = _render(scene, cam)
    b = _render(scene, cam, ClipConfig(ClipMode.RARA, planes[-1]))
    assert np.array_equal(a.pixels, b.pixels)


def test_sweep_single_frame_is_midpoint():
    scene = generate_synthetic({"kind": "cluster", "count": 20, "seed": 1})
    many = sweep_planes(scene, (0.0, 0.0, 1.0), 3)
    one = sweep_planes(scene, (0.0, 0.0, 1.0), 1)
    assert one[0].offset == pytest.approx(0.5 * (many[0].offset + many[-1].offset))


# --- ablation ---------------------------------------------------------------


def front_camera(scene, size=96):
    c = scene.bounds.center
    return Camera.look_at(c + np.array([0, 0, -1.5 * scene.bounds.diagonal]), c,
                          width=size, height=size)


def test_ablation_selective_exact_naive_not():
    scene = generate_synthetic({"kind": "strands", "strands": 40, "segments": 6,
                                "seed": 3})
    cam = front_camera(scene)
    reports = run_ablation(scene, cam)
    by_name = {r.mode_compared: r for r in reports}
    assert set(by_name) == {"wo RaRa", "w RaRa"}
    # selective ray casting leaves fully visible scenes untouched
    assert by_name["w RaRa"].l1 == 0.0
    assert by_name["w RaRa"].ssim == 1.0
    # forcing every Gaussian through the ray path visibly erodes splats
    assert by_name["wo RaRa"].l1 > 0.0
    assert by_name["wo RaRa"].ssim < 1.0


# --- sweep bench ------------------------------------------------------------


def test_bench_single_frame_degenerate_stats():
    scene = generate_synthetic({"kind": "cluster", "count": 30, "seed": 4})
    cam = front_camera(scene, 64)
    r = run_sweep_bench(scene, cam, ClipMode.RARA, frames=1)
    assert r.frames == 1
    assert r.mean_fps == r.min_fps == r.max_fps > 0


def test_bench_stat_ordering():
    scene = generate_synthetic({"kind": "cluster", "count": 30, "seed": 4})
    cam = front_camera(scene, 64)
    for mode in (ClipMode.NONE, ClipMode.HARD, ClipMode.RARA):
        r = run_sweep_bench(scene, cam, mode, frames=4)
        assert r.mode == mode.value
        assert r.min_fps <= r.mean_fps <= r.max_fps
        assert r.plane_start < r.plane_end


def test_bench_rejects_zero_frames():
    scene = generate_synthetic({"kind": "cluster", "count": 5, "seed": 0})
    with pytest.raises(ValueError):
        run_sweep_bench(scene, front_camera(scene, 64), ClipMode.HARD, frames=0)


# --- report formatting ------------------------------------------------------


def test_reports_round_trip_json():
    import json

    reps = [AblationReport("w RaRa", 0.0, 1.0), AblationReport("wo RaRa", 1.5, 0.9)]
    data = json.loads(reports_to_json(reps))
    assert data[0]["mode_compared"] == "w RaRa"
    assert data[1]["l1"] == 1.5


def test_tables_have_header_and_rows():
    t = ablation_table([AblationReport("w RaRa", 0.0, 1.0)])
    assert "L1" in t and "SSIM" in t and "w RaRa" in t
    b = bench_table([SweepBenchReport("rara", 3, 2.0, 1.0, 3.0, -1.0, 1.0)])
    assert len(b.splitlines()) == 2
    assert "mean FPS" in b
