import hashlib
import json

import numpy as np
import pytest
from click.testing import CliRunner

from rarasplat.cli import main, parse_plane, parse_res
from rarasplat.raster import Image

SYNTH = '{"kind": "cluster", "count": 40, "seed": 5}'


@pytest.fixture
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


# --- parsers ----------------------------------------------------------------


def test_parse_plane_normalizes():
    p = parse_plane("2,0,0,-1")
    np.testing.assert_allclose(p.normal, [1, 0, 0])
    assert p.offset == -1.0


def test_parse_plane_rejects_garbage():
    import click

    with pytest.raises(click.BadParameter):
        parse_plane("1,2,3")
    with pytest.raises(click.BadParameter):
        parse_plane("0,0,0,1")


def test_parse_res():
    assert parse_res("640x480") == (640, 480)
    import click

    with pytest.raises(click.BadParameter):
        parse_res("8x8")
    with pytest.raises(click.BadParameter):
        parse_res("640")


# --- render -----------------------------------------------------------------


def test_render_writes_png(runner, tmp_path):
    out = tmp_path / "img.png"
    run_ok(runner, ["render", "--synth", SYNTH, "--res", "64x64", "-o", str(out)])
    img = Image.from_png_bytes(out.read_bytes())
    assert img.width == 64 and img.height == 64
    assert img.pixels.max() > 0  # something rendered


def test_render_mode_without_plane_exits_2(runner, tmp_path):
    result = runner.invoke(main, ["render", "--synth", SYNTH, "--mode", "rara",
                                  "-o", str(tmp_path / "x.png")])
    assert result.exit_code == 2
    assert "requires --plane" in result.output


def test_render_plane_without_mode_exits_2(runner, tmp_path):
    result = runner.invoke(main, ["render", "--synth", SYNTH, "--plane", "1,0,0,0",
                                  "-o", str(tmp_path / "x.png")])
    assert result.exit_code == 2


def test_render_needs_exactly_one_scene_source(runner, tmp_path):
    result = runner.invoke(main, ["render", "-o", str(tmp_path / "x.png")])
    assert result.exit_code == 2
    assert "--scene or --synth" in result.output


def test_repeat_renders_byte_identical(runner, tmp_path):
    digests = []
    for name in ("a.png", "b.png"):
        out = tmp_path / name
        run_ok(runner, ["render", "--synth", SYNTH, "--res", "64x64",
                        "--mode", "rara", "--plane", "1,0,0,0", "-o", str(out)])
        digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_config_file_defaults_yield_to_flags(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"res": "32x32", "tile": 8}))
    out = tmp_path / "img.png"
    run_ok(runner, ["render", "--synth", SYNTH, "--config", str(cfg),
                    "--res", "48x48", "-o", str(out)])
    img = Image.from_png_bytes(out.read_bytes())
    assert (img.width, img.height) == (48, 48)  # flag beats config
    out2 = tmp_path / "img2.png"
    run_ok(runner, ["render", "--synth", SYNTH, "--config", str(cfg), "-o", str(out2)])
    assert Image.from_png_bytes(out2.read_bytes()).width == 32  # config beats default


# --- compare / ablate / bench ----------------------------------------------


def test_compare_triptych_and_metrics(runner, tmp_path):
    out = tmp_path / "trip.png"
    jout = tmp_path / "m.json"
    result = run_ok(runner, ["compare", "--synth", SYNTH, "--res", "64x64",
                             "--plane", "1,0,0,0", "-o", str(out), "--json", str(jout)])
    img = Image.from_png_bytes(out.read_bytes())
    assert img.width == 3 * 64 and img.height == 64
    metrics = json.loads(jout.read_text())
    assert set(metrics) == {"none_vs_hard", "none_vs_rara", "hard_vs_rara"}
    for pair in metrics.values():
        assert 0.0 <= pair["l1"]
        assert pair["ssim"] <= 1.0
    assert json.loads(result.output) == metrics


def test_ablate_prints_both_rows(runner, tmp_path):
    jout = tmp_path / "abl.json"
    result = run_ok(runner, ["ablate", "--synth", SYNTH, "--res", "64x64",
                             "-o", str(jout)])
    assert "wo RaRa" in result.output and "w RaRa" in result.output
    rows = json.loads(jout.read_text())
    assert {r["mode_compared"] for r in rows} == {"wo RaRa", "w RaRa"}


def test_bench_report(runner, tmp_path):
    jout = tmp_path / "bench.json"
    result = run_ok(runner, ["bench", "--synth", SYNTH, "--res", "32x32",
                             "--frames", "3", "--mode", "hard", "-o", str(jout)])
    assert "mean FPS" in result.output
    (row,) = json.loads(jout.read_text())
    assert row["frames"] == 3 and row["mode"] == "hard"
    assert row["min_fps"] <= row["mean_fps"] <= row["max_fps"]


# --- synth ------------------------------------------------------------------


def test_synth_then_render_pipeline(runner, tmp_path):
    ply = tmp_path / "scene.ply"
    run_ok(runner, ["synth", "strands", "--params",
                    '{"strands": 10, "segments": 3}', "--seed", "2", "-o", str(ply)])
    assert ply.stat().st_size > 0
    out = tmp_path / "img.png"
    run_ok(runner, ["render", "--scene", str(ply), "--res", "64x64", "-o", str(out)])
    assert Image.from_png_bytes(out.read_bytes()).pixels.max() > 0


def test_synth_rejects_bad_params(runner, tmp_path):
    result = runner.invoke(main, ["synth", "grid", "--params", '{"count": 0}',
                                  "-o", str(tmp_path / "x.ply")])
    assert result.exit_code != 0


# --- misc -------------------------------------------------------------------


def test_unknown_flag_errors(runner):
    result = runner.invoke(main, ["render", "--bogus"])
    assert result.exit_code == 2


def test_help_lists_commands(runner):
    result = run_ok(runner, ["--help"])
    for cmd in ("render", "compare", "ablate", "bench", "synth", "serve"):
        assert cmd in result.output
