import json
import struct

import numpy as np
import pytest
from fastapi.testclient import TestClient

from rarasplat.raster import Image
from rarasplat.scene import generate_synthetic, write_ply
from rarasplat.service import create_app


@pytest.fixture
def scene_dir(tmp_path):
    d = tmp_path / "scenes"
    d.mkdir()
    write_ply(generate_synthetic({"kind": "cluster", "count": 30, "seed": 1}),
              d / "cluster.ply")
    (d / "synthetic.json").write_text(
        json.dumps({"kind": "grid", "count": 2, "sigma": 0.1}))
    (d / "notes.txt").write_text("not a scene")
    return d


@pytest.fixture
def client(scene_dir):
    with TestClient(create_app(scene_dir)) as c:
        yield c


def recv_frame(ws):
    """Read one (meta, frame_id, payloads) triple off the socket."""
    meta = json.loads(ws.receive_text())
    assert meta["type"] == "frame", meta
    blob = ws.receive_bytes()
    (frame_id,) = struct.unpack_from("<Q", blob)
    body = blob[8:]
    if meta["payloads"] == 2:
        (n,) = struct.unpack_from("<I", body)
        payloads = [body[4:4 + n], body[4 + n:]]
    else:
        payloads = [body]
    assert frame_id == meta["id"]
    return meta, frame_id, payloads


def init(ws, scene="cluster", **kw):
    ws.send_text(json.dumps({"type": "init", "scene": scene, **kw}))


# --- HTTP -------------------------------------------------------------------


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_scenes_listing(client):
    r = client.get("/scenes")
    assert r.status_code == 200
    entries = {e["name"]: e for e in r.json()}
    assert set(entries) == {"cluster", "synthetic"}  # .txt ignored
    assert entries["cluster"]["count"] == 30
    assert entries["synthetic"]["count"] == 8
    b = entries["cluster"]["bounds"]
    assert len(b["lo"]) == 3 and len(b["hi"]) == 3


def test_scenes_empty_dir(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    with TestClient(create_app(empty)) as c:
        assert c.get("/scenes").json() == []


def test_scenes_skips_broken_files(scene_dir):
    (scene_dir / "broken.ply").write_bytes(b"not a ply at all")
    with TestClient(create_app(scene_dir)) as c:
        names = {e["name"] for e in c.get("/scenes").json()}
    assert "broken" not in names and "cluster" in names


# --- WebSocket session ------------------------------------------------------


def test_init_yields_first_frame(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, width=64, height=64)
        meta, fid, payloads = recv_frame(ws)
        assert fid == 1
        assert meta["mode"] == "none"
        assert meta["render_ms"] > 0
        img = Image.from_png_bytes(payloads[0])
        assert (img.width, img.height) == (64, 64)


def test_first_message_must_be_init(client):
    with client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({"type": "set_mode", "mode": "hard"}))
        err = json.loads(ws.receive_text())
        assert err["type"] == "error"
        init(ws, width=32, height=32)  # connection still usable
        _, fid, _ = recv_frame(ws)
        assert fid == 1


def test_malformed_json_reports_error_and_continues(client):
    with client.websocket_connect("/ws") as ws:
        ws.send_text("{nope")
        err = json.loads(ws.receive_text())
        assert err["type"] == "error" and "JSON" in err["message"]
        init(ws, width=32, height=32)
        _, fid, _ = recv_frame(ws)
        assert fid == 1


def test_unknown_scene_errors_and_closes(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, scene="missing")
        err = json.loads(ws.receive_text())
        assert err["type"] == "error" and "missing" in err["message"]
        with pytest.raises(Exception):
            ws.receive_text()


def test_unknown_message_type_reports_error(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, width=32, height=32)
        recv_frame(ws)
        ws.send_text(json.dumps({"type": "frobnicate"}))
        err = json.loads(ws.receive_text())
        assert err["type"] == "error"


def test_state_changes_render_new_frames(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, width=48, height=48)
        _, fid0, _ = recv_frame(ws)
        ws.send_text(json.dumps({"type": "set_plane",
                                 "normal": [1, 0, 0], "offset": 0.0}))
        meta, fid1, _ = recv_frame(ws)
        assert fid1 == fid0 + 1
        assert meta["mode"] == "rara"  # setting a plane activates clipping
        ws.send_text(json.dumps({"type": "set_mode", "mode": "hard"}))
        meta, fid2, _ = recv_frame(ws)
        assert fid2 == fid1 + 1 and meta["mode"] == "hard"


def test_sweep_emits_exact_frame_count_with_increasing_ids(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, width=32, height=32)
        _, start, _ = recv_frame(ws)
        ws.send_text(json.dumps({"type": "sweep", "frames": 30}))
        ids = [recv_frame(ws)[1] for _ in range(30)]
        assert ids == list(range(start + 1, start + 31))


def test_compare_mode_dual_payload(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, width=40, height=40)
        recv_frame(ws)
        ws.send_text(json.dumps({"type": "set_plane",
                                 "normal": [1, 0, 0], "offset": 0.0}))
        recv_frame(ws)
        ws.send_text(json.dumps({"type": "set_compare", "on": True}))
        meta, _, payloads = recv_frame(ws)
        assert meta["mode"] == "compare" and meta["payloads"] == 2
        hard = Image.from_png_bytes(payloads[0])
        rara = Image.from_png_bytes(payloads[1])
        assert hard.width == rara.width == 40
        assert not np.array_equal(hard.pixels, rara.pixels)


def test_rapid_messages_coalesce_to_final_state(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, width=48, height=48)
        recv_frame(ws)
        # Two back-to-back plane updates: at most two frames come back and
        # the last one must reflect the final plane.
        ws.send_text(json.dumps({"type": "set_plane",
                                 "normal": [1, 0, 0], "offset": -1e9}))
        ws.send_text(json.dumps({"type": "set_plane",
                                 "normal": [1, 0, 0], "offset": 1e9}))
        ws.send_text(json.dumps({"type": "set_mode", "mode": "hard"}))
        metas = []
        last_payload = None
        # Drain until the frame rendered in hard mode arrives.
        for _ in range(4):
            meta, _, payloads = recv_frame(ws)
            metas.append(meta)
            last_payload = payloads[0]
            if meta["mode"] == "hard":
                break
        assert metas[-1]["mode"] == "hard"
        assert len(metas) <= 3
        # Final plane puts everything on the visible side: image not blank.
        img = Image.from_png_bytes(last_payload)
        assert img.pixels.max() > 0


def test_invalid_plane_normal_reports_error(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, width=32, height=32)
        recv_frame(ws)
        ws.send_text(json.dumps({"type": "set_plane",
                                 "normal": [0, 0, 0], "offset": 0.0}))
        err = json.loads(ws.receive_text())
        assert err["type"] == "error"


def test_set_camera_changes_image(client):
    with client.websocket_connect("/ws") as ws:
        init(ws, width=48, height=48)
        _, _, p0 = recv_frame(ws)
        ws.send_text(json.dumps({"type": "set_camera",
                                 "eye": [8, 8, -8], "target": [0, 0, 0]}))
        _, _, p1 = recv_frame(ws)
        assert p0[0] != p1[0]
