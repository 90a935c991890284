import numpy as np
import pytest

from conftest import toy_manifest
from tilestream import io
from tilestream.abr.network import NetShape, PolicyParams, load_params, save_params
from tilestream.flowfield import InputError
from tilestream.manifest import VideoManifest
from tilestream.qoe import TileScoreGrid
from tilestream.sim import BandwidthTrace, ViewpointTrace
from tilestream.synth import gen_synthetic_bw, gen_synthetic_viewpoint
from tilestream.tiling import build_layout


def test_pgm_and_raw_roundtrip(tmp_path):
    px = np.random.default_rng(0).integers(0, 256, (24, 48)).astype(np.uint8)
    io.write_pgm(tmp_path / "a.pgm", px)
    assert np.array_equal(io.read_frame(tmp_path / "a.pgm"), px)
    io.write_raw(tmp_path / "a.raw", px)
    assert np.array_equal(io.read_frame(tmp_path / "a.raw"), px)
    (tmp_path / "a.raw.dims").write_text("10 10\n")
    with pytest.raises(InputError):
        io.read_raw(tmp_path / "a.raw")


def test_pgm_with_comment(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x01\x02")
    assert io.read_pgm(tmp_path / "c.pgm").tolist() == [[1, 2]]


def test_grid_binaries_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    flow = rng.normal(size=(12, 24, 2)).astype(np.float32)
    jnd = rng.uniform(0, 50, (12, 24)).astype(np.float32)
    io.write_flow(tmp_path / "f.bin", flow)
    io.write_jnd(tmp_path / "j.bin", jnd)
    assert io.read_flow(tmp_path / "f.bin").tobytes() == flow.tobytes()
    assert io.read_jnd(tmp_path / "j.bin").tobytes() == jnd.tobytes()
    raw = (tmp_path / "f.bin").read_bytes()
    assert raw[:4] == b"OFBF" and len(raw) == 16 + 12 * 24 * 2 * 4
    with pytest.raises(InputError):
        io.read_jnd(tmp_path / "f.bin")


def test_score_grid_and_layout_json(tmp_path):
    m = toy_manifest(chunks=1)
    grid = TileScoreGrid(m.chunks[0].psnr_of, m.chunks[0].sizes)
    io.save_json(tmp_path / "g.json", io.score_grid_to_json(grid))
    back = io.score_grid_from_json(io.load_json(tmp_path / "g.json"))
    assert np.array_equal(back.scores, grid.scores) and np.array_equal(back.sizes, grid.sizes)
    lay = build_layout(np.random.default_rng(2).random((12, 24)), 17)
    io.save_layout(tmp_path / "l.json", lay)
    assert io.load_layout(tmp_path / "l.json") == lay


def test_manifest_roundtrip(tmp_path):
    m = toy_manifest(chunks=3)
    m.save(tmp_path / "m.json")
    back = VideoManifest.load(tmp_path / "m.json")
    assert back.layout == m.layout and back.chunk_count == 3
    for a, b in zip(m.chunks, back.chunks):
        assert np.array_equal(a.psnr_of, b.psnr_of) and np.array_equal(a.sizes, b.sizes)


def test_params_roundtrip(tmp_path):
    p = PolicyParams.init(1, NetShape(filters=4, hidden=4, n_out=5))
    save_params(p, tmp_path / "p.bin")
    q = load_params(tmp_path / "p.bin")
    assert all(np.array_equal(p.actor.params[k], q.actor.params[k]) for k in p.actor.params)


def test_trace_csv_roundtrip(tmp_path):
    bw = gen_synthetic_bw("random_walk", duration=30, seed=1)
    io.write_bw_trace(tmp_path / "bw.csv", bw)
    back = io.read_bw_trace(tmp_path / "bw.csv")
    assert np.array_equal(back.t, bw.t) and np.array_equal(back.bps, bw.bps)
    assert (tmp_path / "bw.csv").read_text().startswith("t_seconds,throughput_bps")
    vp = gen_synthetic_viewpoint(5, seed=2)
    io.write_vp_trace(tmp_path / "vp.csv", vp)
    back = io.read_vp_trace(tmp_path / "vp.csv")
    assert np.array_equal(back.yaw, vp.yaw) and np.array_equal(back.pitch, vp.pitch)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(InputError):
        io.read_bw_trace(tmp_path / "bad.csv")
