"""File formats: PGM/raw frames, float-grid binaries, JSON grids/layouts, CSV traces."""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .flowfield import InputError
from .manifest import layout_from_json, layout_to_json
from .qoe import QualityLadder, TileScoreGrid
from .sim.traces import BandwidthTrace, ViewpointTrace

FLOW_MAGIC = b"OFBF"
JND_MAGIC = b"OFBJ"
SCALAR_MAGIC = b"OFBS"
SCORE_GRID_VERSION = 1


# frames

def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise InputError(f"{path}: not a binary PGM (P5)")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise InputError(f"{path}: only maxval 255 is supported")
    pos += 1
    px = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return px.reshape(h, w)


def write_pgm(path, pixels: np.ndarray):
    px = np.asarray(pixels)
    if px.min() < 0 or px.max() > 255:
        raise InputError("PGM pixels must be within 0..255")
    h, w = px.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(px.astype(np.uint8).tobytes())


def read_raw(path, dims_path=None) -> np.ndarray:
    """8-bit row-major frame; dimensions come from ``<path>.dims`` ("W H")."""
    dims_path = Path(dims_path or str(path) + ".dims")
    try:
        w, h = (int(x) for x in dims_path.read_text().split()[:2])
    except (OSError, ValueError) as e:
        raise InputError(f"{dims_path}: missing or malformed dimensions header") from e
    data = Path(path).read_bytes()
    if len(data) != w * h:
        raise InputError(f"{path}: expected {w * h} bytes, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def write_raw(path, pixels: np.ndarray):
    px = np.asarray(pixels)
    Path(path).write_bytes(px.astype(np.uint8).tobytes())
    Path(str(path) + ".dims").write_text(f"{px.shape[1]} {px.shape[0]}\n")


def read_frame(path) -> np.ndarray:
    path = Path(path)
    if path.read_bytes()[:2] == b"P5":
        return read_pgm(path)
    return read_raw(path)


# float grids: 16-byte header (magic, u32 width, u32 height, u32 reserved)
# then little-endian float32 in [height][width][channels] order.

def write_grid(path, arr: np.ndarray, magic: bytes):
    arr = np.asarray(arr)
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + struct.pack("<III", w, h, 0))
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_grid(path, magic: bytes, channels: int) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != magic:
        raise InputError(f"{path}: bad magic {data[:4]!r}, expected {magic!r}")
    w, h, _ = struct.unpack_from("<III", data, 4)
    n = w * h * channels
    if len(data) != 16 + 4 * n:
        raise InputError(f"{path}: size does not match {w}x{h}x{channels} header")
    arr = np.frombuffer(data, dtype="<f4", count=n, offset=16).astype(np.float32)
    return arr.reshape((h, w, channels) if channels > 1 else (h, w))


def write_flow(path, flow):
    write_grid(path, flow, FLOW_MAGIC)


def read_flow(path):
    return read_grid(path, FLOW_MAGIC, 2)


def write_jnd(path, jnd):
    write_grid(path, jnd, JND_MAGIC)


def read_jnd(path):
    return read_grid(path, JND_MAGIC, 1)


def write_scalar_map(path, values):
    write_grid(path, values, SCALAR_MAGIC)


def read_scalar_map(path):
    return read_grid(path, SCALAR_MAGIC, 1)


# JSON documents

def score_grid_to_json(grid: TileScoreGrid) -> dict:
    doc = {"version": SCORE_GRID_VERSION, "rows": grid.rows, "cols": grid.cols,
           "levels": list(grid.ladder.levels), "scores": grid.scores.tolist()}
    doc["sizes"] = None if grid.sizes is None else np.asarray(grid.sizes).astype(int).tolist()
    return doc


def score_grid_from_json(doc: dict) -> TileScoreGrid:
    if doc.get("version") != SCORE_GRID_VERSION:
        raise InputError(f"unsupported score grid version {doc.get('version')}")
    scores = np.asarray(doc["scores"], dtype=np.float64)
    sizes = None if doc.get("sizes") is None else np.asarray(doc["sizes"], dtype=np.int64)
    grid = TileScoreGrid(scores, sizes, QualityLadder(tuple(doc["levels"])))
    if scores.shape[:2] != (doc["rows"], doc["cols"]):
        raise InputError("score grid shape disagrees with rows/cols")
    grid.validate()
    return grid


def save_json(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f)


def load_json(path):
    with open(path) as f:
        return json.load(f)


def save_layout(path, layout):
    save_json(path, layout_to_json(layout))


def load_layout(path):
    return layout_from_json(load_json(path))


# traces

def write_bw_trace(path, trace: BandwidthTrace):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t_seconds", "throughput_bps"])
        for t, b in zip(trace.t, trace.bps):
            w.writerow([repr(float(t)), repr(float(b))])


def read_bw_trace(path) -> BandwidthTrace:
    t, b = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["t_seconds", "throughput_bps"]:
            raise InputError(f"{path}: expected header t_seconds,throughput_bps")
        for row in reader:
            if row:
                t.append(float(row[0]))
                b.append(float(row[1]))
    return BandwidthTrace(np.array(t), np.array(b))


def write_vp_trace(path, trace: ViewpointTrace):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t_seconds", "yaw_deg", "pitch_deg"])
        for row in zip(trace.t, trace.yaw, trace.pitch):
            w.writerow([repr(float(x)) for x in row])


def read_vp_trace(path) -> ViewpointTrace:
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["t_seconds", "yaw_deg", "pitch_deg"]:
            raise InputError(f"{path}: expected header t_seconds,yaw_deg,pitch_deg")
        rows = [[float(x) for x in r[:3]] for r in reader if r]
    if not rows:
        raise InputError(f"{path}: empty viewpoint trace")
    t, yaw, pitch = np.array(rows).T
    return ViewpointTrace(t, yaw, pitch)
