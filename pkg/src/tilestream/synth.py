"""Synthetic videos, viewpoint traces and bandwidth traces, all seeded."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flowfield import (GRID_COLS, GRID_ROWS, InputError, ViewpointSample, depth_proxy_map, estimate_flow,
                        relative_depth_map, relative_velocity_map)
from .manifest import ChunkTables, VideoManifest
from .perception import JndConfig, joint_jnd
from .qoe import QualityLadder, box_blur, cell_psnr_of, efficiency, synthetic_encode
from .sim.traces import BandwidthTrace, ViewpointTrace, wrap_yaw
from .tiling import build_layout


def scale_trace(trace: BandwidthTrace, target_mean: float) -> BandwidthTrace:
    """Multiply every sample so the time-weighted mean becomes ``target_mean``."""
    mean = trace.mean()
    if not mean > 0:
        raise InputError("cannot scale a zero-mean trace")
    return BandwidthTrace(trace.t.copy(), trace.bps * (target_mean / mean))


def gen_synthetic_bw(profile: str = "random_walk", duration: float = 100.0, seed: int = 0, *,
                     level: float = 5e6, high: float = 8e6, low: float = 1e6, period: float = 10.0,
                     mean: float = 5e6, min_bps: float = 0.2e6, max_bps: float = 20e6,
                     volatility: float = 0.25, dt: float = 1.0) -> BandwidthTrace:
    """Profiles: ``constant``, ``two_band`` (equal dwell at high/low) and
    ``random_walk`` (log-space walk clamped to ``[min_bps, max_bps]``)."""
    if duration <= 0:
        raise InputError("duration must be > 0")
    if profile == "constant":
        if level <= 0:
            raise InputError("level must be > 0")
        return BandwidthTrace(np.array([0.0, duration]), np.array([level, level]))
    if profile == "two_band":
        if min(high, low, period) <= 0:
            raise InputError("two_band levels and period must be > 0")
        t = np.arange(0.0, duration, period / 2.0)
        bps = np.where(np.arange(t.size) % 2 == 0, high, low).astype(np.float64)
        return BandwidthTrace(np.append(t, duration), np.append(bps, bps[-1]))
    if profile == "random_walk":
        if not 0 < min_bps <= mean <= max_bps:
            raise InputError("random_walk needs 0 < min <= mean <= max")
        rng = np.random.default_rng(seed)
        n = int(np.ceil(duration / dt)) + 1
        x = np.empty(n)
        x[0] = np.log(mean)
        # mean-reverting walk in log space
        for i in range(1, n):
            x[i] = x[i - 1] + 0.1 * (np.log(mean) - x[i - 1]) + volatility * rng.standard_normal()
        bps = np.clip(np.exp(x), min_bps, max_bps)
        t = np.minimum(np.arange(n) * dt, duration)
        t[-1] = max(t[-1], t[-2] + 1e-6) if n > 1 else duration
        return BandwidthTrace(t, bps)
    raise InputError(f"unknown bandwidth profile {profile!r}")


def gen_synthetic_viewpoint(duration: float, seed: int = 0, rate_hz: float = 30.0, *,
                            yaw_speed: float = 25.0, turn_rate: float = 0.05, turn_size: float = 90.0,
                            pitch_range: float = 40.0) -> ViewpointTrace:
    """Head motion: mean-reverting yaw velocity plus occasional quick turns.

    ``turn_rate`` is the expected number of quick turns per second; each turn
    rotates by up to ``turn_size`` degrees over 0.3 s.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * rate_hz)) + 1
    dt = 1.0 / rate_hz
    yaw = np.empty(n)
    pitch = np.empty(n)
    yaw[0] = rng.uniform(-180, 180)
    pitch[0] = rng.uniform(-10, 10)
    vy = rng.normal(0, yaw_speed)
    vp = 0.0
    turn_left = 0
    turn_v = 0.0
    for i in range(1, n):
        vy += -0.5 * vy * dt + yaw_speed * np.sqrt(dt) * rng.standard_normal()
        vp += -1.0 * vp * dt + 10.0 * np.sqrt(dt) * rng.standard_normal()
        if turn_left == 0 and rng.random() < turn_rate * dt:
            turn_left = int(0.3 * rate_hz)
            turn_v = rng.choice([-1, 1]) * rng.uniform(0.5, 1.0) * turn_size / 0.3
        extra = turn_v if turn_left > 0 else 0.0
        turn_left = max(turn_left - 1, 0)
        yaw[i] = yaw[i - 1] + (vy + extra) * dt
        pitch[i] = pitch[i - 1] + vp * dt - 0.2 * pitch[i - 1] * dt
        pitch[i] = np.clip(pitch[i], -pitch_range, pitch_range)
    yaw = (yaw + 180.0) % 360.0 - 180.0
    return ViewpointTrace(np.arange(n) * dt, yaw, pitch)


@dataclass
class VideoSpec:
    """Pattern parameters for one synthetic video."""

    width: int = 192
    height: int = 96
    chunks: int = 60
    chunk_duration: float = 1.0
    fps: int = 30
    frames_per_chunk: int = 2
    n_objects: int = 3
    speeds: tuple = (1, 2, 3)  # px/frame, sampled per object with random sign
    object_size: tuple = ((20, 48), (14, 30))  # (width range, height range) in px
    background_detail: float = 1.0
    base_size: int = 200  # bytes of an average cell at level 1
    block: int = 8
    radius: int = 4
    background_eps: float = 0.5
    jnd: JndConfig = field(default_factory=JndConfig)
    K: int = 50

    def __post_init__(self):
        if self.width % GRID_COLS or self.height % GRID_ROWS or self.width <= 0 or self.height <= 0:
            raise InputError(f"video {self.width}x{self.height} does not tile a {GRID_ROWS}x{GRID_COLS} grid")


def _smooth_noise(rng, h, w, passes):
    a = rng.standard_normal((h, w))
    for _ in range(passes):
        a = box_blur(a)
    return a / (a.std() + 1e-12)


def _background(spec: VideoSpec, rng) -> np.ndarray:
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w]
    base = 110 + 40 * np.sin(2 * np.pi * (xx / w * rng.integers(1, 4) + rng.random()))
    base += 25 * np.cos(2 * np.pi * (yy / h * rng.integers(1, 3) + rng.random()))
    # detail amplitude varies across the frame so tiles differ in efficiency
    envelope = np.clip(_smooth_noise(rng, h, w, 12) * 0.8 + 0.6, 0.0, 2.0)
    detail = _smooth_noise(rng, h, w, 3) * 14 * spec.background_detail * envelope
    return np.clip(base + detail, 0, 255)


@dataclass
class _Object:
    x0: float
    y: int
    w: int
    h: int
    vx: int
    texture: np.ndarray


def _objects(spec: VideoSpec, rng) -> list:
    objs = []
    for _ in range(spec.n_objects):
        w = int(rng.integers(*spec.object_size[0]))
        h = int(rng.integers(*spec.object_size[1]))
        y = int(rng.integers(0, spec.height - h))
        vx = int(rng.choice(spec.speeds)) * int(rng.choice([-1, 1])) if spec.speeds else 0
        level = rng.uniform(30, 220)
        tex = level + rng.uniform(15, 35) * np.sign(np.sin(np.arange(w)[None, :] * rng.uniform(0.5, 1.5)
                                                          + np.arange(h)[:, None] * rng.uniform(0.3, 1.0)))
        tex = tex + rng.normal(0, 6, size=(h, w))
        objs.append(_Object(float(rng.integers(0, spec.width)), y, w, h, vx, np.clip(tex, 0, 255)))
    return objs


def render_frame(background: np.ndarray, objects: list, index: int) -> np.ndarray:
    """Frame ``index``: objects pasted in list order (later ones nearer), wrapping horizontally."""
    frame = background.copy()
    w = frame.shape[1]
    for o in objects:
        x = int(o.x0 + o.vx * index) % w
        cols = (x + np.arange(o.w)) % w
        frame[o.y:o.y + o.h, cols] = o.texture
    return np.round(frame)


def _texture_factor(frame, rows, cols):
    h, w = frame.shape
    gy, gx = np.gradient(frame)
    g = np.hypot(gx, gy).reshape(rows, h // rows, cols, w // cols).mean(axis=(1, 3)) + 1.0
    return np.clip(g / g.mean(), 0.25, 4.0)


def cell_sizes(frame, base_size: int, levels: int = 6, rows=GRID_ROWS, cols=GRID_COLS) -> np.ndarray:
    """Byte model ``base * 2**(l-1) * texture_factor``; blank is 0 bytes."""
    tf = _texture_factor(np.asarray(frame, dtype=np.float64), rows, cols)
    sizes = np.zeros((rows, cols, levels), dtype=np.int64)
    for lvl in range(1, levels):
        sizes[..., lvl] = np.maximum(np.ceil(base_size * 2 ** (lvl - 1) * tf), sizes[..., lvl - 1] + 1)
    return sizes


def viewpoint_velocity(vp: ViewpointTrace, t: float, fps: int, width: int, height: int) -> tuple:
    """Viewpoint motion over one frame interval, in equirectangular px/frame."""
    a = vp.sample_at(t)
    b = vp.sample_at(t + 1.0 / fps)
    dyaw = wrap_yaw(b.yaw - a.yaw)
    return dyaw * width / 360.0, -(b.pitch - a.pitch) * height / 180.0


@dataclass
class SyntheticVideo:
    manifest: VideoManifest
    viewpoint: ViewpointTrace
    frames: list  # the rendered frames of chunk 0, for inspection/CLI export
    objects: list


def gen_synthetic_video(spec: VideoSpec = VideoSpec(), seed: int = 0, viewpoint: ViewpointTrace = None,
                        video_id: str = None, ladder: QualityLadder = QualityLadder()) -> SyntheticVideo:
    """Render moving rectangles over a static textured background and build a manifest.

    Scores use the viewer's own trace (generated from ``seed`` when not
    given) for the viewpoint velocity and position at each frame.
    """
    rng = np.random.default_rng(seed)
    if viewpoint is None:
        viewpoint = gen_synthetic_viewpoint(spec.chunks * spec.chunk_duration + 1.0, seed=seed + 7919)
    bg = _background(spec, rng)
    objs = _objects(spec, rng)
    rows, cols = GRID_ROWS, GRID_COLS
    chunks = []
    first_frames = []
    for n in range(spec.chunks):
        start = int(round(n * spec.chunk_duration * spec.fps))
        frames = [render_frame(bg, objs, start + k) for k in range(spec.frames_per_chunk + 1)]
        if n == 0:
            first_frames = frames
        of = np.zeros((rows, cols, len(ladder)))
        plain = np.zeros_like(of)
        for k in range(spec.frames_per_chunk):
            t = (start + k) / spec.fps
            flow = estimate_flow(frames[k], frames[k + 1], spec.block, spec.radius)
            v = viewpoint_velocity(viewpoint, t, spec.fps, spec.width, spec.height)
            dv = relative_velocity_map(flow, v)
            depth = depth_proxy_map(flow, spec.background_eps)
            sample = viewpoint.sample_at(t)
            dd = relative_depth_map(depth, ViewpointSample(t, sample.yaw, sample.pitch, v))
            jnd = joint_jnd(dv, dd, spec.jnd)
            for lvl in range(1, len(ladder)):
                enc = synthetic_encode(frames[k], lvl)
                of[..., lvl] += cell_psnr_of(frames[k], enc, jnd, rows, cols)
                plain[..., lvl] += cell_psnr_of(frames[k], enc, 0.0, rows, cols)
        of = np.maximum.accumulate(of / spec.frames_per_chunk, axis=2)
        plain = np.maximum.accumulate(plain / spec.frames_per_chunk, axis=2)
        chunks.append(ChunkTables(of, plain, cell_sizes(frames[0], spec.base_size, len(ladder), rows, cols)))

    E = np.mean([efficiency(c.psnr_of, len(ladder) - 1, 1) for c in chunks], axis=0)
    layout = build_layout(E, spec.K)
    manifest = VideoManifest(video_id or f"synthetic-{seed}", spec.chunk_duration, layout, chunks, ladder)
    return SyntheticVideo(manifest, viewpoint, first_frames, objs)
