"""Chunk-by-chunk playback session over a bandwidth and a viewpoint trace."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..abr.allocation import allocate_tiles, rect_table
from ..abr.areas import AREAS, CORE, OUTSIDE, SURROUND, classify_areas, window_cells
from ..abr.reward import REWARD_ALPHA, REWARD_BETA, chunk_reward
from ..abr.state import Action, AbrState
from ..flowfield import InputError
from ..manifest import FIXED, VERSATILE, scheme_layout
from .traces import BandwidthTrace, ViewpointTrace, download_time, predict_viewpoint


class SessionExhausted(Exception):
    """Raised by :meth:`Session.step` after the last chunk."""


@dataclass(frozen=True)
class SessionConfig:
    chunk_duration: float = 1.0
    buffer_cap: float = 8.0
    startup_threshold: float = 2.0
    fov: float = 100.0
    margin: float = 30.0
    alpha: float = REWARD_ALPHA
    beta: float = REWARD_BETA
    predict_window: int = 8

    def __post_init__(self):
        if min(self.chunk_duration, self.buffer_cap, self.startup_threshold) <= 0:
            raise InputError("durations must be > 0")
        if self.startup_threshold > self.buffer_cap:
            raise InputError("startup threshold exceeds buffer cap")


@dataclass
class PreparedVideo:
    """Per-scheme lookup tables: which cells belong to which rect and per-rect sums."""

    manifest: object
    scheme: str
    layout: object
    cell_idx: np.ndarray
    cell_scores: list
    cell_sizes: list
    rect_values: list
    rect_sizes: list

    @classmethod
    def build(cls, manifest, scheme=VERSATILE):
        layout = scheme_layout(manifest, scheme)
        scores = [c.psnr_of if scheme == VERSATILE else c.psnr for c in manifest.chunks]
        sizes = [c.sizes for c in manifest.chunks]
        tables = [rect_table(s, z, layout) for s, z in zip(scores, sizes)]
        return cls(manifest, scheme, layout, layout.cell_index(), scores, sizes,
                   [t[0] for t in tables], [t[1] for t in tables])

    @property
    def chunk_count(self):
        return self.manifest.chunk_count


@dataclass
class ChunkOutcome:
    P: float
    Rt: float
    ratio: float
    bitrates: dict
    download_time: float
    nbytes: int


@dataclass
class ChunkView:
    """What a controller may look at before choosing: next chunk's per-area costs."""

    chunk: int
    labels: list
    area_costs: np.ndarray  # (3 areas, levels) bytes for a uniform level per area
    chunk_duration: float


@dataclass
class ChunkRecord:
    chunk: int
    core_level: int
    surround_level: int
    outside_level: int
    core_budget: int
    surround_budget: int
    outside_budget: int
    nbytes: int
    t_start: float
    download_time: float
    rebuffer: float
    buffer: float
    psnr_of: float
    ratio: float
    reward: float


@dataclass
class SessionLog:
    records: list = field(default_factory=list)
    wall_time: float = 0.0
    startup_delay: float = 0.0
    total_rebuffer: float = 0.0
    video_duration: float = 0.0
    buffer_trace: list = field(default_factory=list)

    @property
    def mean_psnr_of(self) -> float:
        return float(np.mean([r.psnr_of for r in self.records])) if self.records else 0.0

    @property
    def rebuffer_ratio(self) -> float:
        return self.total_rebuffer / self.wall_time if self.wall_time > 0 else 0.0

    @property
    def total_reward(self) -> float:
        return float(sum(r.reward for r in self.records))

    def summary(self) -> dict:
        return {"chunks": len(self.records), "mean_psnr_of": self.mean_psnr_of,
                "rebuffer_ratio": self.rebuffer_ratio, "total_reward": self.total_reward,
                "total_rebuffer": self.total_rebuffer, "startup_delay": self.startup_delay,
                "wall_time": self.wall_time, "video_duration": self.video_duration}

    def write(self, csv_path, json_path=None):
        with open(csv_path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(ChunkRecord.__dataclass_fields__))
            w.writeheader()
            for r in self.records:
                w.writerow(asdict(r))
        if json_path is not None:
            with open(json_path, "w") as f:
                json.dump(self.summary(), f, indent=2)


class Session:
    """Sequential download/playback state machine.

    Startup time (before ``startup_threshold`` seconds are buffered) is kept
    apart from rebuffering, so ``wall_time = startup + rebuffer + video
    duration`` once the session is finished.
    """

    def __init__(self, video: PreparedVideo, bw: BandwidthTrace, vp: ViewpointTrace, cfg: SessionConfig = SessionConfig()):
        if bw.t[0] != 0:
            bw = bw.shifted(bw.t[0])
        if vp.t[-1] < video.manifest.duration - cfg.chunk_duration / 2 or bw.duration < video.manifest.duration:
            raise InputError("trace shorter than the video")
        self.video, self.bw, self.vp, self.cfg = video, bw, vp, cfg
        self.n = 0
        self.t = 0.0
        self.buffer = 0.0
        self.playing = False
        self.played = 0.0
        self.prev_P = None
        self.out_share_sum = 0.0
        self.state = AbrState()
        self.log = SessionLog(video_duration=video.manifest.duration)
        self._view = None

    @property
    def done(self) -> bool:
        return self.n >= self.video.chunk_count

    def view(self) -> ChunkView:
        """Predict the viewport for the next chunk and price each area."""
        if self.done:
            raise SessionExhausted
        if self._view is None:
            d = self.cfg.chunk_duration
            target = (self.n + 0.5) * d
            pred = predict_viewpoint(self.vp, self.played, target - self.played, self.cfg.predict_window)
            labels = classify_areas(self.video.layout, pred, self.cfg.fov, self.cfg.margin, self.video.cell_idx)
            sizes = self.video.rect_sizes[self.n]
            lab = np.asarray(labels)
            costs = np.stack([sizes[lab == a].sum(axis=0) for a in AREAS])
            self._view = ChunkView(self.n, labels, costs, d)
        return self._view

    def step(self, action) -> tuple:
        if not isinstance(action, Action):
            action = Action.from_index(int(action))
        view = self.view()
        cfg, d, n = self.cfg, self.cfg.chunk_duration, self.n
        lv = action.levels()
        budgets = {a: int(view.area_costs[i, lv[a]]) for i, a in enumerate(AREAS)}
        rect_sizes = self.video.rect_sizes[n]
        levels = allocate_tiles(view.labels, budgets, self.video.rect_values[n], rect_sizes)
        per_rect = rect_sizes[np.arange(len(levels)), levels]
        lab = np.asarray(view.labels)
        area_bytes = {a: int(per_rect[lab == a].sum()) for a in AREAS}
        nbytes = int(per_rect.sum())

        t_start = self.t
        dt = download_time(nbytes, self.bw, self.t)
        if self.playing:
            rebuf = max(0.0, dt - self.buffer)
            self.played += dt - rebuf
            self.buffer = max(self.buffer - dt, 0.0)
        else:
            rebuf = 0.0
            self.log.startup_delay += dt
        self.t += dt
        self.buffer += d
        if not self.playing and (self.buffer >= cfg.startup_threshold or n + 1 == self.video.chunk_count):
            self.playing = True
        if self.buffer > cfg.buffer_cap:
            wait = self.buffer - cfg.buffer_cap
            self.buffer = cfg.buffer_cap
            self.t += wait
            self.played += wait
        self.log.total_rebuffer += rebuf
        self.log.buffer_trace.append(self.buffer)

        actual = self.vp.sample_at((n + 0.5) * d)
        viewport = window_cells(actual.yaw, actual.pitch, cfg.fov, self.video.layout.rows, self.video.layout.cols)
        cell_level = levels[self.video.cell_idx]
        cell_score = np.take_along_axis(self.video.cell_scores[n], cell_level[..., None], axis=2)[..., 0]
        P = float(cell_score[viewport].mean())
        outside_cells = (lab == OUTSIDE)[self.video.cell_idx]
        ratio = float((viewport & outside_cells).sum() / viewport.sum())
        r = chunk_reward(P, rebuf, ratio, self.prev_P, cfg.alpha, cfg.beta)

        bitrates = {a: area_bytes[a] * 8.0 / d for a in AREAS}
        rate = nbytes * 8.0 / dt if dt > 0 else self.state.rate
        self.out_share_sum += area_bytes[OUTSIDE] / nbytes if nbytes else 0.0
        acc_out = self.out_share_sum / (n + 1)
        self.state = self.state.push(P, dt, bitrates[CORE], bitrates[SURROUND], bitrates[OUTSIDE],
                                     self.buffer, rate, ratio, acc_out)
        outcome = ChunkOutcome(P, rebuf, ratio, bitrates, dt, nbytes)
        self.log.records.append(ChunkRecord(
            n, action.core, action.surround, action.outside, budgets[CORE], budgets[SURROUND],
            budgets[OUTSIDE], nbytes, t_start, dt, rebuf, self.buffer, P, ratio, r))
        self.prev_P = P
        self.n += 1
        self._view = None
        if self.done:
            self._finish()
        return self.state, outcome

    def _finish(self):
        self.playing = True
        self.played += self.buffer
        self.t += self.buffer
        self.buffer = 0.0
        self.log.wall_time = self.t


def run_session(controller, manifest, bw: BandwidthTrace, vp: ViewpointTrace,
                cfg: SessionConfig = SessionConfig()) -> SessionLog:
    """Play a whole video; ``controller(state, view) -> Action | index``.

    The controller's ``scheme`` attribute (default versatile) selects the
    layout and score table.
    """
    scheme = getattr(controller, "scheme", VERSATILE)
    video = manifest.prepared(scheme) if hasattr(manifest, "prepared") else manifest
    s = Session(video, bw, vp, cfg)
    while not s.done:
        s.step(controller(s.state, s.view()))
    return s.log


class TrainingEnv:
    """reset/step wrapper picking a random (video, bandwidth, viewpoint) triple per episode.

    ``videos`` is a list of ``(manifest, viewpoint_trace)`` pairs.
    """

    def __init__(self, videos, bw_traces, cfg: SessionConfig = SessionConfig(), scheme=VERSATILE,
                 random_offset=True):
        self.videos = videos
        self.bw_traces = bw_traces
        self.cfg = cfg
        self.scheme = scheme
        self.random_offset = random_offset
        self.session = None

    def reset(self, rng: np.random.Generator) -> AbrState:
        manifest, vp = self.videos[int(rng.integers(len(self.videos)))]
        bw = self.bw_traces[int(rng.integers(len(self.bw_traces)))]
        slack = bw.duration - manifest.duration
        if self.random_offset and slack > 0:
            bw = bw.shifted(bw.t[0] + float(rng.uniform(0, slack)))
        self.session = Session(manifest.prepared(self.scheme), bw, vp, self.cfg)
        return self.session.state

    def step(self, action: int):
        before = len(self.session.log.records)
        state, _ = self.session.step(action)
        r = self.session.log.records[before].reward
        return state, r, self.session.done
