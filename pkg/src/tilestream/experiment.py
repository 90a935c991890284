"""Dataset plumbing shared by the CLI, the scripts and the end-to-end tests.

A dataset directory holds ``videos/<id>.json`` manifests, each with a
``videos/<id>.vp.csv`` viewpoint trace, and ``traces/*.csv`` bandwidth traces.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .flowfield import InputError
from .manifest import VideoManifest
from .sim import (FixedGridController, RandomController, RateController, RLController, SessionConfig,
                  TrainingEnv, run_session)
from .synth import VideoSpec, gen_synthetic_bw, gen_synthetic_video, scale_trace

log = logging.getLogger(__name__)

EVAL_FIELDS = ("controller", "trace", "sessions", "mean_reward", "mean_psnr_of", "mean_rebuffer_ratio")


@dataclass
class Video:
    manifest: VideoManifest
    viewpoint: object
    name: str = ""


@dataclass
class Trace:
    bw: object
    name: str = ""


@dataclass
class DatasetSpec:
    """Synthetic dataset: ``n_videos`` videos and ``n_traces`` base traces, each
    base trace scaled to every mean in ``means``."""

    n_videos: int = 10
    n_traces: int = 5
    means: tuple = (5e6, 2e6)
    seed: int = 0
    video: VideoSpec = field(default_factory=VideoSpec)
    trace_duration: float = 200.0
    volatility: float = 0.25


def vp_path(manifest_path) -> Path:
    p = Path(manifest_path)
    return p.with_name(p.stem + ".vp.csv")


def _expand(paths, pattern):
    out = []
    for p in paths:
        p = Path(p)
        out.extend(sorted(q for q in p.glob(pattern) if not q.name.endswith(".vp.csv")) if p.is_dir() else [p])
    if not out:
        raise InputError(f"no files found in {', '.join(map(str, paths))}")
    return out


def load_videos(paths) -> list:
    """Manifests (files or directories of ``*.json``) with their viewpoint sidecars."""
    videos = []
    for p in _expand(paths, "*.json"):
        vp = vp_path(p)
        if not vp.exists():
            raise InputError(f"{p}: missing viewpoint trace {vp.name}")
        videos.append(Video(VideoManifest.load(p), io.read_vp_trace(vp), p.stem))
    return videos


def load_traces(paths) -> list:
    return [Trace(io.read_bw_trace(p), p.stem) for p in _expand(paths, "*.csv")]


def save_video(video: Video, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{video.name}.json"
    video.manifest.save(path)
    io.write_vp_trace(vp_path(path), video.viewpoint)
    return path


def make_dataset(spec: DatasetSpec):
    """Generate (videos, traces) in memory; deterministic in ``spec``."""
    videos = []
    for i in range(spec.n_videos):
        seed = spec.seed * 1000 + i
        sv = gen_synthetic_video(spec.video, seed=seed, video_id=f"video{spec.seed:03d}_{i:02d}")
        videos.append(Video(sv.manifest, sv.viewpoint, sv.manifest.video_id))
    traces = []
    for i in range(spec.n_traces):
        base = gen_synthetic_bw("random_walk", spec.trace_duration, seed=spec.seed * 1000 + 500 + i,
                                volatility=spec.volatility)
        for m in spec.means:
            traces.append(Trace(scale_trace(base, m), f"trace{spec.seed:03d}_{i:02d}_{m / 1e6:g}M"))
    return videos, traces


def save_dataset(videos, traces, directory):
    directory = Path(directory)
    for v in videos:
        save_video(v, directory / "videos")
    (directory / "traces").mkdir(parents=True, exist_ok=True)
    for t in traces:
        io.write_bw_trace(directory / "traces" / f"{t.name}.csv", t.bw)


def make_controller(name: str, params=None, seed: int = 0):
    if name == "rate":
        return RateController()
    if name == "fixed_grid":
        return FixedGridController()
    if name == "random":
        return RandomController(seed)
    if name == "rl":
        if params is None:
            raise InputError("the rl controller needs a policy file (--params)")
        return RLController(params)
    raise InputError(f"unknown controller {name!r}")


def make_env_factory(videos, traces, cfg: SessionConfig = SessionConfig()):
    pairs = [(v.manifest, v.viewpoint) for v in videos]
    bws = [t.bw for t in traces]
    return lambda worker: TrainingEnv(pairs, bws, cfg)


def make_validator(videos, traces, cfg: SessionConfig = SessionConfig()):
    """Mean total reward of the greedy policy over every (video, trace) pair."""

    def validate(params):
        ctrl = RLController(params)
        return float(np.mean([run_session(ctrl, v.manifest, t.bw, v.viewpoint, cfg).total_reward
                              for v in videos for t in traces]))

    return validate


def evaluate(controllers: dict, videos, traces, cfg: SessionConfig = SessionConfig()) -> list:
    """One row per (controller, trace), averaged over the videos."""
    rows = []
    for name, ctrl in controllers.items():
        for t in traces:
            logs = [run_session(ctrl, v.manifest, t.bw, v.viewpoint, cfg) for v in videos]
            rows.append({"controller": name, "trace": t.name, "sessions": len(logs),
                         "mean_reward": float(np.mean([lg.total_reward for lg in logs])),
                         "mean_psnr_of": float(np.mean([lg.mean_psnr_of for lg in logs])),
                         "mean_rebuffer_ratio": float(np.mean([lg.rebuffer_ratio for lg in logs]))})
    return rows


def summarize(rows) -> dict:
    """Per-controller means over all rows."""
    out = {}
    for name in dict.fromkeys(r["controller"] for r in rows):
        sel = [r for r in rows if r["controller"] == name]
        out[name] = {k: float(np.mean([r[k] for r in sel]))
                     for k in ("mean_reward", "mean_psnr_of", "mean_rebuffer_ratio")}
    return out


def write_rows(rows, path, fields=EVAL_FIELDS):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(fields))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


@dataclass
class EndToEndConfig:
    """Train on one synthetic dataset, pick the snapshot on a second, report on a third."""

    train_data: DatasetSpec = field(default_factory=lambda: DatasetSpec(
        n_videos=8, n_traces=8, seed=1, video=VideoSpec(chunks=40)))
    val_data: DatasetSpec = field(default_factory=lambda: DatasetSpec(
        n_videos=3, n_traces=2, seed=2, video=VideoSpec(chunks=40)))
    test_data: DatasetSpec = field(default_factory=lambda: DatasetSpec(
        n_videos=10, n_traces=5, seed=3, video=VideoSpec(chunks=40)))
    train: object = None  # TrainConfig; None picks the defaults below
    session: SessionConfig = field(default_factory=SessionConfig)

    def train_config(self):
        from .abr.a2c import TrainConfig

        if self.train is not None:
            return self.train
        return TrainConfig(episodes=7000, seed=0, actor_lr=3e-4, critic_lr=3e-3, update_every=0,
                           validate_every=250)


@dataclass
class EndToEndResult:
    rows: list
    summary: dict
    train_seconds: float
    eval_seconds: float
    params: object
    log_rows: list


def run_end_to_end(cfg: EndToEndConfig = EndToEndConfig(), progress=None) -> EndToEndResult:
    import time

    from .abr.a2c import train

    say = progress or log.info
    t0 = time.perf_counter()
    train_v, train_t = make_dataset(cfg.train_data)
    val_v, val_t = make_dataset(cfg.val_data)
    test_v, test_t = make_dataset(cfg.test_data)
    say(f"datasets ready in {time.perf_counter() - t0:.0f} s")

    t0 = time.perf_counter()
    params, log_rows = train(make_env_factory(train_v, train_t, cfg.session), cfg.train_config(),
                             make_validator(val_v, val_t, cfg.session))
    train_s = time.perf_counter() - t0
    say(f"training took {train_s:.0f} s")

    t0 = time.perf_counter()
    ctrls = {"rl": RLController(params), "rate": RateController(), "fixed_grid": FixedGridController()}
    rows = evaluate(ctrls, test_v, test_t, cfg.session)
    eval_s = time.perf_counter() - t0
    say(f"evaluation took {eval_s:.0f} s")
    return EndToEndResult(rows, summarize(rows), train_s, eval_s, params, log_rows)


def directional_check(summary: dict, margin: float = 0.10) -> dict:
    """RL reward beats both baselines by ``margin`` (relative to |baseline|) and
    RL PSNR-OF beats fixed grid at equal-or-lower rebuffering."""
    rl, rate, fixed = summary["rl"], summary["rate"], summary["fixed_grid"]

    def beats(base):
        return rl["mean_reward"] - base["mean_reward"] >= margin * abs(base["mean_reward"])

    return {
        "reward_vs_rate": beats(rate),
        "reward_vs_fixed_grid": beats(fixed),
        "psnr_of_vs_fixed_grid": rl["mean_psnr_of"] > fixed["mean_psnr_of"],
        "rebuffer_vs_fixed_grid": rl["mean_rebuffer_ratio"] <= fixed["mean_rebuffer_ratio"],
    }
