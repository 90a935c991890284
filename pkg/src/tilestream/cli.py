"""Command-line entry point: ``tilestream <command> ...``.

Flag defaults can come from a JSON file given with ``--config`` (flat keys
or one section per command) and seeds default to ``$OFBVR_SEED``.
Failures print one ``error: <kind>: <message>`` line and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .abr.a2c import TrainConfig, TrainingError, train, write_log
from .abr.network import load_params, save_params
from .experiment import (DatasetSpec, Video, evaluate, load_traces, load_videos, make_controller, make_dataset,
                         make_env_factory, make_validator, save_dataset, save_video, summarize, write_rows)
from .flowfield import (InputError, ViewpointSample, depth_proxy_map, estimate_flow, relative_depth_map,
                        relative_velocity_map)
from .manifest import VideoManifest
from .perception import DEFAULT_LAMBDA, JndConfig, joint_jnd
from .qoe import efficiency, psnr, psnr_of, tile_scores
from .sim import SessionConfig, StallError, run_session
from .synth import VideoSpec, gen_synthetic_bw, gen_synthetic_video, gen_synthetic_viewpoint, scale_trace
from .tiling import build_layout

EXIT_INPUT, EXIT_RUNTIME = 2, 1


def env_seed() -> int:
    raw = os.environ.get("OFBVR_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"OFBVR_SEED must be an integer, got {raw!r}")


def _pair(text, kind=float):
    try:
        a, b = (kind(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return a, b


def _jnd_from_args(args, shape):
    if args.jnd:
        jnd = io.read_jnd(args.jnd).astype(np.float64)
    elif args.lam == 0:
        # zero thresholds: PSNR-OF reduces to plain PSNR
        return np.zeros(shape)
    elif args.dv and args.dd:
        jnd = joint_jnd(io.read_scalar_map(args.dv), io.read_scalar_map(args.dd), JndConfig(args.lam))
    else:
        raise InputError("give --jnd, or --dv and --dd")
    if jnd.shape != shape:
        raise InputError(f"JND map {jnd.shape} does not match frame {shape}")
    return jnd


# commands

def cmd_flow(args):
    prev, nxt = io.read_frame(args.prev), io.read_frame(args.next)
    flow = estimate_flow(prev, nxt, args.block, args.radius)
    io.write_flow(args.out, flow)
    if args.dv:
        io.write_scalar_map(args.dv, relative_velocity_map(flow, args.velocity))
    if args.dd:
        depth = depth_proxy_map(flow)
        vp = ViewpointSample(0.0, args.yaw, args.pitch, args.velocity)
        io.write_scalar_map(args.dd, relative_depth_map(depth, vp))


def cmd_jnd(args):
    dv, dd = io.read_scalar_map(args.dv), io.read_scalar_map(args.dd)
    io.write_jnd(args.out, joint_jnd(dv, dd, JndConfig(args.lam)))


def cmd_score(args):
    if args.grid:
        grid = io.score_grid_from_json(io.load_json(args.grid))
        if not args.efficiency:
            raise InputError("--grid needs --efficiency HIGH,LOW")
        hi, lo = args.efficiency
        E = efficiency(grid, hi, lo)
        if args.out:
            io.write_scalar_map(args.out, E)
        else:
            print(json.dumps({"efficiency": E.tolist()}))
        return
    if not args.orig or not args.enc:
        raise InputError("give --orig and --enc (or --grid)")
    orig = io.read_frame(args.orig).astype(np.float64)
    encs = [io.read_frame(p).astype(np.float64) for p in args.enc]
    jnd = _jnd_from_args(args, orig.shape)
    if len(encs) == 1:
        print(json.dumps({"psnr_of": psnr_of(orig, encs[0], jnd, args.cap_db),
                          "psnr": psnr(orig, encs[0], args.cap_db)}))
        return
    grid = tile_scores(orig, encs, jnd, cap_db=args.cap_db)
    doc = io.score_grid_to_json(grid)
    if args.out:
        io.save_json(args.out, doc)
    else:
        print(json.dumps(doc))


def cmd_tile(args):
    if args.grid:
        hi, lo = args.levels
        E = efficiency(io.score_grid_from_json(io.load_json(args.grid)), hi, lo)
    elif args.efficiency:
        E = io.read_scalar_map(args.efficiency).astype(np.float64)
    else:
        raise InputError("give --efficiency or --grid")
    layout = build_layout(E, args.k)
    if args.out:
        io.save_layout(args.out, layout)
    else:
        print(json.dumps(io.layout_to_json(layout)))


def _session_cfg(args) -> SessionConfig:
    return SessionConfig(buffer_cap=args.buffer_cap, startup_threshold=args.startup, fov=args.fov,
                         margin=args.margin)


def cmd_simulate(args):
    if args.vp is None:
        video = load_videos([args.manifest])[0]
    else:
        video = Video(VideoManifest.load(args.manifest), io.read_vp_trace(args.vp))
    bw = io.read_bw_trace(args.bw)
    if args.scale:
        bw = scale_trace(bw, args.scale)
    params = load_params(args.params) if args.params else None
    ctrl = make_controller(args.controller, params, args.seed)
    log = run_session(ctrl, video.manifest, bw, video.viewpoint, _session_cfg(args))
    log.write(args.out, args.summary)
    print(json.dumps(log.summary()))


def cmd_train(args):
    videos = load_videos(args.videos)
    traces = load_traces(args.traces)
    val_videos = load_videos(args.val_videos) if args.val_videos else videos[:3]
    val_traces = load_traces(args.val_traces) if args.val_traces else traces[:4]
    cfg = TrainConfig(episodes=args.episodes, seed=args.seed, workers=args.workers,
                      validate_every=args.validate_every)
    scfg = _session_cfg(args)
    params, rows = train(make_env_factory(videos, traces, scfg), cfg, make_validator(val_videos, val_traces, scfg))
    save_params(params, args.out)
    if args.log:
        write_log(rows, args.log)


def cmd_eval(args):
    videos = load_videos(args.videos)
    traces = load_traces(args.traces)
    params = load_params(args.params) if args.params else None
    names = [c for c in args.controllers.split(",") if c]
    ctrls = {n: make_controller(n, params, args.seed) for n in names}
    rows = evaluate(ctrls, videos, traces, _session_cfg(args))
    write_rows(rows, args.out)
    print(json.dumps(summarize(rows)))


def cmd_gen(args):
    what = args.what
    if what == "bw":
        tr = gen_synthetic_bw(args.profile, args.duration, args.seed, level=args.mean, mean=args.mean,
                              high=args.high, low=args.low, period=args.period)
        if args.scale:
            tr = scale_trace(tr, args.scale)
        io.write_bw_trace(args.out, tr)
    elif what == "vp":
        io.write_vp_trace(args.out, gen_synthetic_viewpoint(args.duration, args.seed))
    elif what == "video":
        spec = VideoSpec(width=args.width, height=args.height, chunks=args.chunks, K=args.k)
        sv = gen_synthetic_video(spec, args.seed)
        out = Path(args.out)
        path = save_video(Video(sv.manifest, sv.viewpoint, out.stem), out.parent)
        if args.frames:
            fdir = Path(args.frames)
            fdir.mkdir(parents=True, exist_ok=True)
            for i, f in enumerate(sv.frames):
                io.write_pgm(fdir / f"frame{i:03d}.pgm", f)
        print(path)
    elif what == "dataset":
        spec = DatasetSpec(n_videos=args.videos, n_traces=args.traces, seed=args.seed,
                           means=tuple(float(m) for m in args.means.split(",")),
                           video=VideoSpec(chunks=args.chunks, K=args.k))
        videos, traces = make_dataset(spec)
        save_dataset(videos, traces, args.out)
        print(args.out)


# parser

def _session_flags(p):
    p.add_argument("--buffer-cap", type=float, default=8.0)
    p.add_argument("--startup", type=float, default=2.0)
    p.add_argument("--fov", type=float, default=100.0)
    p.add_argument("--margin", type=float, default=30.0)


def build_parser(seed_default: int = 0) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tilestream", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="block-matching flow plus relative velocity/depth maps")
    p.add_argument("--prev", required=True)
    p.add_argument("--next", required=True)
    p.add_argument("--out", required=True, help="flow grid (OFBF)")
    p.add_argument("--dv", help="write relative velocity map (OFBS)")
    p.add_argument("--dd", help="write relative depth map (OFBS)")
    p.add_argument("--velocity", type=_pair, default=(0.0, 0.0), help="viewpoint motion dx,dy in px/frame")
    p.add_argument("--yaw", type=float, default=0.0)
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--block", type=int, default=16)
    p.add_argument("--radius", type=int, default=7)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("jnd", help="joint JND map from velocity and depth maps")
    p.add_argument("--dv", required=True)
    p.add_argument("--dd", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--out", required=True, help="JND grid (OFBJ)")
    p.set_defaults(func=cmd_jnd)

    p = sub.add_parser("score", help="PSNR-OF of a frame pair, tile score grid, or efficiency")
    p.add_argument("--orig")
    p.add_argument("--enc", nargs="+", help="one encoded frame, or one per non-blank level")
    p.add_argument("--jnd")
    p.add_argument("--dv")
    p.add_argument("--dd")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--cap-db", type=float, default=100.0)
    p.add_argument("--grid", help="score grid JSON (for --efficiency)")
    p.add_argument("--efficiency", type=lambda s: _pair(s, int), help="HIGH,LOW levels")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("tile", help="versatile-size layout from an efficiency map")
    p.add_argument("--efficiency", help="efficiency map (OFBS)")
    p.add_argument("--grid", help="score grid JSON; efficiency taken between --levels")
    p.add_argument("--levels", type=lambda s: _pair(s, int), default=(5, 1))
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("simulate", help="play one video over one bandwidth trace")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vp", help="viewpoint CSV (default: the manifest's .vp.csv sidecar)")
    p.add_argument("--bw", required=True)
    p.add_argument("--scale", type=float, help="rescale the trace to this mean (bps)")
    p.add_argument("--controller", default="rate", choices=["rate", "fixed_grid", "random", "rl"])
    p.add_argument("--params")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", required=True, help="per-chunk CSV")
    p.add_argument("--summary", help="aggregate JSON")
    _session_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the actor-critic policy")
    p.add_argument("--videos", nargs="+", required=True)
    p.add_argument("--traces", nargs="+", required=True)
    p.add_argument("--val-videos", nargs="+")
    p.add_argument("--val-traces", nargs="+")
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--validate-every", type=int, default=100)
    p.add_argument("--out", required=True, help="policy file (OFBP)")
    p.add_argument("--log", help="training log CSV")
    _session_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="controllers x traces summary CSV")
    p.add_argument("--videos", nargs="+", required=True)
    p.add_argument("--traces", nargs="+", required=True)
    p.add_argument("--controllers", default="rl,rate,fixed_grid")
    p.add_argument("--params")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", required=True)
    _session_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="synthetic videos, traces and datasets")
    p.add_argument("what", choices=["video", "bw", "vp", "dataset"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--profile", default="random_walk", choices=["constant", "two_band", "random_walk"])
    p.add_argument("--duration", type=float, default=100.0)
    p.add_argument("--mean", type=float, default=5e6)
    p.add_argument("--high", type=float, default=8e6)
    p.add_argument("--low", type=float, default=1e6)
    p.add_argument("--period", type=float, default=10.0)
    p.add_argument("--scale", type=float)
    p.add_argument("--width", type=int, default=192)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--chunks", type=int, default=60)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--frames", help="directory for the first chunk's frames (PGM)")
    p.add_argument("--videos", type=int, default=10)
    p.add_argument("--traces", type=int, default=5)
    p.add_argument("--means", default="5e6,2e6")
    p.set_defaults(func=cmd_gen)
    return parser


def _apply_config(parser, path, command):
    with open(path) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: config must be a JSON object")
    flat = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}
    flat.update({k.replace("-", "_"): v for k, v in cfg.get(command, {}).items()})
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    known = {a.dest for a in sub._actions}
    unknown = set(flat) - known
    if unknown:
        raise InputError(f"{path}: unknown option(s) {', '.join(sorted(unknown))} for {command}")
    sub.set_defaults(**flat)


def _kind(exc) -> str:
    if isinstance(exc, (InputError, argparse.ArgumentTypeError, json.JSONDecodeError)):
        return "input"
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, TrainingError):
        return "training"
    if isinstance(exc, StallError):
        return "stall"
    return "internal"


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        parser = build_parser(env_seed())
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(parser, args.config, args.command)
            args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        for key in ("out", "log", "summary"):
            if getattr(args, key, None):
                Path(getattr(args, key)).parent.mkdir(parents=True, exist_ok=True)
        args.func(args)
    except SystemExit as e:
        return int(e.code or 0)
    except Exception as e:  # one machine-parsable line, no traceback
        msg = " ".join(str(e).split()) or type(e).__name__
        print(f"error: {_kind(e)}: {msg}", file=sys.stderr)
        return EXIT_INPUT if _kind(e) in ("input", "io") else EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
