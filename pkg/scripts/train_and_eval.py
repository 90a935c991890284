"""Train the RL controller on synthetic data and compare it with the baselines.

Generates separate training, validation and held-out sets, trains, then
evaluates rl / rate / fixed_grid on 10 held-out videos x 10 traces.

    python scripts/train_and_eval.py --out results/
"""
import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

from tilestream.abr.network import save_params
from tilestream.experiment import EVAL_FIELDS, EndToEndConfig, directional_check, run_end_to_end, write_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--episodes", type=int, help="override the default episode count")
    ap.add_argument("--seed", type=int, help="override the training seed")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = EndToEndConfig()
    tc = cfg.train_config()
    if args.episodes is not None:
        tc = replace(tc, episodes=args.episodes)
    if args.seed is not None:
        tc = replace(tc, seed=args.seed)
    cfg = replace(cfg, train=tc)

    res = run_end_to_end(cfg, progress=print)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_params(res.params, out / "policy.bin")
    write_rows(res.rows, out / "eval.csv", EVAL_FIELDS)
    write_rows(res.log_rows, out / "train_log.csv", list(res.log_rows[0]) if res.log_rows else ["episode"])
    report = {"summary": res.summary, "checks": directional_check(res.summary),
              "train_seconds": res.train_seconds, "eval_seconds": res.eval_seconds}
    (out / "summary.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
