"""Write a synthetic dataset directory (videos + scaled bandwidth traces).

    python scripts/make_dataset.py data/train --videos 8 --traces 8 --seed 1
"""
import argparse

from tilestream.experiment import DatasetSpec, make_dataset, save_dataset
from tilestream.synth import VideoSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--videos", type=int, default=10)
    ap.add_argument("--traces", type=int, default=5)
    ap.add_argument("--chunks", type=int, default=40)
    ap.add_argument("--means", default="5e6,2e6", help="comma-separated mean bandwidths (bit/s)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    spec = DatasetSpec(n_videos=args.videos, n_traces=args.traces, seed=args.seed,
                       means=tuple(float(m) for m in args.means.split(",")), video=VideoSpec(chunks=args.chunks))
    videos, traces = make_dataset(spec)
    save_dataset(videos, traces, args.out)
    print(f"{len(videos)} videos, {len(traces)} traces -> {args.out}")


if __name__ == "__main__":
    main()
