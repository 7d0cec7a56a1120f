#!/usr/bin/env python3
"""Constructed width vs. the ad-hoc baseline: run the clustering pipeline,
then sweep hidden widths 1..2k on the same split and compare test RMS."""

import argparse

import numpy as np

from cluster_mlp.clustering import XMeansConfig
from cluster_mlp.constructor import PipelineConfig, run_pipeline, sweep_hidden
from cluster_mlp.dataset import Dataset, SplitSpec, synth_blobs
from cluster_mlp.mlp import TrainConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=5, help="generating cluster count")
    ap.add_argument("--per-cluster", type=int, default=60)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--target-noise", type=float, default=0.05,
                    help="observation noise as a fraction of the target std")
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--max-iter", type=int, default=200)
    args = ap.parse_args()

    base = synth_blobs(args.k, args.per_cluster, args.d, 30.0, 1.0, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    ds = Dataset(
        features=base.features.copy(),
        targets=base.targets + rng.normal(0, args.target_noise * base.targets.std(), base.n),
        feature_names=base.feature_names,
        row_ids=base.row_ids,
    )

    split = SplitSpec(0.7, 0)
    train_cfg = TrainConfig(max_iter=args.max_iter)
    cfg = PipelineConfig(xmeans=XMeansConfig(kmin=2, kmax=4 * args.k, seed=0),
                         split=split, train_cfg=train_cfg)
    report = run_pipeline(ds, cfg)

    sweep = sweep_hidden(ds, list(range(1, 2 * report.k + 1)), split, train_cfg)
    print(f"{'width':>5}  {'rms_test':>9}  {'corr':>7}")
    for e in sweep.entries:
        marker = " <- constructed" if e.hidden_width == report.k else ""
        print(f"{e.hidden_width:>5}  {e.rms_test:>9.4f}  {e.correlation:>7.4f}{marker}")
    best = min(e.rms_test for e in sweep.entries)
    print(f"\nconstructed width {report.k}: test rms {report.metrics_test.rms:.4f}")
    print(f"sweep best width {sweep.best_hidden_width}: test rms {best:.4f}")
    print(f"ratio: {report.metrics_test.rms / best:.3f}")


if __name__ == "__main__":
    main()
