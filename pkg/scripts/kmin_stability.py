#!/usr/bin/env python3
"""Sensitivity of the recovered cluster count to the X-means starting point:
run the full pipeline for a range of kmin values on a shared split."""

import argparse

from cluster_mlp.clustering import XMeansConfig
from cluster_mlp.constructor import PipelineConfig, kmin_stability
from cluster_mlp.dataset import synth_blobs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=5, help="generating cluster count")
    ap.add_argument("--per-cluster", type=int, default=80)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--kmins", type=int, nargs="+", default=[2, 3, 4, 5, 6, 8, 10])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = synth_blobs(args.k, args.per_cluster, args.d, 30.0, 1.0, seed=args.seed)
    cfg = PipelineConfig(xmeans=XMeansConfig(kmin=2, kmax=4 * args.k, seed=args.seed))
    rows = kmin_stability(ds, args.kmins, cfg)

    print(f"generating k = {args.k}")
    print(f"{'kmin':>5}  {'recovered k':>11}  {'clustering s':>12}  {'training s':>10}")
    for r in rows:
        print(f"{r.kmin:>5}  {r.k:>11}  {r.clustering_seconds:>12.3f}  {r.training_seconds:>10.3f}")


if __name__ == "__main__":
    main()
