#!/usr/bin/env python3
"""End-to-end demo on synthetic blobs: generate data, let X-means pick the
hidden width, train, and print the resulting architecture and metrics."""

import argparse

from cluster_mlp.clustering import XMeansConfig
from cluster_mlp.constructor import PipelineConfig, run_pipeline
from cluster_mlp.dataset import synth_blobs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=5, help="generating cluster count")
    ap.add_argument("--per-cluster", type=int, default=100)
    ap.add_argument("--d", type=int, default=4, help="feature dimension")
    ap.add_argument("--separation", type=float, default=30.0)
    ap.add_argument("--noise-std", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = synth_blobs(args.k, args.per_cluster, args.d, args.separation,
                     args.noise_std, seed=args.seed)
    cfg = PipelineConfig(xmeans=XMeansConfig(kmin=2, kmax=4 * args.k, seed=args.seed))
    report = run_pipeline(ds, cfg)

    print(f"generating k: {args.k}    recovered k: {report.k}")
    print(f"architecture: {report.spec}")
    print(f"clustering: {report.clustering_seconds:.3f}s    "
          f"training: {report.training_seconds:.3f}s")
    for name, block in (("train", report.metrics_train),
                        ("validation", report.metrics_validation),
                        ("test", report.metrics_test)):
        if block is None:
            continue
        print(f"{name:>10}: rms={block.rms:.4f}  norm_rms={block.norm_rms:.4f}  "
              f"bias={block.bias:+.4f}  outliers={block.outlier_fraction:.3f}  "
              f"corr={block.correlation:.4f}  (n={block.n})")


if __name__ == "__main__":
    main()
