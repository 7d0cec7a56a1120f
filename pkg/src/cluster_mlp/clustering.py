"""Clustering algorithms used to size the hidden layer.

k-means (Lloyd with distance-weighted seeding), a BIC score for spherical
Gaussian mixtures, X-means (BIC-gated recursive 2-means splits), DBSCAN,
and MeanShift. Distances are Euclidean throughout; inputs are expected to
be normalized features.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np


class ClusteringError(Exception):
    pass


class Algorithm(enum.Enum):
    KMEANS = "kmeans"
    XMEANS = "xmeans"
    DBSCAN = "dbscan"
    MEANSHIFT = "meanshift"


@dataclass(frozen=True)
class ClusteringResult:
    labels: np.ndarray  # (n,), -1 reserved for DBSCAN noise
    representatives: np.ndarray  # (k, d)
    k: int
    elapsed_seconds: float
    algorithm: Algorithm

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        reps = np.asarray(self.representatives, dtype=float)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "representatives", reps)
        if reps.shape[0] != self.k:
            raise ClusteringError("representatives row count must equal k")
        if np.any(labels < -1) or np.any(labels >= self.k):
            raise ClusteringError("labels out of range")
        if np.any(labels == -1) and self.algorithm is not Algorithm.DBSCAN:
            raise ClusteringError("noise labels are only valid for DBSCAN")
        present = np.unique(labels[labels >= 0])
        if self.k > 0 and present.size != self.k:
            raise ClusteringError("every label in [0, k) must occur at least once")
        if self.elapsed_seconds < 0:
            raise ClusteringError("elapsed_seconds must be non-negative")


@dataclass(frozen=True)
class XMeansConfig:
    kmin: int = 2
    kmax: int = 200
    max_split_rounds: int = 50
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.kmin < 1 or self.kmax < self.kmin:
            raise ValueError("need 1 <= kmin <= kmax")
        if self.max_split_rounds < 1 or self.kmeans_max_iter < 1 or self.kmeans_tol <= 0:
            raise ValueError("invalid x-means config")


@dataclass(frozen=True)
class DbscanConfig:
    eps: float
    min_pts: int

    def __post_init__(self):
        if self.eps <= 0 or self.min_pts < 1:
            raise ValueError("need eps > 0 and min_pts >= 1")


@dataclass(frozen=True)
class MeanShiftConfig:
    bandwidth: float
    shift_tol: float = 1e-5
    max_iter: int = 300
    merge_radius: float | None = None  # defaults to bandwidth / 2

    def __post_init__(self):
        if self.merge_radius is None:
            object.__setattr__(self, "merge_radius", self.bandwidth / 2.0)
        if min(self.bandwidth, self.shift_tol, self.max_iter, self.merge_radius) <= 0:
            raise ValueError("all mean-shift parameters must be positive")


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _fast_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2 via one matmul; cheaper than the
    # broadcast difference when n*k is large. Clamped: cancellation can produce
    # tiny negatives. Used where only the argmin / relative ordering matters.
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * (points @ centers.T)
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0, out=d2)


def _weighted_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded distance-weighted seeding: each next center drawn with
    probability proportional to squared distance to the nearest chosen one."""
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = _fast_sq_dists(points, np.array(centers)).min(axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(points[rng.integers(n)])
            continue
        centers.append(points[rng.choice(n, p=d2 / total)])
    return np.array(centers)


def lloyd(
    points: np.ndarray,
    init_centroids: np.ndarray,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd iterations from explicit initial centroids.

    Returns (labels, centroids, per-iteration WCSS history). Empty clusters
    are re-seeded from the point farthest from its assigned centroid.
    """
    centroids = np.array(init_centroids, dtype=float)
    n, d = points.shape
    k = centroids.shape[0]
    history: list[float] = []
    labels = np.zeros(n, dtype=int)
    points_sq = (points * points).sum(axis=1)  # constant across iterations
    rows = np.arange(n)

    def assign(cents):
        # argmin_j ||x - c_j||^2 = argmin_j (||c_j||^2 - 2 x.c_j); ||x||^2 is
        # added back only for the per-point distances the caller needs.
        partial = (cents * cents).sum(axis=1)[None, :] - 2.0 * (points @ cents.T)
        lab = partial.argmin(axis=1)
        point_d2 = np.maximum(points_sq + partial[rows, lab], 0.0)
        counts = np.bincount(lab, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(point_d2.argmax())
            cents[j] = points[far]
            lab[far] = j
            point_d2[far] = 0.0
            counts = np.bincount(lab, minlength=k)
        return lab, point_d2, counts

    for _ in range(max_iter):
        labels, point_d2, counts = assign(centroids)
        history.append(float(point_d2.sum()))
        sums = np.empty_like(centroids)
        for j in range(d):
            sums[:, j] = np.bincount(labels, weights=points[:, j], minlength=k)
        new_centroids = sums / counts[:, None]
        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if movement < tol:
            break
    labels, point_d2, _ = assign(centroids)
    history.append(float(point_d2.sum()))
    return labels, centroids, history


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusteringResult:
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if k < 1:
        raise ClusteringError("k must be at least 1")
    if k > n:
        raise ClusteringError(f"k={k} exceeds the number of points n={n}")
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    init = _weighted_init(points, k, rng)
    labels, centroids, _ = lloyd(points, init, max_iter, tol)
    elapsed = time.perf_counter() - start
    return ClusteringResult(labels, centroids, k, elapsed, Algorithm.KMEANS)


def bic_score(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """BIC of the identical-spherical-variance Gaussian mixture fit implied
    by a hard partition; higher is better.

    BIC = L - (p/2) ln n with shared variance
    sigma^2 = (1/(n-k)) sum_i ||x_i - mu_label(i)||^2 and
    p = (k - 1) + d*k + 1 free parameters.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    centroids = np.asarray(centroids, dtype=float)
    n, d = points.shape
    k = centroids.shape[0]
    if n <= k:
        raise ClusteringError(f"BIC undefined: n={n} <= k={k}")
    resid_sq = np.sum((points - centroids[labels]) ** 2)
    sigma_sq = resid_sq / (n - k)
    sigma_sq = max(sigma_sq, 1e-12)  # coincident points would zero the variance
    sizes = np.bincount(labels, minlength=k).astype(float)
    log_prior = np.log(sizes[labels] / n)
    loglik = float(
        np.sum(log_prior)
        - n * d / 2.0 * np.log(2.0 * np.pi * sigma_sq)
        - resid_sq / (2.0 * sigma_sq)
    )
    p = (k - 1) + d * k + 1
    return loglik - p / 2.0 * np.log(n)


def _split_candidates(
    members: np.ndarray,
    parent: np.ndarray,
    rng: np.random.Generator,
    max_iter: int,
    tol: float,
    tries: int = 2,
) -> tuple[np.ndarray, np.ndarray] | None:
    """2-means on a cluster's members, children seeded at parent +/- r*u
    with u a random unit direction and r the RMS point-to-centroid radius.

    Lloyd from one random direction can stall in a poor local optimum, so a
    few directions plus one distance-weighted seeding are tried and the
    children with the best BIC are returned.
    """
    d = members.shape[1]
    radius = float(np.sqrt(np.mean(np.sum((members - parent) ** 2, axis=1))))
    if radius == 0.0:
        return None  # coincident points; nothing to split
    inits = []
    for _ in range(tries):
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        inits.append(np.vstack([parent + radius * u, parent - radius * u]))
    inits.append(_weighted_init(members, 2, rng))

    # Trials run a capped number of Lloyd iterations (enough to rank the
    # seedings); only the winner is refined to full convergence.
    trial_iters = min(max_iter, 5)
    best: tuple[float, np.ndarray] | None = None
    for init in inits:
        sub_labels, sub_centroids, _ = lloyd(members, init, trial_iters, tol)
        if not (np.any(sub_labels == 0) and np.any(sub_labels == 1)):
            continue
        score = bic_score(members, sub_labels, sub_centroids)
        if best is None or score > best[0]:
            best = (score, sub_centroids)
    if best is None:
        return None
    sub_labels, sub_centroids, _ = lloyd(members, best[1], max_iter, tol)
    if not (np.any(sub_labels == 0) and np.any(sub_labels == 1)):
        return None
    return sub_labels, sub_centroids


def xmeans(points: np.ndarray, cfg: XMeansConfig) -> ClusteringResult:
    """X-means: start with kmin-means, then repeatedly try to split each
    cluster in two; a split is kept only when the children's joint BIC beats
    the parent's. Stops at kmax, a split-free round, or the round limit."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if cfg.kmin > n:
        raise ClusteringError(f"kmin={cfg.kmin} exceeds the number of points n={n}")
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)

    base = kmeans(points, cfg.kmin, seed=cfg.seed, max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol)
    clusters: list[np.ndarray] = [
        np.flatnonzero(base.labels == j) for j in range(cfg.kmin)
    ]
    centroids: list[np.ndarray] = [points[idx].mean(axis=0) for idx in clusters]
    # Splits never reassign points across clusters, so a cluster that refuses
    # to split keeps identical members in every later round; attempting it
    # again could only differ through fresh random seedings. Refused clusters
    # are therefore frozen and each cluster is attempted exactly once.
    open_flags: list[bool] = [True] * len(clusters)

    for _ in range(cfg.max_split_rounds):
        if len(clusters) >= cfg.kmax or not any(open_flags):
            break
        any_split = False
        total = len(clusters)
        next_clusters: list[np.ndarray] = []
        next_centroids: list[np.ndarray] = []
        next_open: list[bool] = []
        for idx, parent, is_open in zip(clusters, centroids, open_flags):
            members = points[idx]
            accepted = None
            if is_open and total < cfg.kmax and members.shape[0] >= 3:
                cand = _split_candidates(members, parent, rng, cfg.kmeans_max_iter, cfg.kmeans_tol)
                if cand is not None:
                    sub_labels, sub_centroids = cand
                    if np.any(sub_labels == 0) and np.any(sub_labels == 1):
                        parent_bic = bic_score(
                            members, np.zeros(members.shape[0], dtype=int), parent[None, :]
                        )
                        child_bic = bic_score(members, sub_labels, sub_centroids)
                        if child_bic > parent_bic:
                            accepted = (sub_labels, sub_centroids)
            if accepted is not None:
                sub_labels, sub_centroids = accepted
                next_clusters.append(idx[sub_labels == 0])
                next_clusters.append(idx[sub_labels == 1])
                next_centroids.append(sub_centroids[0])
                next_centroids.append(sub_centroids[1])
                next_open.extend([True, True])
                total += 1
                any_split = True
            else:
                next_clusters.append(idx)
                next_centroids.append(parent)
                next_open.append(False)
        clusters = next_clusters
        centroids = next_centroids
        open_flags = next_open
        if not any_split:
            break

    labels = np.empty(n, dtype=int)
    for j, idx in enumerate(clusters):
        labels[idx] = j
    elapsed = time.perf_counter() - start
    return ClusteringResult(labels, np.array(centroids), len(clusters), elapsed, Algorithm.XMEANS)


def dbscan(points: np.ndarray, cfg: DbscanConfig) -> ClusteringResult:
    """Density-connected expansion with deterministic input-order visiting.
    Core points have >= min_pts neighbors within eps, self included."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    start = time.perf_counter()
    d2 = _pairwise_sq_dists(points, points)
    neighbors = [np.flatnonzero(d2[i] <= cfg.eps**2) for i in range(n)]
    is_core = np.array([len(nb) >= cfg.min_pts for nb in neighbors])

    labels = np.full(n, -1, dtype=int)
    k = 0
    for i in range(n):
        if labels[i] != -1 or not is_core[i]:
            continue
        labels[i] = k
        frontier = list(neighbors[i])
        pos = 0
        while pos < len(frontier):
            j = frontier[pos]
            pos += 1
            if labels[j] == -1:
                labels[j] = k
                if is_core[j]:
                    frontier.extend(neighbors[j])
        k += 1

    if k > 0:
        reps = np.array([points[labels == j].mean(axis=0) for j in range(k)])
    else:
        reps = np.empty((0, points.shape[1]))
    elapsed = time.perf_counter() - start
    return ClusteringResult(labels, reps, k, elapsed, Algorithm.DBSCAN)


def meanshift(points: np.ndarray, cfg: MeanShiftConfig) -> ClusteringResult:
    """Gaussian-kernel mean-shift: iterate every point to its density mode,
    then merge attractors within merge_radius into shared basins."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    start = time.perf_counter()
    h2 = cfg.bandwidth**2
    attractors = np.empty_like(points)
    for i in range(n):
        x = points[i].copy()
        for _ in range(cfg.max_iter):
            w = np.exp(-np.sum((points - x) ** 2, axis=1) / (2.0 * h2))
            new_x = w @ points / w.sum()
            shift = float(np.linalg.norm(new_x - x))
            x = new_x
            if shift < cfg.shift_tol:
                break
        attractors[i] = x

    modes: list[np.ndarray] = []
    labels = np.empty(n, dtype=int)
    for i in range(n):
        assigned = -1
        for j, m in enumerate(modes):
            if np.linalg.norm(attractors[i] - m) <= cfg.merge_radius:
                assigned = j
                break
        if assigned == -1:
            modes.append(attractors[i])
            assigned = len(modes) - 1
        labels[i] = assigned
    elapsed = time.perf_counter() - start
    return ClusteringResult(labels, np.array(modes), len(modes), elapsed, Algorithm.MEANSHIFT)


def cluster_count(r: ClusteringResult) -> int:
    """Number of proper clusters, excluding the DBSCAN noise pseudo-cluster."""
    if r.k < 1:
        raise ClusteringError("no clusters; architecture undefined")
    return r.k
