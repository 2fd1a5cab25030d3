"""End-to-end orchestration of the two-stage mean-list estimator, plus the
baseline algorithms it is benchmarked against: the single-pass
list-decodable learner, k-means, a median-of-means robust k-means, and
DBSCAN.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import (AlgoConfig, ConfigError, DataError, DataSet, Hypothesis,
                   HypothesisList, rng_stream)
from .inner import Learners, beta, inner_stage
from .learners import KldConfig, LearnerProfile, kld_estimate, rme_estimate
from .outer import outer_stage


@dataclass(frozen=True)
class PipelineResult:
    list: HypothesisList
    per_set_provenance: tuple[int, ...]    # candidate-set index per hypothesis
    timing_ms: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.list) != len(self.per_set_provenance):
            raise ConfigError("one provenance tag per hypothesis required")


def make_default_learners(cfg: AlgoConfig, profile: LearnerProfile | None = None,
                          kld_cfg: KldConfig | None = None,
                          use_rme: bool = True) -> Learners:
    """Wire the concrete multifilter and spectral-filter learners into the
    contract the meta-algorithm expects."""
    profile = profile or LearnerProfile(t=cfg.t)
    kcfg = kld_cfg or KldConfig(profile=profile)

    def kld(S: DataSet, alpha: float, rng: np.random.Generator) -> HypothesisList:
        return kld_estimate(S, alpha, kcfg, rng)

    def rme(S: DataSet, alpha: float, rng: np.random.Generator) -> np.ndarray:
        return rme_estimate(S, alpha, profile, rng)

    return Learners(profile=profile, kld=kld, rme=rme, use_rme=use_rme)


def full_algorithm(S: DataSet, learners: Learners, cfg: AlgoConfig) -> PipelineResult:
    """Two-stage estimator: carve the samples into candidate sets, then run
    the inner stage on each with its inlier-fraction floor rescaled by the
    candidate set's size.  Deterministic given cfg.seed."""
    if not 0.0 < cfg.w_low <= 0.5:
        raise ConfigError(f"w_low must be in (0, 1/2], got {cfg.w_low}")
    if S.n < 2.0 / cfg.w_low:
        raise DataError(f"need at least 2/w_low = {2.0 / cfg.w_low:.1f} samples, got {S.n}")
    timing: dict[str, float] = {}
    t0 = time.perf_counter()
    collection = outer_stage(S, learners, cfg, rng_stream(cfg.seed, "outer"))
    timing["outer_ms"] = (time.perf_counter() - t0) * 1e3
    items: list[Hypothesis] = []
    provenance: list[int] = []
    t0 = time.perf_counter()
    for set_idx, idx in enumerate(collection.sets):
        T = S.subset(idx)
        alpha_low = min(1.0, cfg.w_low * S.n / len(idx))
        out = inner_stage(T, alpha_low, learners, cfg,
                          rng_stream(cfg.seed, f"inner/{set_idx}"))
        items.extend(out)
        provenance.extend([set_idx] * len(out))
    timing["inner_ms"] = (time.perf_counter() - t0) * 1e3
    # candidate sets can overlap near heavy contamination, so the per-set
    # lists may describe the same cluster twice; apply the same proximity
    # merge the per-set filter uses, greedily by decreasing alpha_hat
    order = sorted(range(len(items)), key=lambda i: (-items[i].alpha_hat, i))
    kept_idx: list[int] = []
    for i in order:
        lim = 4.0 * beta(items[i].alpha_hat, learners.profile, cfg.c_beta)
        if all(np.linalg.norm(items[i].mean - items[j].mean) > lim for j in kept_idx):
            kept_idx.append(i)
    kept_idx.sort()
    items = [items[i] for i in kept_idx]
    provenance = [provenance[i] for i in kept_idx]
    return PipelineResult(HypothesisList(tuple(items)), tuple(provenance), timing)


def vanilla_ldme(S: DataSet, learners: Learners, cfg: AlgoConfig) -> HypothesisList:
    """Single-pass baseline: one run of the list-decodable learner with the
    inlier fraction set to the floor w_low."""
    return learners.kld(S, cfg.w_low, rng_stream(cfg.seed, "vanilla"))


# ---------------------------------------------------------------------------
# Clustering baselines
# ---------------------------------------------------------------------------

def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i:] = X[rng.integers(n, size=k - i)]
            break
        probs = d2 / total
        centers[i] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def _assign(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int,
           centroid_fn) -> tuple[np.ndarray, float]:
    k = centers.shape[0]
    for _ in range(max_iter):
        labels = _assign(X, centers)
        new = centers.copy()
        for c in range(k):
            members = X[labels == c]
            if len(members):
                new[c] = centroid_fn(members)
        if np.allclose(new, centers):
            centers = new
            break
        centers = new
    labels = _assign(X, centers)
    wcss = float(((X - centers[labels]) ** 2).sum())
    return centers, wcss


def kmeans(S: DataSet, k: int, rng: np.random.Generator, n_init: int = 5,
           max_iter: int = 100) -> np.ndarray:
    """Lloyd iterations with k-means++ seeding; best of n_init restarts by
    within-cluster sum of squares."""
    if k > S.n:
        raise DataError(f"k={k} exceeds sample count {S.n}")
    if k < 1:
        raise ConfigError("k must be >= 1")
    X = S.points
    best, best_wcss = None, np.inf
    for _ in range(n_init):
        centers = _kmeanspp_init(X, k, rng)
        centers, wcss = _lloyd(X, centers, max_iter, lambda pts: pts.mean(axis=0))
        if wcss < best_wcss:
            best, best_wcss = centers, wcss
    return best


def _median_of_means(pts: np.ndarray, n_blocks: int,
                     rng: np.random.Generator) -> np.ndarray:
    m = min(n_blocks, len(pts))
    if m <= 1:
        return pts.mean(axis=0)
    perm = rng.permutation(len(pts))
    blocks = np.array_split(perm, m)
    block_means = np.array([pts[b].mean(axis=0) for b in blocks])
    return np.median(block_means, axis=0)


def robust_kmeans(S: DataSet, k: int, rng: np.random.Generator,
                  n_blocks: int = 10, n_init: int = 5,
                  max_iter: int = 100) -> np.ndarray:
    """k-means with the centroid update replaced by a coordinatewise
    median-of-means over n_blocks random blocks; n_blocks=1 reduces to the
    plain mean update."""
    if k > S.n:
        raise DataError(f"k={k} exceeds sample count {S.n}")
    if n_blocks < 1:
        raise ConfigError("n_blocks must be >= 1")
    X = S.points
    best, best_wcss = None, np.inf
    for _ in range(n_init):
        centers = _kmeanspp_init(X, k, rng)
        centers, wcss = _lloyd(X, centers, max_iter,
                               lambda pts: _median_of_means(pts, n_blocks, rng))
        if wcss < best_wcss:
            best, best_wcss = centers, wcss
    return best


def dbscan(S: DataSet, eps_nbr: float, min_pts: int,
           within: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Standard density-based clustering.

    Returns (assignment, cluster_means); assignment uses -1 for noise.
    `within` optionally supplies a precomputed boolean matrix of pairwise
    distances <= eps_nbr, so a grid of eps values can reuse one distance
    matrix.
    """
    if eps_nbr <= 0:
        raise ConfigError("eps_nbr must be > 0")
    if min_pts < 1:
        raise ConfigError("min_pts must be >= 1")
    X = S.points
    n = X.shape[0]
    if within is None:
        within = pairwise_within(X, eps_nbr)
    neighbor_counts = within.sum(axis=1)
    core = neighbor_counts >= min_pts
    assignment = np.full(n, -1)
    cluster = 0
    for start in range(n):
        if assignment[start] != -1 or not core[start]:
            continue
        # BFS over density-reachable points
        assignment[start] = cluster
        frontier = [start]
        while frontier:
            i = frontier.pop()
            if not core[i]:
                continue
            nbrs = np.flatnonzero(within[i])
            for j in nbrs:
                if assignment[j] == -1:
                    assignment[j] = cluster
                    if core[j]:
                        frontier.append(j)
        cluster += 1
    means = np.array([X[assignment == c].mean(axis=0) for c in range(cluster)]) \
        if cluster else np.empty((0, X.shape[1]))
    return assignment, means


def pairwise_within(X: np.ndarray, eps_nbr: float,
                    chunk: int = 512) -> np.ndarray:
    """Boolean matrix of pairwise Euclidean distances <= eps_nbr, computed
    in row chunks to bound peak memory."""
    n = X.shape[0]
    sq = (X**2).sum(axis=1)
    out = np.empty((n, n), dtype=bool)
    thresh = eps_nbr * eps_nbr
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (X[lo:hi] @ X.T)
        out[lo:hi] = d2 <= thresh
    return out


def pairwise_distances(X: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Full pairwise distance matrix (float32) in row chunks; reusable
    across a grid of DBSCAN eps values."""
    n = X.shape[0]
    sq = (X**2).sum(axis=1)
    out = np.empty((n, n), dtype=np.float32)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (X[lo:hi] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        out[lo:hi] = np.sqrt(d2, dtype=np.float64).astype(np.float32)
    return out
