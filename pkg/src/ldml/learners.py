"""Concrete mean-estimation base learners.

`kld_estimate` is a list-decodable learner: a multifilter that recursively
splits candidate subsets along high-variance one-dimensional projections
until every surviving subset looks like a unit-variance cluster, then emits
subset means.  `rme_estimate` is a robust (majority-inlier) mean estimator
using iterative spectral filtering.  `dense_ball_oracle` is a brute-force
reference recoverer for tests only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ConfigError, DataError, DataSet, Hypothesis, HypothesisList, psi


@dataclass(frozen=True)
class LearnerProfile:
    """Error curves and limits the meta-algorithm assumes of its learners.

    f(alpha) bounds the list-decoding error at inlier fraction alpha;
    g(alpha) bounds the robust-mean error for alpha >= 1 - eps_rme.  Both
    must be non-increasing and well-behaved under halving: f(x/2) <= 4 f(x)
    and g(x - (1-x)^2) <= 4 g(x) on a dyadic grid.
    """

    t: int = 4
    c_f: float = 3.0
    c_g: float = 4.0
    eps_rme: float = 0.05
    c_list: float = 4.0

    def __post_init__(self):
        if self.t < 2 or self.t % 2 != 0:
            raise ConfigError(f"t must be an even integer >= 2, got {self.t}")
        if self.c_f <= 0 or self.c_g <= 0 or self.c_list <= 0:
            raise ConfigError("curve constants must be > 0")
        if not 0.01 <= self.eps_rme < 0.5:
            raise ConfigError(f"eps_rme must be in [0.01, 0.5), got {self.eps_rme}")
        for x in [2.0**-i for i in range(1, 11)]:
            if self.f(x / 2) > 4.0 * self.f(x) + 1e-12:
                raise ConfigError(f"f is not well-behaved at x={x}")
            a = 1.0 - x
            if self.g(a) > 0 and self.g(max(a - x * x, 0.5)) > 4.0 * self.g(a) + 1e-12:
                raise ConfigError(f"g is not well-behaved at alpha={a}")

    def f(self, alpha: float) -> float:
        return self.c_f * psi(self.t, alpha)

    def g(self, alpha: float) -> float:
        if not 0.0 < alpha <= 1.0:
            raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
        if alpha == 1.0:
            return 0.0
        return self.c_g * (1.0 - alpha) * math.sqrt(math.log(1.0 / (1.0 - alpha)))

    def list_cap(self, alpha: float) -> int:
        return math.ceil(self.c_list / alpha)


@dataclass(frozen=True)
class KldConfig:
    profile: LearnerProfile = LearnerProfile()
    n_directions: int = 10
    max_rounds: int = 20
    variance_threshold_mult: float = 2.0
    cluster_conc_threshold: float = 0.5
    node_budget: int = 200

    def __post_init__(self):
        for name in ("n_directions", "max_rounds", "variance_threshold_mult",
                     "cluster_conc_threshold", "node_budget"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")


def power_iteration(points: np.ndarray, rng: np.random.Generator,
                    iters: int = 50) -> np.ndarray:
    """Unit vector approximating the top eigenvector of the covariance of
    `points` (computed around their mean, ddof=0)."""
    centered = points - points.mean(axis=0)
    d = centered.shape[1]
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = centered.T @ (centered @ v) / len(centered)
        nw = np.linalg.norm(w)
        if nw < 1e-30:
            return v
        v = w / nw
    return v


def _dense_windows(proj: np.ndarray, half_width: float, min_count: int) -> list[np.ndarray]:
    """Indices (into proj) of overlapping windows of width 2*half_width
    holding >= min_count points, greedily by count with window starts kept
    >= half_width apart."""
    order = np.argsort(proj, kind="stable")
    p = proj[order]
    n = len(p)
    counts = np.searchsorted(p, p + 2.0 * half_width, side="right") - np.arange(n)
    cand = [i for i in range(n) if counts[i] >= min_count]
    cand.sort(key=lambda i: (-counts[i], p[i]))
    picked_starts: list[float] = []
    out = []
    for i in cand:
        if any(abs(p[i] - s) < half_width for s in picked_starts):
            continue
        picked_starts.append(p[i])
        j = i + counts[i]
        out.append(order[i:j])
    return out


def kld_estimate(S: DataSet, alpha: float, cfg: KldConfig,
                 rng: np.random.Generator) -> HypothesisList:
    """List-decodable mean estimation via recursive multifiltering.

    Maintains a stack of candidate subsets starting from all of S.  A
    subset whose projected variance stays below the threshold along the
    top-variance direction and random probes is emitted as a hypothesis;
    otherwise it is split into overlapping dense windows along the most
    violating direction.  Returns at most min(ceil(c_list/alpha), |S|)
    hypotheses, possibly none.
    """
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    if S.n < 1.0 / alpha:
        raise DataError(f"need at least 1/alpha = {1.0 / alpha:.1f} samples, got {S.n}")
    X = S.points
    n0, d = X.shape
    half_width = max(3.0, psi(cfg.profile.t, alpha))
    min_count = max(1, math.ceil(alpha * cfg.cluster_conc_threshold * n0))
    stack: list[tuple[np.ndarray, int]] = [(np.arange(n0), 0)]
    emitted: list[tuple[np.ndarray, int]] = []   # (mean, support size)
    seen: set[bytes] = set()
    nodes = 0
    while stack and nodes < cfg.node_budget:
        idx, depth = stack.pop()
        nodes += 1
        pts = X[idx]
        if len(idx) == 1:
            mean = pts[0]
            key = mean.tobytes()
            if key not in seen:
                seen.add(key)
                emitted.append((mean, 1))
            continue
        dirs = [power_iteration(pts, rng)]
        probes = rng.standard_normal((cfg.n_directions, d))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        dirs.extend(probes)
        mean = pts.mean(axis=0)
        # the top eigenvalue of a clean unit-covariance sample concentrates
        # around (1 + sqrt(d/m))^2, so the adversarially chosen direction
        # gets that allowance; fixed random probes do not
        top_allow = cfg.variance_threshold_mult * (1.0 + math.sqrt(d / len(idx))) ** 2
        worst_ratio, worst_var, worst_dir = -1.0, -1.0, dirs[0]
        for di, v in enumerate(dirs):
            var = float(np.mean(((pts - mean) @ v) ** 2))
            allow = top_allow if di == 0 else cfg.variance_threshold_mult
            if var / allow > worst_ratio:
                worst_ratio, worst_var, worst_dir = var / allow, var, v
        if worst_ratio <= 1.0:
            support = len(idx)
            if support < n0:
                # slab-shaped subsets clip cluster tails; recentering on the
                # local dense ball recovers the full cluster mass (skipped
                # when the subset is everything, keeping the clean case an
                # exact sample mean); at very small alpha the tail radius
                # exceeds the bulk and the ball must widen with it
                r2 = (math.sqrt(d) + max(1.0, half_width - 2.6)) ** 2
                for _ in range(8):
                    ball = ((X - mean) ** 2).sum(axis=1) <= r2
                    if not ball.any():
                        break
                    new_mean = X[ball].mean(axis=0)
                    support = int(ball.sum())
                    if np.array_equal(new_mean, mean):
                        break
                    mean = new_mean
            key = mean.tobytes()
            if key not in seen:
                seen.add(key)
                emitted.append((mean, support))
            continue
        if depth >= cfg.max_rounds:
            continue
        proj = (pts - mean) @ worst_dir
        for win in _dense_windows(proj, half_width, min_count):
            if len(win) == len(idx):
                # window swallowed the whole subset; trim the farthest 5%
                # along this direction to guarantee progress
                k = max(1, len(idx) // 20)
                keep = np.argsort(np.abs(proj), kind="stable")[:-k]
                stack.append((idx[np.sort(keep)], depth + 1))
                break
            stack.append((idx[np.sort(win)], depth + 1))
    cap = min(cfg.profile.list_cap(alpha), n0)
    emitted.sort(key=lambda ms: -ms[1])
    hyps = [Hypothesis(m, alpha) for m, _ in emitted[:cap]]
    return HypothesisList(tuple(hyps))


def rme_threshold(d: int, n: int, e: float) -> float:
    """Top-eigenvalue acceptance threshold for the spectral filter at
    contamination level e = 1 - alpha."""
    base = 1.0 + 3.0 * math.sqrt(d / n) + 3.0 * d / n
    if e > 0:
        base += 5.0 * math.e * e * math.log(1.0 / e)
    return base


def rme_estimate(S: DataSet, alpha: float, profile: LearnerProfile,
                 rng: np.random.Generator, max_rounds: int = 60) -> np.ndarray:
    """Robust mean estimation by iterative spectral filtering.

    While the top covariance eigenvalue exceeds the threshold, remove the
    points with the largest squared projection onto the top eigenvector,
    at most 2(1-alpha)n in total, then return the empirical mean.
    """
    if alpha < 1.0 - profile.eps_rme:
        raise ConfigError(
            f"alpha={alpha} below robust-mean regime 1 - eps_rme = {1.0 - profile.eps_rme}")
    if alpha > 1.0:
        raise ConfigError(f"alpha must be <= 1, got {alpha}")
    X = S.points
    n, d = X.shape
    e = 1.0 - alpha
    budget = math.floor(2.0 * e * n)
    per_round = max(1, math.ceil(e * n / 5.0)) if budget > 0 else 0
    removed = 0
    live = np.arange(n)
    thresh = rme_threshold(d, n, e)
    for _ in range(max_rounds):
        pts = X[live]
        v = power_iteration(pts, rng)
        centered = pts - pts.mean(axis=0)
        sq = (centered @ v) ** 2
        if float(sq.mean()) <= thresh or removed >= budget:
            break
        k = min(per_round, budget - removed)
        drop = np.argsort(sq, kind="stable")[-k:]
        keep = np.setdiff1d(np.arange(len(live)), drop)
        live = live[keep]
        removed += k
    return X[live].mean(axis=0)


def boost(learner: Callable[[DataSet, np.random.Generator], HypothesisList],
          r: int, S: DataSet, rng: np.random.Generator) -> HypothesisList:
    """Run the learner on r random equal-size parts of S and concatenate
    the outputs; drives per-component failure probability to 2^-r."""
    if r < 1:
        raise ConfigError(f"r must be >= 1, got {r}")
    if S.n < r:
        raise DataError(f"need at least r={r} samples, got {S.n}")
    perm = rng.permutation(S.n)
    parts = np.array_split(perm, r)
    items: list[Hypothesis] = []
    for part in parts:
        items.extend(learner(S.subset(np.sort(part)), rng))
    return HypothesisList(tuple(items))


def dense_ball_oracle(S: DataSet, alpha: float, radius: float) -> HypothesisList:
    """Brute-force reference: greedily pick sample-centered balls of the
    given radius covering >= alpha*|S| points, removing covered points
    between picks.  O(n^2 d); for tests only."""
    if radius <= 0:
        raise ConfigError(f"radius must be > 0, got {radius}")
    if alpha <= 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    if alpha > 1.0:
        return HypothesisList()
    X = S.points
    n = X.shape[0]
    need = alpha * n
    alive = np.ones(n, dtype=bool)
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= radius * radius
    items = []
    while alive.any():
        counts = (within & alive).sum(axis=1)
        counts[~alive] = -1
        c = int(np.argmax(counts))
        if counts[c] < need:
            break
        items.append(Hypothesis(X[c], alpha))
        alive &= ~within[c]
    return HypothesisList(tuple(items))
