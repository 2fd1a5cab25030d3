"""Inner stage: agnostic list decoding over a grid of candidate inlier
fractions, slab-based hypothesis pruning, and robust-mean refinement of the
survivors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import AlgoConfig, ConfigError, DataSet, Hypothesis, HypothesisList, psi
from .learners import LearnerProfile, boost

ALPHA_CLAMP = 1.0 / 100.0


@dataclass(frozen=True)
class Learners:
    """The pair of base learners the meta-algorithm is parameterized by,
    plus the profile describing their error curves."""

    profile: LearnerProfile
    kld: Callable[[DataSet, float, np.random.Generator], HypothesisList]
    rme: Callable[[DataSet, float, np.random.Generator], np.ndarray]
    use_rme: bool = True


def beta(alpha: float, profile: LearnerProfile, c_beta: float = 10.0) -> float:
    """Slab half-width c_beta * psi_t(alpha) + f(alpha); non-increasing in
    alpha."""
    return c_beta * psi(profile.t, alpha) + profile.f(alpha)


def tau(alpha: float, profile: LearnerProfile, c_tau_psi: float = 40.0,
        c_tau_f: float = 4.0) -> float:
    """Refinement displacement budget c_tau_psi * psi_t(alpha) + c_tau_f * f(alpha)."""
    return c_tau_psi * psi(profile.t, alpha) + c_tau_f * profile.f(alpha)


@dataclass(frozen=True)
class FilterState:
    """Survivors of list_filter with their retained-sample index sets and
    the pairwise slab directions used."""

    surviving: HypothesisList
    support_sets: tuple[np.ndarray, ...]
    directions: tuple[tuple[int, int, np.ndarray], ...]

    def __post_init__(self):
        if len(self.surviving) != len(self.support_sets):
            raise ConfigError("one support set per survivor required")


def list_filter(S: DataSet, alpha_low: float, M: HypothesisList,
                cfg: AlgoConfig, profile: LearnerProfile) -> FilterState:
    """Prune a hypothesis list down to well-supported, well-separated
    survivors.

    Hypotheses are processed in decreasing alpha_hat (ties: input order).
    A candidate within 4*beta(alpha_hat) of an accepted survivor is
    skipped.  Otherwise its support is the set of samples lying within the
    slab of half-width beta(alpha_hat) around it along every direction to
    an accepted survivor; it is rejected if the support falls below
    list_filter_frac * alpha_hat * n.  Accepting a candidate narrows every
    earlier survivor's support by the new slab; if any survivor drops
    below its own quota, it is discarded for good and the whole filter
    restarts.
    """
    X = S.points
    n = X.shape[0]
    frac = cfg.list_filter_frac
    order = sorted(range(len(M)), key=lambda i: (-M[i].alpha_hat, i))
    dead: set[int] = set()
    restarts = 0
    while True:
        J: list[int] = []
        support: dict[int, np.ndarray] = {}
        restart = False
        for i in order:
            if i in dead:
                continue
            h = M[i]
            b = beta(h.alpha_hat, profile, cfg.c_beta)
            if any(np.linalg.norm(h.mean - M[j].mean) <= 4.0 * b for j in J):
                continue
            mask = np.ones(n, dtype=bool)
            for j in J:
                diff = h.mean - M[j].mean
                nd = np.linalg.norm(diff)
                if nd == 0.0:
                    continue
                v = diff / nd
                mask &= np.abs((X - h.mean) @ v) <= b
            if mask.sum() < frac * h.alpha_hat * n:
                dead.add(i)
                continue
            # narrow earlier survivors by the new slab
            for j in J:
                diff = h.mean - M[j].mean
                nd = np.linalg.norm(diff)
                if nd == 0.0:
                    continue
                v = diff / nd
                support[j] = support[j] & (np.abs((X - M[j].mean) @ v) <= b)
                if support[j].sum() < frac * M[j].alpha_hat * n:
                    dead.add(j)
                    restart = True
            support[i] = mask
            J.append(i)
            if restart:
                break
        if not restart:
            break
        restarts += 1
        if restarts > len(M) + 1:
            raise AssertionError("list_filter failed to terminate")
    dirs = []
    for a in range(len(J)):
        for bb in range(a + 1, len(J)):
            i, j = J[a], J[bb]
            diff = M[i].mean - M[j].mean
            nd = np.linalg.norm(diff)
            if nd > 0:
                dirs.append((i, j, diff / nd))
    return FilterState(
        surviving=HypothesisList(tuple(M[i] for i in J)),
        support_sets=tuple(np.flatnonzero(support[i]) for i in J),
        directions=tuple(dirs),
    )


def _smallest_alpha(profile: LearnerProfile, lo: float, target: float,
                    tol: float = 1e-9) -> float | None:
    """Smallest alpha in [lo, 1] with g(alpha) <= target; g is decreasing
    on the robust-mean range, so bisection applies.  None if no value
    qualifies."""
    if lo > 1.0:
        return None
    if profile.g(lo) <= target:
        return lo
    if profile.g(1.0) > target:
        return None
    hi = 1.0
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if profile.g(mid) <= target:
            b = mid
        else:
            a = mid
    return b


def improve_with_rme(S: DataSet, mu_hat: np.ndarray, tau_val: float,
                     learners: Learners, cfg: AlgoConfig,
                     rng: np.random.Generator) -> np.ndarray:
    """Refine a coarse mean estimate with the robust-mean learner.

    Starting from displacement budget tau, repeatedly run the robust-mean
    estimator with an increasing inlier fraction, accepting each output
    only while it stays within 3/2 of the current budget; the budget then
    shrinks to g(alpha).  Total displacement from mu_hat is at most
    3 * tau.
    """
    if tau_val <= 0:
        raise ConfigError(f"tau must be > 0, got {tau_val}")
    profile = learners.profile
    beta_t = tau_val
    lo = 1.0 - profile.eps_rme
    alpha_t = _smallest_alpha(profile, lo, beta_t / 2.0)
    if alpha_t is None:
        return mu_hat
    mu_t = np.asarray(mu_hat, dtype=float)
    mu_rme = learners.rme(S, alpha_t, rng)
    max_iters = math.ceil(profile.eps_rme / cfg.w_low**2) + 2
    for _ in range(max_iters):
        if np.linalg.norm(mu_t - mu_rme) > 1.5 * beta_t:
            break
        mu_t = mu_rme
        beta_t = profile.g(alpha_t)
        nxt = _smallest_alpha(profile, alpha_t + cfg.w_low**2, beta_t / 2.0)
        if nxt is None:
            break
        alpha_t = nxt
        mu_rme = learners.rme(S, alpha_t, rng)
    return mu_t


def inner_stage(S: DataSet, alpha_low: float, learners: Learners,
                cfg: AlgoConfig, rng: np.random.Generator) -> HypothesisList:
    """Run the list-decodable learner over a geometric-free grid of inlier
    fractions, prune the union with list_filter, and refine survivors with
    the robust-mean learner."""
    if not 0.0 < alpha_low <= 1.0:
        raise ConfigError(f"alpha_low must be in (0, 1], got {alpha_low}")
    a_low = min(ALPHA_CLAMP, alpha_low)
    n = S.n
    m = math.floor(1.0 / (3.0 * a_low))
    grid = [i * a_low for i in range(1, m + 1)]
    # grid values needing more samples than we have degenerate away
    grid = [a for a in grid if n >= 1.0 / a]
    if not grid:
        grid = [1.0]

    def run_kld(data: DataSet, a: float, r: np.random.Generator) -> HypothesisList:
        if cfg.boost_rounds > 1 and data.n >= cfg.boost_rounds:
            return boost(lambda sub, rr: learners.kld(sub, a, rr),
                         cfg.boost_rounds, data, r)
        return learners.kld(data, a, r)

    items: list[Hypothesis] = []
    for a in grid:
        out = run_kld(S, a, rng)
        items.extend(Hypothesis(h.mean, a) for h in out)
    M = HypothesisList(tuple(items))
    state = list_filter(S, a_low, M, cfg, learners.profile)
    if not learners.use_rme:
        return state.surviving
    refined = []
    for h in state.surviving:
        t_val = tau(h.alpha_hat, learners.profile, cfg.c_tau_psi, cfg.c_tau_f)
        mu = improve_with_rme(S, h.mean, t_val, learners, cfg, rng)
        refined.append(Hypothesis(mu, h.alpha_hat))
    return HypothesisList(tuple(refined))
