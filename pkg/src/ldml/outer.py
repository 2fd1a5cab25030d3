"""Outer stage: carve the sample set into a small collection of candidate
sets via a two-scale directional-slab process around the hypotheses of a
simple list-decoding pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AlgoConfig, ConfigError, DataError, DataSet, HypothesisList, psi
from .inner import Learners


@dataclass(frozen=True)
class OuterConfig:
    """Resolved slab radii and the shell-size floor for a given run."""

    gamma: float
    gamma_prime: float
    floor: float

    def __post_init__(self):
        if self.gamma <= 0 or self.gamma_prime <= 0:
            raise ConfigError("gamma and gamma_prime must be > 0")


def gamma(cfg: AlgoConfig, profile) -> float:
    return cfg.c_gamma * psi(cfg.t, cfg.w_low**4)


def gamma_prime(cfg: AlgoConfig, profile) -> float:
    a = cfg.w_low / 4.0
    return cfg.c_gammaprime_psi * psi(cfg.t, a) + cfg.c_gammaprime_f * profile.f(a)


def resolve_outer_config(cfg: AlgoConfig, profile, n: int) -> OuterConfig:
    return OuterConfig(
        gamma=gamma(cfg, profile),
        gamma_prime=gamma_prime(cfg, profile),
        floor=cfg.prune_floor_mult * cfg.w_low**4 * n,
    )


@dataclass(frozen=True)
class CandidateSetCollection:
    """Ordered index subsets of the original sample set, each tagged with
    the hypothesis index that spawned it (-1 for the residual set)."""

    sets: tuple[np.ndarray, ...]
    origins: tuple[int, ...]

    def __post_init__(self):
        if len(self.sets) != len(self.origins):
            raise ConfigError("one origin tag per candidate set required")
        for s in self.sets:
            if len(s) == 0:
                raise DataError("candidate sets must be non-empty")

    def __len__(self):
        return len(self.sets)


def shells(i: int, means: np.ndarray, live_mask: np.ndarray, X: np.ndarray,
           ocfg: OuterConfig) -> tuple[np.ndarray, np.ndarray]:
    """Boolean membership of the inner and outer shell of hypothesis i over
    the currently surviving points (live_mask indexes the original X).

    Slabs are taken against every other hypothesis, retired or not; the
    outer radius is three times the inner one, so S1 is always nested in
    S2."""
    r1 = ocfg.gamma + ocfg.gamma_prime
    s1 = live_mask.copy()
    s2 = live_mask.copy()
    mu = means[i]
    for j in range(len(means)):
        if j == i:
            continue
        diff = mu - means[j]
        nd = np.linalg.norm(diff)
        if nd == 0.0:
            continue
        proj = np.abs((X - mu) @ (diff / nd))
        s1 &= proj <= r1
        s2 &= proj <= 3.0 * r1
    return s1, s2


def outer_stage(S: DataSet, learners: Learners, cfg: AlgoConfig,
                rng: np.random.Generator) -> CandidateSetCollection:
    """Carve S into candidate sets.

    Runs the list-decodable learner at alpha = w_low, then repeatedly:
    computes each live hypothesis' nested shells over the remaining
    points, drops hypotheses whose inner shell is below the floor, and if
    some live hypothesis has |S2| <= 2 |S1| picks the one with the largest
    inner shell (ties: lowest index), emits its outer shell and removes
    the inner shell from S.  Otherwise the remaining points are emitted as
    one residual set.  With no usable hypotheses at all, the whole of S is
    the single candidate set.
    """
    if S.n < 1.0 / cfg.w_low:
        raise DataError(f"need at least 1/w_low = {1.0 / cfg.w_low:.1f} samples, got {S.n}")
    X = S.points
    n = X.shape[0]
    ocfg = resolve_outer_config(cfg, learners.profile, n)
    M = learners.kld(S, cfg.w_low, rng)
    # de-duplicate coincident hypotheses so slab directions are defined
    uniq: list[np.ndarray] = []
    seen: set[bytes] = set()
    for h in M:
        key = h.mean.tobytes()
        if key not in seen:
            seen.add(key)
            uniq.append(h.mean)
    if not uniq:
        return CandidateSetCollection((np.arange(n),), (-1,))
    means = np.array(uniq)
    live = list(range(len(means)))
    remaining = np.ones(n, dtype=bool)
    sets: list[np.ndarray] = []
    origins: list[int] = []
    while live:
        shell_pairs = {i: shells(i, means, remaining, X, ocfg) for i in live}
        live = [i for i in live if shell_pairs[i][0].sum() > ocfg.floor]
        if not live:
            break
        small = [i for i in live
                 if shell_pairs[i][1].sum() <= 2 * shell_pairs[i][0].sum()]
        if small:
            pick = max(small, key=lambda i: (shell_pairs[i][0].sum(), -i))
            s1, s2 = shell_pairs[pick]
            sets.append(np.flatnonzero(s2))
            origins.append(pick)
            remaining &= ~s1
            live.remove(pick)
        else:
            if remaining.any():
                sets.append(np.flatnonzero(remaining))
                origins.append(-1)
            break
    if not sets:
        sets.append(np.arange(n))
        origins.append(-1)
    return CandidateSetCollection(tuple(sets), tuple(origins))
