"""Shared domain types, tail bounds, error metrics and the RNG contract.

Everything in this module is pure: identical inputs (including seeds)
produce identical outputs, and all types are immutable after construction.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

ADVERSARY = -1


class ConfigError(ValueError):
    """Invalid configuration or parameter domain violation."""


class DataError(ValueError):
    """Malformed or inconsistent data."""


def psi(t: int, alpha: float) -> float:
    """Tail radius of a distribution with sub-Gaussian t-th central moments.

    Returns sqrt(t) * (1/alpha)^(1/t) when t <= 2*ln(1/alpha), and
    sqrt(2e * ln(1/alpha)) otherwise.  Natural logarithm throughout.
    Non-increasing in alpha for fixed t.
    """
    if t < 2 or t % 2 != 0:
        raise ConfigError(f"t must be an even integer >= 2, got {t}")
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    log_inv = math.log(1.0 / alpha)
    if t <= 2.0 * log_inv:
        return math.sqrt(t) * (1.0 / alpha) ** (1.0 / t)
    return math.sqrt(2.0 * math.e * log_inv)


def relative_weight(w: float, eps: float, w_low: float) -> float:
    """Effective inlier fraction w / (w + eps + w_low^2) of a cluster of
    weight w inside a candidate set also holding eps contamination."""
    if w_low <= 0:
        raise ConfigError(f"w_low must be positive, got {w_low}")
    if w < w_low:
        raise ConfigError(f"w ({w}) must be >= w_low ({w_low})")
    if eps < 0:
        raise ConfigError(f"eps must be >= 0, got {eps}")
    if w + eps > 1.0 + 1e-12:
        raise ConfigError(f"w + eps must be <= 1, got {w + eps}")
    return w / (w + eps + w_low**2)


@dataclass(frozen=True)
class Hypothesis:
    """A mean estimate paired with the inlier-fraction estimate it was
    produced with."""

    mean: np.ndarray
    alpha_hat: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 1:
            raise DataError("hypothesis mean must be a 1-d vector")
        if not np.all(np.isfinite(mean)):
            raise DataError("hypothesis mean must be finite")
        if not 0.0 < self.alpha_hat <= 1.0:
            raise ConfigError(f"alpha_hat must be in (0, 1], got {self.alpha_hat}")
        object.__setattr__(self, "mean", mean)


@dataclass(frozen=True)
class HypothesisList:
    items: tuple[Hypothesis, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def means(self) -> np.ndarray:
        """Stack of all hypothesis means, shape (len, d)."""
        return np.array([h.mean for h in self.items])


@dataclass(frozen=True)
class DataSet:
    """n sample points in d dimensions, with optional provenance labels.

    Labels (component index, or ADVERSARY == -1) exist purely for
    evaluation; no estimation algorithm reads them.
    """

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataError(f"points must be a non-empty (n, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DataError("points must contain only finite values")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=int)
            if lab.shape != (pts.shape[0],):
                raise DataError("labels must have one entry per point")
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx: np.ndarray) -> "DataSet":
        lab = None if self.labels is None else self.labels[idx]
        return DataSet(self.points[idx], lab)


@dataclass(frozen=True)
class AlgoConfig:
    """Tunable constants of the full pipeline, defaulting to the values
    used by the pseudocode (10, 40, 4, 4, 160, 16, 0.9, 100)."""

    w_low: float
    t: int = 4
    c_beta: float = 10.0
    c_tau_psi: float = 40.0
    c_tau_f: float = 4.0
    c_gamma: float = 4.0
    c_gammaprime_psi: float = 160.0
    c_gammaprime_f: float = 16.0
    list_filter_frac: float = 0.9
    prune_floor_mult: float = 100.0
    boost_rounds: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.w_low <= 0.5:
            raise ConfigError(f"w_low must be in (0, 1/2], got {self.w_low}")
        if self.t < 2 or self.t % 2 != 0:
            raise ConfigError(f"t must be an even integer >= 2, got {self.t}")
        for name in ("c_beta", "c_tau_psi", "c_tau_f", "c_gamma",
                     "c_gammaprime_psi", "c_gammaprime_f",
                     "list_filter_frac", "prune_floor_mult"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.boost_rounds < 1:
            raise ConfigError("boost_rounds must be >= 1")


@dataclass(frozen=True)
class Metrics:
    list_size: int
    per_cluster_error: tuple[float, ...]
    worst_error: float
    runtime_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "per_cluster_error", tuple(float(x) for x in self.per_cluster_error))


def worst_error(true_means: np.ndarray, hyps: HypothesisList,
                runtime_ms: float = 0.0) -> Metrics:
    """Per-cluster and worst estimation error of a hypothesis list.

    per_cluster_error[i] = min over the list of the Euclidean distance to
    true mean i.  An empty list signals total recovery failure and raises.
    """
    true_means = np.atleast_2d(np.asarray(true_means, dtype=float))
    if len(hyps) == 0:
        raise DataError("empty hypothesis list: no recovery to score")
    est = hyps.means()
    if est.shape[1] != true_means.shape[1]:
        raise DataError("dimension mismatch between true means and hypotheses")
    # (k, m) distance matrix
    dists = np.linalg.norm(true_means[:, None, :] - est[None, :, :], axis=2)
    per_cluster = dists.min(axis=1)
    return Metrics(
        list_size=len(hyps),
        per_cluster_error=tuple(per_cluster),
        worst_error=float(per_cluster.max()),
        runtime_ms=runtime_ms,
    )


def rng_stream(seed: int, stream_label: str) -> np.random.Generator:
    """Deterministic, label-separated random stream.

    Built on the counter-based Philox generator keyed by (seed, SHA-256 of
    the label), so streams with distinct labels behave independently and
    results do not depend on scheduling.
    """
    digest = hashlib.sha256(stream_label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 8], "little") for i in range(0, 32, 8)]
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, words[0]], dtype=np.uint64)
    counter = np.array(words[1:] + [0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
