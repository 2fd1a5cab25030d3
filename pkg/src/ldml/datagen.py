"""Synthetic data generation: inlier mixtures, adversarial attacks and the
removal-plus-addition corruption model used to exercise the base learners.

Also owns the `ldml-v1` on-disk dataset format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .core import ADVERSARY, ConfigError, DataError, DataSet

GAUSSIAN = "gaussian"
STUDENT_T = "student_t"

ATTACK_KINDS = ("adversarial_clusters", "adversarial_line",
                "gaussian_adversary", "uniform_plus_cluster", "none")


@dataclass(frozen=True)
class MixtureSpec:
    """Declarative description of the inlier mixture: k components in d
    dimensions with weights w_i, plus a contamination budget eps.

    Weights and eps are renormalized at construction so they sum to 1
    exactly.  Components are unit-variance per coordinate: standard normal
    or a Student-t rescaled to unit variance.
    """

    means: np.ndarray          # (k, d)
    weights: np.ndarray        # (k,)
    eps: float
    component_kind: str = GAUSSIAN
    df: float = 5.0

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if means.shape[0] != weights.shape[0]:
            raise ConfigError("means and weights must have matching length")
        if np.any(weights <= 0):
            raise ConfigError("all mixture weights must be positive")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")
        if self.component_kind not in (GAUSSIAN, STUDENT_T):
            raise ConfigError(f"unknown component kind {self.component_kind!r}")
        if self.component_kind == STUDENT_T and self.df <= 2:
            raise ConfigError("Student-t df must be > 2 for finite variance")
        total = weights.sum() + self.eps
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights / total)
        object.__setattr__(self, "eps", float(self.eps / total))

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def min_separation(self) -> float:
        """Smallest pairwise distance between component means."""
        if self.k < 2:
            return math.inf
        diff = self.means[:, None, :] - self.means[None, :, :]
        dists = np.linalg.norm(diff, axis=2)
        iu = np.triu_indices(self.k, 1)
        return float(dists[iu].min())


@dataclass(frozen=True)
class AttackSpec:
    """Adversarial contamination placement.

    kind 'adversarial_clusters' places n_fake fake clusters at
    mu_s + v_c + v_j (all offsets of norm offset_norm) around the target
    cluster; 'adversarial_line' places them at mu_s + j*v_c with variance
    inflated along v_c; 'gaussian_adversary' matches the empirical mean and
    covariance of all inliers; 'uniform_plus_cluster' puts one fake cluster
    near the target plus sparse uniform box noise over the affected region.
    """

    kind: str = "none"
    offset_norm: float = 10.0
    n_fake: int = 3
    scale_along_line: float = 5.0
    target: int | str = "smallest"

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ConfigError(f"unknown attack kind {self.kind!r}")
        if self.offset_norm <= 0:
            raise ConfigError("offset_norm must be > 0")
        if self.n_fake < 1:
            raise ConfigError("n_fake must be >= 1")


@dataclass(frozen=True)
class CorruptionSpec:
    """Removal-plus-addition corruption: draw ceil(alpha*n) inliers, let the
    adversary remove floor(w_low^2 * n1) of them, then pad with adversary
    points to exactly n."""

    alpha: float
    w_low: float
    n: int
    adversary: np.ndarray | Callable[[int, np.random.Generator], np.ndarray]
    removal_rule: str = "random"          # "random" | "worst_along_direction"
    direction: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must be in (0, 1]")
        if self.alpha * self.n < 1:
            raise ConfigError("alpha * n must be >= 1")
        if self.removal_rule not in ("random", "worst_along_direction"):
            raise ConfigError(f"unknown removal rule {self.removal_rule!r}")
        if self.removal_rule == "worst_along_direction" and self.direction is None:
            raise ConfigError("worst_along_direction removal needs a direction")


def _component_noise(kind: str, df: float, shape, rng: np.random.Generator) -> np.ndarray:
    if kind == GAUSSIAN:
        return rng.standard_normal(shape)
    # rescale t_df to unit variance
    return rng.standard_t(df, size=shape) / math.sqrt(df / (df - 2.0))


def random_separated_means(k: int, d: int, min_sep: float,
                           rng: np.random.Generator,
                           max_tries: int = 2000) -> np.ndarray:
    """Sample k means uniformly in a box, rejecting until all pairwise
    distances are >= min_sep.  Raises if the box cannot host k such means
    within the attempt budget."""
    if min_sep <= 0:
        raise ConfigError("min_sep must be > 0")
    half = 2.0 * min_sep * max(1.0, k ** (1.0 / d))
    means: list[np.ndarray] = []
    tries = 0
    while len(means) < k:
        cand = rng.uniform(-half, half, size=d)
        if all(np.linalg.norm(cand - m) >= min_sep for m in means):
            means.append(cand)
        else:
            tries += 1
            if tries > max_tries:
                raise DataError(
                    f"could not place {k} means with separation {min_sep} "
                    f"after {max_tries} rejections")
    return np.array(means)


def sample_mixture(spec: MixtureSpec, n: int, rng: np.random.Generator) -> DataSet:
    """Draw n labeled points from the inlier part of the mixture (the eps
    budget is ignored here; see apply_attack)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    probs = spec.weights / spec.weights.sum()
    counts = rng.multinomial(n, probs)
    points = np.empty((n, spec.d))
    labels = np.empty(n, dtype=int)
    pos = 0
    for i, c in enumerate(counts):
        if c == 0:
            continue
        noise = _component_noise(spec.component_kind, spec.df, (c, spec.d), rng)
        points[pos:pos + c] = spec.means[i] + noise
        labels[pos:pos + c] = i
        pos += c
    return DataSet(points, labels)


def _resolve_target(spec: MixtureSpec, attack: AttackSpec) -> int:
    if attack.target == "smallest":
        return int(np.argmin(spec.weights))  # argmin takes lowest index on ties
    s = int(attack.target)
    if not 0 <= s < spec.k:
        raise ConfigError(f"attack target {s} out of range for k={spec.k}")
    return s


def _random_direction(d: int, norm: float, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v) * norm


def _adversary_budget(n_inliers: int, eps: float) -> int:
    """The unique n_adv with n_adv = ceil(eps * (n_inliers + n_adv)), i.e.
    adversary points are exactly a ceil(eps * n_total) share of the final
    set."""
    if eps == 0:
        return 0
    return math.ceil(eps * n_inliers / (1.0 - eps))


def _split_counts(total: int, groups: int) -> list[int]:
    # equal split, remainder goes to the last group
    base = total // groups
    counts = [base] * groups
    counts[-1] += total - base * groups
    return counts


def apply_attack(inliers: DataSet, spec: MixtureSpec, attack: AttackSpec,
                 eps: float, rng: np.random.Generator) -> DataSet:
    """Append adversarial points so that they make up an eps fraction of the
    final dataset.  Inlier points and labels are preserved exactly."""
    if not 0.0 <= eps < 1.0:
        raise ConfigError("eps must be in [0, 1)")
    if inliers.labels is None:
        raise DataError("apply_attack requires labeled inliers")
    if attack.kind == "none" or eps == 0.0:
        return inliers

    n_in = inliers.n
    d = inliers.dim
    n_adv = _adversary_budget(n_in, eps)
    if n_adv == 0:
        return inliers
    s = _resolve_target(spec, attack)
    mu_s = spec.means[s]

    if attack.kind == "adversarial_clusters":
        v_c = _random_direction(d, attack.offset_norm, rng)
        groups = _split_counts(n_adv, attack.n_fake)
        parts = []
        for c in groups:
            v_j = _random_direction(d, attack.offset_norm, rng)
            noise = _component_noise(spec.component_kind, spec.df, (c, d), rng)
            parts.append(mu_s + v_c + v_j + noise)
        adv = np.vstack(parts)
    elif attack.kind == "adversarial_line":
        v_c = _random_direction(d, attack.offset_norm, rng)
        u = v_c / np.linalg.norm(v_c)
        groups = _split_counts(n_adv, attack.n_fake)
        parts = []
        for j, c in enumerate(groups, start=1):
            noise = _component_noise(spec.component_kind, spec.df, (c, d), rng)
            # inflate variance by scale_along_line in the line direction
            along = noise @ u
            noise = noise + np.outer(along * (math.sqrt(attack.scale_along_line) - 1.0), u)
            parts.append(mu_s + j * v_c + noise)
        adv = np.vstack(parts)
    elif attack.kind == "gaussian_adversary":
        mean = inliers.points.mean(axis=0)
        cov = np.cov(inliers.points, rowvar=False)
        cov = np.atleast_2d(cov) + 1e-9 * np.eye(d)
        chol = np.linalg.cholesky(cov)
        adv = mean + rng.standard_normal((n_adv, d)) @ chol.T
    elif attack.kind == "uniform_plus_cluster":
        # one fake cluster near the target plus uniform box noise at roughly
        # 10% of the density of the affected region
        target_pts = inliers.points[inliers.labels == s]
        n_uniform = max(1, round(0.1 * (len(target_pts) + n_adv)))
        n_uniform = min(n_uniform, n_adv - 1) if n_adv > 1 else 0
        n_cluster = n_adv - n_uniform
        v_c = _random_direction(d, attack.offset_norm, rng)
        noise = _component_noise(spec.component_kind, spec.df, (n_cluster, d), rng)
        fake = mu_s + v_c + noise
        region = np.vstack([target_pts, fake]) if len(target_pts) else fake
        lo, hi = region.min(axis=0), region.max(axis=0)
        uni = rng.uniform(lo, hi, size=(n_uniform, d))
        adv = np.vstack([fake, uni])
    else:  # pragma: no cover - guarded by AttackSpec validation
        raise ConfigError(f"unknown attack kind {attack.kind!r}")

    points = np.vstack([inliers.points, adv])
    labels = np.concatenate([inliers.labels, np.full(n_adv, ADVERSARY)])
    return DataSet(points, labels)


def corrupt_for_mean_estimation(spec: CorruptionSpec,
                                base: Callable[[int, np.random.Generator], np.ndarray],
                                rng: np.random.Generator,
                                base_mean: np.ndarray | None = None) -> DataSet:
    """Realize the removal-plus-addition corruption model.

    `base(n, rng)` draws i.i.d. inliers; `base_mean` anchors the
    worst-along-direction removal rule (defaults to the empirical mean).
    Labels: 0 for surviving inliers, ADVERSARY for added points.
    """
    n1 = math.ceil(spec.alpha * spec.n)
    inliers = np.atleast_2d(base(n1, rng))
    n_removed = math.floor(spec.w_low**2 * n1)
    if n_removed > 0:
        if spec.removal_rule == "worst_along_direction":
            v = np.asarray(spec.direction, dtype=float)
            v = v / np.linalg.norm(v)
            mu = inliers.mean(axis=0) if base_mean is None else np.asarray(base_mean, float)
            proj = (inliers - mu) @ v
            keep = np.argsort(proj, kind="stable")[: n1 - n_removed]
            keep.sort()
        else:
            keep = rng.permutation(n1)[: n1 - n_removed]
            keep.sort()
        inliers = inliers[keep]
    n2 = len(inliers)
    n_adv = spec.n - n2
    if n_adv > 0:
        if callable(spec.adversary):
            adv = np.atleast_2d(spec.adversary(n_adv, rng))
        else:
            cloud = np.atleast_2d(np.asarray(spec.adversary, dtype=float))
            idx = rng.integers(0, len(cloud), size=n_adv)
            adv = cloud[idx]
        if adv.shape != (n_adv, inliers.shape[1]):
            raise DataError("adversary generator returned wrong shape")
        points = np.vstack([inliers, adv])
        labels = np.concatenate([np.zeros(n2, dtype=int), np.full(n_adv, ADVERSARY)])
    else:
        points = inliers
        labels = np.zeros(n2, dtype=int)
    return DataSet(points, labels)


# ---------------------------------------------------------------------------
# ldml-v1 dataset file format
# ---------------------------------------------------------------------------

def write_dataset(ds: DataSet, path: str | Path) -> None:
    """Write the `ldml-v1` text format: a header line
    `ldml-v1 <n> <d> <has_labels>` followed by one line per point with d
    floats at 17 significant digits (plus a trailing integer label when
    labeled).  Round-trips bit-identically."""
    path = Path(path)
    has_labels = 1 if ds.labels is not None else 0
    lines = [f"ldml-v1 {ds.n} {ds.dim} {has_labels}"]
    for i in range(ds.n):
        row = " ".join(f"{x:.17g}" for x in ds.points[i])
        if has_labels:
            row += f" {ds.labels[i]}"
        lines.append(row)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write dataset to {path}: {exc}") from exc


def read_dataset(path: str | Path) -> DataSet:
    """Read an `ldml-v1` dataset written by write_dataset."""
    path = Path(path)
    try:
        fh = path.open()
    except OSError as exc:
        raise DataError(f"cannot read dataset from {path}: {exc}") from exc
    with fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "ldml-v1":
            raise DataError(f"{path}: not an ldml-v1 file")
        n, d, has_labels = int(header[1]), int(header[2]), int(header[3])
        points = np.empty((n, d))
        labels = np.empty(n, dtype=int) if has_labels else None
        for i in range(n):
            parts = fh.readline().split()
            if len(parts) != d + has_labels:
                raise DataError(f"{path}: row {i} has {len(parts)} fields, expected {d + has_labels}")
            points[i] = [float(x) for x in parts[:d]]
            if has_labels:
                labels[i] = int(parts[d])
    return DataSet(points, labels)
