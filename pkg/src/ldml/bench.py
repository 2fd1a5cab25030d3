"""Benchmark harness: seed sweeps of the estimator and baselines over
synthetic attacked mixtures, with median/quartile aggregation, CSV rows and
SVG bar charts.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (AlgoConfig, ConfigError, DataError, DataSet, Hypothesis,
                   HypothesisList, Metrics, rng_stream, worst_error)
from .datagen import (ATTACK_KINDS, AttackSpec, MixtureSpec, apply_attack,
                      random_separated_means, sample_mixture)
from .learners import KldConfig, LearnerProfile
from .pipeline import (dbscan, full_algorithm, kmeans, make_default_learners,
                       pairwise_distances, robust_kmeans, vanilla_ldme)

ALGORITHM_NAMES = ("ours", "vanilla_ldme", "kmeans", "robust_kmeans", "dbscan")

CSV_HEADER = "algorithm,params,seed,list_size,worst_error,per_cluster_errors,runtime_ms"


@dataclass(frozen=True)
class MetricMode:
    kind: str                 # "fix_list_size" | "fix_error"
    value: float

    def __post_init__(self):
        if self.kind not in ("fix_list_size", "fix_error"):
            raise ConfigError(f"unknown metric mode {self.kind!r}")


@dataclass(frozen=True)
class AlgorithmGrid:
    name: str
    grid: tuple[dict, ...]     # hyper-parameter points; may be ({},)

    def __post_init__(self):
        if self.name not in ALGORITHM_NAMES:
            raise ConfigError(f"unknown algorithm {self.name!r}")
        if len(self.grid) == 0:
            raise ConfigError(f"empty hyper-parameter grid for {self.name}")


@dataclass(frozen=True)
class ExperimentSpec:
    mixture: MixtureSpec
    attack: AttackSpec
    n: int
    w_low: float
    algorithms: tuple[AlgorithmGrid, ...]
    seeds: int
    metric_mode: MetricMode
    t: int = 4
    base_seed: int = 0
    shared_dataset: bool = True      # one dataset per attack, all seeds
    record_runtime: bool = True
    use_rme: bool = True
    algo_overrides: dict = field(default_factory=dict)   # AlgoConfig fields
    profile_overrides: dict = field(default_factory=dict)  # LearnerProfile fields
    kld_overrides: dict = field(default_factory=dict)    # KldConfig fields

    def __post_init__(self):
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.n < 1:
            raise ConfigError("n must be >= 1")


@dataclass(frozen=True)
class Row:
    algorithm: str
    params: str
    seed: int
    list_size: int
    worst_error: float
    per_cluster_errors: tuple[float, ...]
    runtime_ms: float


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[Row, ...]
    metric_mode: MetricMode


def quantile(values, p: float) -> float:
    """Linear interpolation between order statistics; pinned so plots are
    reproducible."""
    return float(np.quantile(np.asarray(values, dtype=float), p, method="linear"))


def _params_str(params: dict) -> str:
    if not params:
        return "-"
    return " ".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def make_dataset(spec: ExperimentSpec, seed: int) -> DataSet:
    """The attacked dataset for one cell; with shared_dataset the same
    dataset is reused for every seed (and hence every algorithm)."""
    dseed = 0 if spec.shared_dataset else seed
    rng = rng_stream(spec.base_seed, f"data/{spec.attack.kind}/{dseed}")
    n_in = spec.n - math.ceil(spec.mixture.eps * spec.n)
    inliers = sample_mixture(spec.mixture, n_in, rng)
    return apply_attack(inliers, spec.mixture, spec.attack, spec.mixture.eps, rng)


def _make_cfg(spec: ExperimentSpec, params: dict, seed: int) -> tuple[AlgoConfig, LearnerProfile, KldConfig]:
    w_low = float(params.get("w_low", spec.w_low))
    cfg = AlgoConfig(w_low=w_low, t=spec.t, seed=seed,
                     **{k: v for k, v in spec.algo_overrides.items()})
    profile = LearnerProfile(t=spec.t, **spec.profile_overrides)
    kcfg = KldConfig(profile=profile, **spec.kld_overrides)
    return cfg, profile, kcfg


def run_single(spec: ExperimentSpec, algorithm: str, params: dict,
               seed: int, ds: DataSet) -> Row:
    """One (algorithm, hyper-params, seed) cell on a prebuilt dataset."""
    blind = DataSet(ds.points)          # algorithms never see labels
    true_means = spec.mixture.means
    k = spec.mixture.k
    t0 = time.perf_counter()
    if algorithm == "ours":
        cfg, profile, kcfg = _make_cfg(spec, params, seed)
        learners = make_default_learners(cfg, profile, kcfg, use_rme=spec.use_rme)
        hyps = full_algorithm(blind, learners, cfg).list
    elif algorithm == "vanilla_ldme":
        cfg, profile, kcfg = _make_cfg(spec, params, seed)
        learners = make_default_learners(cfg, profile, kcfg, use_rme=spec.use_rme)
        hyps = vanilla_ldme(blind, learners, cfg)
    elif algorithm == "kmeans":
        centers = kmeans(blind, int(params["k"]),
                         rng_stream(seed, f"kmeans/{_params_str(params)}"))
        hyps = HypothesisList(tuple(Hypothesis(c, 1.0) for c in centers))
    elif algorithm == "robust_kmeans":
        centers = robust_kmeans(blind, int(params["k"]),
                                rng_stream(seed, f"robust_kmeans/{_params_str(params)}"),
                                n_blocks=int(params.get("n_blocks", 10)))
        hyps = HypothesisList(tuple(Hypothesis(c, 1.0) for c in centers))
    elif algorithm == "dbscan":
        _, means = dbscan(blind, float(params["eps_nbr"]), int(params["min_pts"]))
        hyps = HypothesisList(tuple(Hypothesis(m, 1.0) for m in means))
    else:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    runtime = (time.perf_counter() - t0) * 1e3 if spec.record_runtime else 0.0
    if len(hyps) == 0:
        metrics = Metrics(0, (math.inf,) * k, math.inf, runtime)
    else:
        metrics = worst_error(true_means, hyps, runtime)
    return Row(algorithm, _params_str(params), seed, metrics.list_size,
               metrics.worst_error, metrics.per_cluster_error, runtime)


def run_experiment(spec: ExperimentSpec, n_workers: int | None = None) -> ExperimentReport:
    """Full seed sweep.  Row order is deterministic (algorithm, params,
    seed) regardless of worker scheduling.  Worker count comes from the
    argument, else the LDML_THREADS env var, else 1."""
    if n_workers is None:
        n_workers = int(os.environ.get("LDML_THREADS", "1"))
    n_workers = max(1, n_workers)
    datasets = {}
    for seed in range(spec.seeds):
        key = 0 if spec.shared_dataset else seed
        if key not in datasets:
            datasets[key] = make_dataset(spec, seed)
    cells = []
    for alg in spec.algorithms:
        for params in alg.grid:
            for seed in range(spec.seeds):
                cells.append((alg.name, params, seed))
    if n_workers == 1:
        rows = [run_single(spec, a, p, s, datasets[0 if spec.shared_dataset else s])
                for a, p, s in cells]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(
                lambda c: run_single(spec, c[0], c[1], c[2],
                                     datasets[0 if spec.shared_dataset else c[2]]),
                cells))
    rows.sort(key=lambda r: (r.algorithm, r.params, r.seed))
    return ExperimentReport(tuple(rows), spec.metric_mode)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Aggregate:
    """Per (algorithm, params) summary under the report's metric mode.

    fix_list_size: median/q25/q75 of worst_error over qualifying runs.
    fix_error: minimal list sizes at which the median/q25/q75 of
    worst_error meet the threshold.  None fields mean "n/a".
    """

    algorithm: str
    params: str
    median: float | None
    q25: float | None
    q75: float | None
    n_rows: int


def _min_size_meeting(rows: list[Row], threshold: float, p: float) -> float | None:
    sizes = sorted({r.list_size for r in rows})
    for L in sizes:
        vals = [r.worst_error for r in rows if r.list_size <= L]
        if vals and quantile(vals, p) <= threshold:
            return float(L)
    return None


def aggregate(report: ExperimentReport) -> list[Aggregate]:
    groups: dict[tuple[str, str], list[Row]] = {}
    for r in report.rows:
        groups.setdefault((r.algorithm, r.params), []).append(r)
    out = []
    mode = report.metric_mode
    for (alg, params), rows in sorted(groups.items()):
        if mode.kind == "fix_list_size":
            vals = [r.worst_error for r in rows
                    if r.list_size <= mode.value and math.isfinite(r.worst_error)]
            if vals:
                agg = Aggregate(alg, params, quantile(vals, 0.5),
                                quantile(vals, 0.25), quantile(vals, 0.75), len(rows))
            else:
                agg = Aggregate(alg, params, None, None, None, len(rows))
        else:
            finite = [r for r in rows if math.isfinite(r.worst_error)]
            agg = Aggregate(alg, params,
                            _min_size_meeting(finite, mode.value, 0.5),
                            _min_size_meeting(finite, mode.value, 0.25),
                            _min_size_meeting(finite, mode.value, 0.75),
                            len(rows))
        out.append(agg)
    return out


def best_aggregate(aggs: list[Aggregate], algorithm: str) -> Aggregate | None:
    """The hyper-parameter point with the lowest median for one algorithm;
    n/a points lose to any finite one."""
    cand = [a for a in aggs if a.algorithm == algorithm]
    if not cand:
        return None
    keyed = sorted(cand, key=lambda a: (a.median is None,
                                        a.median if a.median is not None else 0.0))
    return keyed[0]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def emit_csv(report: ExperimentReport, path: str | Path) -> None:
    """Write report rows; floats at 17 significant digits, byte-stable for
    fixed inputs (disable runtime recording for full byte stability)."""
    path = Path(path)
    lines = [CSV_HEADER]
    for r in report.rows:
        pc = ";".join(f"{x:.17g}" for x in r.per_cluster_errors)
        lines.append(f"{r.algorithm},{r.params},{r.seed},{r.list_size},"
                     f"{r.worst_error:.17g},{pc},{r.runtime_ms:.17g}")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path: str | Path,
             metric_mode: MetricMode | None = None) -> ExperimentReport:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read CSV from {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise DataError(f"{path}: missing or unexpected CSV header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 7:
            raise DataError(f"{path}: malformed row {ln!r}")
        alg, params, seed, ls, we, pc, rt = parts
        per_cluster = tuple(float(x) for x in pc.split(";")) if pc else ()
        rows.append(Row(alg, params, int(seed), int(ls), float(we),
                        per_cluster, float(rt)))
    return ExperimentReport(tuple(rows), metric_mode or MetricMode("fix_list_size", math.inf))


# ---------------------------------------------------------------------------
# Plotting
# ---------------------------------------------------------------------------

def emit_plot(named_reports: list[tuple[str, ExperimentReport]],
              mode: MetricMode, path: str | Path) -> None:
    """Grouped bar chart: one group per report (e.g. attack model), one bar
    per algorithm showing the best-grid median with q25/q75 whiskers; n/a
    values render as hatched unit bars labeled 'n/a'."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if not named_reports or all(len(rep.rows) == 0 for _, rep in named_reports):
        ax.set_title("no data")
        fig.savefig(path, format="svg")
        plt.close(fig)
        return
    algorithms = sorted({r.algorithm for _, rep in named_reports for r in rep.rows})
    group_w = 0.8
    bar_w = group_w / max(1, len(algorithms))
    for gi, (label, rep) in enumerate(named_reports):
        rep = ExperimentReport(rep.rows, mode)
        aggs = aggregate(rep)
        for ai, alg in enumerate(algorithms):
            best = best_aggregate(aggs, alg)
            x = gi - group_w / 2 + (ai + 0.5) * bar_w
            if best is None:
                continue
            if best.median is None:
                ax.bar(x, 1.0, width=bar_w * 0.9, hatch="//", fill=False,
                       edgecolor=f"C{ai}")
                ax.text(x, 1.02, "n/a", ha="center", fontsize=7)
            else:
                lo = best.q25 if best.q25 is not None else best.median
                hi = best.q75 if best.q75 is not None else best.median
                err = [[max(0.0, best.median - lo)], [max(0.0, hi - best.median)]]
                ax.bar(x, best.median, width=bar_w * 0.9, color=f"C{ai}",
                       yerr=err, capsize=3,
                       label=alg if gi == 0 else None)
    ax.set_xticks(range(len(named_reports)))
    ax.set_xticklabels([label for label, _ in named_reports])
    ylabel = ("worst estimation error" if mode.kind == "fix_list_size"
              else "minimal list size")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    except OSError as exc:
        raise DataError(f"cannot write SVG to {path}: {exc}") from exc
    finally:
        plt.close(fig)
