"""Flat key=value config files (`ldml-config-v1`) and their translation
into experiment specifications.

Schema (all keys optional unless noted; `;` separates list entries):

  ldml-config-v1            first line, exactly
  name                      free-form label
  k, d, n                   mixture size (required)
  eps                       contamination fraction (required)
  w_low                     inlier-weight floor (required)
  t                         moment order, even (default 4)
  weights                   k entries, e.g. 0.3;0.25;...
  min_sep                   mean separation (required unless means given)
  means_seed                seed for mean placement (default 0)
  component                 gaussian | student_t (default gaussian)
  df                        Student-t degrees of freedom (default 5)
  attacks                   attack kinds, e.g. adversarial_clusters;none
  attack_target             smallest | integer index
  offset_norm, n_fake, scale_along_line   attack geometry
  seeds                     seed count (default 10)
  base_seed                 data-generation seed (default 0)
  shared_dataset            0|1, one dataset for all seeds (default 1)
  record_runtime            0|1 (default 1; 0 for byte-stable CSVs)
  use_rme                   0|1 refinement stage (default 1)
  metric_mode               fix_list_size | fix_error
  metric_value              budget or threshold for the mode
  algorithms                subset of ours;vanilla_ldme;kmeans;robust_kmeans;dbscan
  ours_wlow                 w_low grid for ours/vanilla (defaults to w_low)
  kmeans_k                  k grid for kmeans
  robust_kmeans_k           k grid for robust kmeans
  robust_kmeans_blocks      median-of-means block count (default 10)
  dbscan_eps                lo:hi:count linear grid
  dbscan_min_pts            density threshold
  c_beta, c_tau_psi, c_tau_f, c_gamma, c_gammaprime_psi, c_gammaprime_f,
  list_filter_frac, prune_floor_mult, boost_rounds      meta-algorithm constants
  c_f, c_g, eps_rme, c_list                             learner error curves
  n_directions, max_rounds, variance_threshold_mult,
  cluster_conc_threshold, node_budget                   multifilter knobs
"""

from __future__ import annotations

from pathlib import Path

from .bench import AlgorithmGrid, ExperimentSpec, MetricMode
from .core import ConfigError, rng_stream
from .datagen import AttackSpec, MixtureSpec, random_separated_means

CONFIG_MAGIC = "ldml-config-v1"

_ALGO_KEYS = ("c_beta", "c_tau_psi", "c_tau_f", "c_gamma", "c_gammaprime_psi",
              "c_gammaprime_f", "list_filter_frac", "prune_floor_mult",
              "boost_rounds")
_PROFILE_KEYS = ("c_f", "c_g", "eps_rme", "c_list")
_KLD_KEYS = ("n_directions", "max_rounds", "variance_threshold_mult",
             "cluster_conc_threshold", "node_budget")
_INT_KEYS = {"k", "d", "n", "t", "n_fake", "seeds", "base_seed", "means_seed",
             "robust_kmeans_blocks", "dbscan_min_pts", "boost_rounds",
             "n_directions", "max_rounds", "node_budget"}


def load_config(path: str | Path) -> dict:
    """Parse a config file into a flat dict of strings/numbers.  Blank
    lines and '#' comments are ignored."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    stripped = [ln.strip() for ln in lines]
    body = [ln for ln in stripped if ln and not ln.startswith("#")]
    if not body or body[0] != CONFIG_MAGIC:
        raise ConfigError(f"{path}: first non-comment line must be {CONFIG_MAGIC!r}")
    out: dict = {}
    for ln in body[1:]:
        if "=" not in ln:
            raise ConfigError(f"{path}: expected key=value, got {ln!r}")
        key, _, val = ln.partition("=")
        key, val = key.strip(), val.strip()
        if not key:
            raise ConfigError(f"{path}: empty key in {ln!r}")
        out[key] = _coerce(key, val)
    return out


def _coerce(key: str, val: str):
    if key in _INT_KEYS:
        try:
            return int(val)
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {val!r}") from exc
    try:
        return float(val)
    except ValueError:
        return val


def _floats(val, key: str) -> list[float]:
    if isinstance(val, (int, float)):
        return [float(val)]
    try:
        return [float(x) for x in str(val).split(";") if x != ""]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected ;-separated numbers, got {val!r}") from exc


def _ints(val, key: str) -> list[int]:
    return [int(x) for x in _floats(val, key)]


def _strs(val) -> list[str]:
    return [x.strip() for x in str(val).split(";") if x.strip()]


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required config key {key!r}")
    return cfg[key]


def build_specs(cfg: dict) -> list[tuple[str, ExperimentSpec]]:
    """One (attack_kind, ExperimentSpec) pair per configured attack."""
    k = int(_require(cfg, "k"))
    d = int(_require(cfg, "d"))
    n = int(_require(cfg, "n"))
    eps = float(_require(cfg, "eps"))
    w_low = float(_require(cfg, "w_low"))
    t = int(cfg.get("t", 4))
    weights = _floats(_require(cfg, "weights"), "weights")
    if len(weights) != k:
        raise ConfigError(f"weights has {len(weights)} entries, expected k={k}")
    min_sep = float(_require(cfg, "min_sep"))
    means_rng = rng_stream(int(cfg.get("means_seed", 0)), "means")
    means = random_separated_means(k, d, min_sep, means_rng)
    mixture = MixtureSpec(means=means, weights=weights, eps=eps,
                          component_kind=str(cfg.get("component", "gaussian")),
                          df=float(cfg.get("df", 5.0)))
    target = cfg.get("attack_target", "smallest")
    if isinstance(target, float):
        target = int(target)
    attack_common = dict(
        offset_norm=float(cfg.get("offset_norm", 10.0)),
        n_fake=int(cfg.get("n_fake", 3)),
        scale_along_line=float(cfg.get("scale_along_line", 5.0)),
        target=target,
    )
    attacks = _strs(cfg.get("attacks", "none"))

    wlow_grid = _floats(cfg.get("ours_wlow", w_low), "ours_wlow")
    algorithms = []
    for name in _strs(cfg.get("algorithms", "ours;vanilla_ldme")):
        if name in ("ours", "vanilla_ldme"):
            grid = tuple({"w_low": w} for w in wlow_grid)
        elif name == "kmeans":
            grid = tuple({"k": kk} for kk in _ints(_require(cfg, "kmeans_k"), "kmeans_k"))
        elif name == "robust_kmeans":
            blocks = int(cfg.get("robust_kmeans_blocks", 10))
            grid = tuple({"k": kk, "n_blocks": blocks}
                         for kk in _ints(_require(cfg, "robust_kmeans_k"), "robust_kmeans_k"))
        elif name == "dbscan":
            spec_str = str(_require(cfg, "dbscan_eps"))
            try:
                lo, hi, count = spec_str.split(":")
                lo, hi, count = float(lo), float(hi), int(count)
            except ValueError as exc:
                raise ConfigError(f"dbscan_eps must be lo:hi:count, got {spec_str!r}") from exc
            if count < 1 or lo <= 0 or hi < lo:
                raise ConfigError(f"invalid dbscan_eps grid {spec_str!r}")
            step = (hi - lo) / max(1, count - 1)
            min_pts = int(cfg.get("dbscan_min_pts", max(2, round(w_low * n / 4))))
            grid = tuple({"eps_nbr": lo + i * step, "min_pts": min_pts}
                         for i in range(count))
        else:
            raise ConfigError(f"unknown algorithm {name!r}")
        algorithms.append(AlgorithmGrid(name, grid))

    mode = MetricMode(str(cfg.get("metric_mode", "fix_list_size")),
                      float(cfg.get("metric_value", 10)))
    algo_overrides = {key: cfg[key] for key in _ALGO_KEYS if key in cfg}
    if "boost_rounds" in algo_overrides:
        algo_overrides["boost_rounds"] = int(algo_overrides["boost_rounds"])
    profile_overrides = {key: cfg[key] for key in _PROFILE_KEYS if key in cfg}
    kld_overrides = {key: cfg[key] for key in _KLD_KEYS if key in cfg}

    specs = []
    for kind in attacks:
        attack = AttackSpec(kind=kind, **attack_common)
        spec = ExperimentSpec(
            mixture=mixture, attack=attack, n=n, w_low=w_low,
            algorithms=tuple(algorithms), seeds=int(cfg.get("seeds", 10)),
            metric_mode=mode, t=t,
            base_seed=int(cfg.get("base_seed", 0)),
            shared_dataset=bool(int(cfg.get("shared_dataset", 1))),
            record_runtime=bool(int(cfg.get("record_runtime", 1))),
            use_rme=bool(int(cfg.get("use_rme", 1))),
            algo_overrides=algo_overrides,
            profile_overrides=profile_overrides,
            kld_overrides=kld_overrides,
        )
        specs.append((kind, spec))
    return specs


def preset_path(name: str) -> Path:
    p = Path(__file__).parent / "presets" / f"{name}.cfg"
    if not p.exists():
        raise ConfigError(f"unknown preset {name!r}")
    return p
