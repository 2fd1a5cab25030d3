"""Command-line interface.

Subcommands: gen (write a synthetic dataset), run (one algorithm on one
dataset), bench (full experiment sweep to CSV), plot (CSV to SVG).  Exit
codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from . import config as config_mod
from .core import AlgoConfig, ConfigError, DataError, DataSet, worst_error
from .datagen import read_dataset, write_dataset


def _load(args) -> dict:
    if getattr(args, "preset", None):
        return config_mod.load_config(config_mod.preset_path(args.preset))
    if getattr(args, "config", None):
        return config_mod.load_config(args.config)
    raise ConfigError("either --config or --preset is required")


def _pick_spec(specs, attack: str | None):
    if attack is None:
        return specs[0]
    for kind, spec in specs:
        if kind == attack:
            return kind, spec
    raise ConfigError(f"attack {attack!r} not present in config")


def cmd_gen(args) -> int:
    cfg = _load(args)
    specs = config_mod.build_specs(cfg)
    kind, spec = _pick_spec(specs, args.attack)
    if args.seed is not None:
        spec = bench_mod.replace(spec, shared_dataset=False)
    ds = bench_mod.make_dataset(spec, args.seed or 0)
    write_dataset(ds, args.out)
    print(f"wrote {ds.n} points ({ds.dim}-d, attack={kind}) to {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    specs = config_mod.build_specs(cfg)
    kind, spec = _pick_spec(specs, args.attack)
    ds = read_dataset(args.dataset)
    grids = {g.name: g.grid for g in spec.algorithms}
    if args.algo not in grids:
        raise ConfigError(f"algorithm {args.algo!r} not enabled in config")
    params = grids[args.algo][args.grid_index]
    row = bench_mod.run_single(spec, args.algo, params, args.seed, ds)
    print(f"algorithm: {row.algorithm}  params: {row.params}  seed: {row.seed}")
    print(f"list_size: {row.list_size}")
    print(f"worst_error (vs configured means): {row.worst_error:.6g}")
    print("per_cluster_errors: "
          + " ".join(f"{x:.6g}" for x in row.per_cluster_errors))
    print(f"runtime_ms: {row.runtime_ms:.3f}")
    return 0


def cmd_bench(args) -> int:
    cfg = _load(args)
    specs = config_mod.build_specs(cfg)
    workers = args.workers
    out = Path(args.out)
    multi = len(specs) > 1
    for kind, spec in specs:
        report = bench_mod.run_experiment(spec, n_workers=workers)
        path = out if not multi else out.with_name(f"{out.stem}_{kind}{out.suffix}")
        bench_mod.emit_csv(report, path)
        print(f"wrote {len(report.rows)} rows for attack={kind} to {path}")
    return 0


def cmd_plot(args) -> int:
    mode = bench_mod.MetricMode(args.mode, args.value)
    labels = args.labels.split(";") if args.labels else None
    named = []
    for i, csv_path in enumerate(args.csv):
        label = labels[i] if labels and i < len(labels) else Path(csv_path).stem
        named.append((label, bench_mod.read_csv(csv_path, mode)))
    bench_mod.emit_plot(named, mode, args.out)
    print(f"wrote plot to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldml",
                                description="list-decodable mixture learning toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an ldml-v1 dataset from a config")
    g.add_argument("--config")
    g.add_argument("--preset")
    g.add_argument("--attack", help="attack kind to use (default: first configured)")
    g.add_argument("--seed", type=int, help="per-seed dataset instead of the shared one")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    r = sub.add_parser("run", help="run one algorithm on one dataset")
    r.add_argument("--config")
    r.add_argument("--preset")
    r.add_argument("--attack")
    r.add_argument("--algo", required=True, choices=bench_mod.ALGORITHM_NAMES)
    r.add_argument("--dataset", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--grid-index", type=int, default=0,
                   help="index into the algorithm's hyper-parameter grid")
    r.set_defaults(fn=cmd_run)

    b = sub.add_parser("bench", help="run a full experiment sweep to CSV")
    b.add_argument("--config")
    b.add_argument("--preset")
    b.add_argument("--out", required=True)
    b.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: LDML_THREADS env var or 1)")
    b.set_defaults(fn=cmd_bench)

    pl = sub.add_parser("plot", help="render CSV reports as an SVG bar chart")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--out", required=True)
    pl.add_argument("--mode", choices=("fix_list_size", "fix_error"),
                    default="fix_list_size")
    pl.add_argument("--value", type=float, default=10.0,
                    help="list budget or error threshold for the mode")
    pl.add_argument("--labels", help=";-separated group labels")
    pl.set_defaults(fn=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
