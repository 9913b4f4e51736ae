"""Command-line entry point: generate / train / wls / report subcommands.

Every file-producing run writes a manifest.json next to its outputs with the
resolved configuration, seeds, and package version; `--manifest` re-runs a
command from such a file and reproduces the outputs byte for byte. All
randomness flows from one --seed through named substreams, so no subcommand
depends on global RNG state.

Exit codes: 0 success, 2 configuration/input errors, 3 training aborts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .dataset import (
    DatasetError,
    NoiseSpec,
    add_noise,
    generate_outage_trajectory,
    generate_steady_state,
    load_dataset,
    save_dataset,
)
from .grid import GridModel, GridModelError, load_case, load_case14
from .loss import Regime
from .power_flow import PowerFlowError
from .training import (
    ExperimentConfig,
    RegimeReport,
    TrainingError,
    compare_regimes,
    derive_seed,
    fold_split_seed,
    report_text,
)
from .wls import WLSError, save_wls_estimates, save_wls_stats, wls_batch

_STREAM_DATA = 404
_STREAM_NOISE = 505

# Table I-shaped defaults for the generate subcommand
SCENARIO_DEFAULTS = {
    "steady": {"n": 192, "noise": 0.01},
    "outage": {"n": 2000, "noise": 0.001},
}

_TRAIN_FLAG_DEFAULTS = {
    "epochs": 1000,
    "batch": 16,
    "k_folds": 5,
    "period": 100,
    "lr": 1e-3,
    "hidden": 32,
    "seed": 1,
    "regimes": "all",
}


def _load_grid(case: str | None) -> GridModel:
    return load_case(case) if case else load_case14()


def _write_manifest(path: Path, payload: dict) -> None:
    body = json.dumps({"artifact_version": __version__, **payload},
                      indent=2, sort_keys=True) + "\n"
    path.write_text(body, encoding="utf-8")


def _read_manifest(path: str, command: str) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("command") != command:
        raise ValueError(
            f"manifest {path} is for {data.get('command')!r}, not {command!r}"
        )
    return data


def _parse_regimes(text: str) -> tuple[Regime, ...]:
    if text.strip().lower() == "all":
        return tuple(Regime)
    return tuple(Regime.from_label(part) for part in text.split(","))


def cmd_generate(args) -> int:
    if args.manifest:
        stored = _read_manifest(args.manifest, "generate")
        for name in ("scenario", "n", "seed", "noise_p", "noise_q", "no_noise", "case"):
            setattr(args, name, stored[name])
        if args.out is None:
            args.out = stored["out"]
    defaults = SCENARIO_DEFAULTS[args.scenario]
    n = args.n if args.n is not None else defaults["n"]
    noise_p = args.noise_p if args.noise_p is not None else defaults["noise"]
    noise_q = args.noise_q if args.noise_q is not None else defaults["noise"]
    out = Path(args.out if args.out is not None else f"{args.scenario}.csv")

    grid = _load_grid(args.case)
    data_seed = derive_seed(args.seed, _STREAM_DATA)
    if args.scenario == "steady":
        ds = generate_steady_state(grid, n=n, seed=data_seed)
    else:
        ds = generate_outage_trajectory(grid, n=n, seed=data_seed)
    if not args.no_noise:
        ds = add_noise(ds, NoiseSpec(p_sigma_rel=noise_p, q_sigma_rel=noise_q,
                                     seed=derive_seed(args.seed, _STREAM_NOISE)))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    _write_manifest(out.parent / "manifest.json", {
        "command": "generate",
        "scenario": args.scenario,
        "n": n,
        "seed": args.seed,
        "noise_p": noise_p,
        "noise_q": noise_q,
        "no_noise": bool(args.no_noise),
        "case": args.case,
        "out": out.name,
    })
    noise_text = ("none" if args.no_noise
                  else f"relative sigma p={noise_p:g}, q={noise_q:g}")
    print(f"wrote {out} ({len(ds)} samples, all power flows converged)")
    print(f"scenario: {args.scenario}; noise: {noise_text}; seed: {args.seed}")
    return 0


def _train_config_from_flags(args) -> ExperimentConfig:
    return ExperimentConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        k_folds=args.k_folds,
        period=args.period,
        learning_rate=args.lr,
        hidden=args.hidden,
        master_seed=args.seed,
        regimes=_parse_regimes(args.regimes),
    )


def cmd_train(args) -> int:
    if args.manifest:
        overridden = [name for name, default in _TRAIN_FLAG_DEFAULTS.items()
                      if getattr(args, name) != default]
        if overridden:
            raise ValueError(
                "--manifest replaces the config flags; drop: "
                + ", ".join(f"--{n.replace('_', '-')}" for n in overridden)
            )
        stored = _read_manifest(args.manifest, "train")
        cfg = ExperimentConfig.from_dict(stored["config"])
        dataset_path = args.dataset or stored["dataset"]
        case = stored["case"]
    else:
        if not args.dataset:
            raise ValueError("--dataset is required (or use --manifest)")
        cfg = _train_config_from_flags(args)
        dataset_path = args.dataset
        case = args.case
    ds = load_dataset(dataset_path)
    grid = _load_grid(case)
    if ds.n_buses != grid.n:
        raise ValueError(
            f"dataset has {ds.n_buses} buses but the grid has {grid.n}"
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = compare_regimes(cfg, grid, ds, out_dir=out_dir,
                            n_jobs=args.parallel_folds)
    _write_manifest(out_dir / "manifest.json", {
        "command": "train",
        "config": cfg.to_dict(),
        "dataset": str(dataset_path),
        "case": case,
        "seeds": {"master_seed": cfg.master_seed,
                  "fold_split_seed": fold_split_seed(cfg)},
    })
    print(report_text(table), end="")
    print(f"\nreport.json, report.txt, curves and checkpoints in {out_dir}")
    return 0


def cmd_wls(args) -> int:
    ds = load_dataset(args.dataset)
    grid = _load_grid(args.case)
    result = wls_batch(grid, ds, tol=args.tol, max_iter=args.max_iter)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stats_out = Path(args.stats_out) if args.stats_out else out.with_name(
        out.stem + "_stats.csv")
    save_wls_estimates(out, result)
    save_wls_stats(stats_out, result)
    _write_manifest(out.parent / "manifest.json", {
        "command": "wls",
        "dataset": str(args.dataset),
        "case": args.case,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "out": out.name,
        "stats_out": stats_out.name,
    })
    summary = result.error_summary()
    print(f"wrote {out} and {stats_out}")
    for key in ("n_samples", "n_failed", "mean_mag_mae", "max_mag_mae",
                "mean_ang_mae", "max_ang_mae"):
        print(f"{key}: {summary[key]:.6g}" if isinstance(summary[key], float)
              else f"{key}: {summary[key]}")
    return 0


def cmd_report(args) -> int:
    payload = json.loads(Path(args.report).read_text(encoding="utf-8"))
    table = []
    for row in payload["regimes"]:
        table.append(RegimeReport(
            regime=Regime.from_label(row["regime"]),
            cv_error=row["cv_error"],
            fold_std=row["fold_std"],
            avg_best_epoch=row["avg_best_epoch"],
            folds=(),
            normalized_error=row["normalized_error"],
            normalized_std=row["normalized_std"],
            normalized_epoch=row["normalized_epoch"],
        ))
    text = report_text(table)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pinnse",
        description="State estimation experiments on the 14-bus system: "
                    "dataset generation, physics-weighted training, WLS "
                    "baseline, and report rendering.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    gen = sub.add_parser("generate", formatter_class=fmt,
                         help="generate a dataset CSV + JSON sidecar")
    gen.add_argument("--scenario", choices=("steady", "outage"), default="steady",
                     help="operating scenario")
    gen.add_argument("--n", type=int, default=None,
                     help="sample count (default: 192 steady, 2000 outage)")
    gen.add_argument("--seed", type=int, default=7, help="master seed")
    gen.add_argument("--noise-p", type=float, default=None, dest="noise_p",
                     help="relative sigma on P (default: 0.01 steady, 0.001 outage)")
    gen.add_argument("--noise-q", type=float, default=None, dest="noise_q",
                     help="relative sigma on Q (default: 0.01 steady, 0.001 outage)")
    gen.add_argument("--no-noise", action="store_true", help="skip measurement noise")
    gen.add_argument("--case", default=None,
                     help="case file path (default: bundled 14-bus case)")
    gen.add_argument("--out", default=None,
                     help="output CSV path (default: <scenario>.csv)")
    gen.add_argument("--manifest", default=None,
                     help="re-run from a generate manifest.json")
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", formatter_class=fmt,
                        help="cross-validated training across regimes")
    tr.add_argument("--dataset", default=None, help="dataset CSV from `generate`")
    tr.add_argument("--out-dir", default="results", dest="out_dir",
                    help="directory for reports, curves, checkpoints")
    tr.add_argument("--regimes", default="all",
                    help="comma list (nn,inc10,inc20,inc25,inc33,inc50) or 'all'")
    tr.add_argument("--epochs", type=int, default=1000, help="training epochs")
    tr.add_argument("--batch", type=int, default=16, help="batch size")
    tr.add_argument("--k-folds", type=int, default=5, dest="k_folds",
                    help="cross-validation folds")
    tr.add_argument("--period", type=int, default=100,
                    help="epochs between lambda steps")
    tr.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    tr.add_argument("--hidden", type=int, default=32, help="hidden layer width")
    tr.add_argument("--seed", type=int, default=1, help="master seed")
    tr.add_argument("--case", default=None,
                    help="case file path (default: bundled 14-bus case)")
    tr.add_argument("--parallel-folds", type=int, default=1, dest="parallel_folds",
                    help="train up to this many folds concurrently")
    tr.add_argument("--manifest", default=None,
                    help="re-run from a train manifest.json (config flags must "
                         "stay at their defaults)")
    tr.set_defaults(func=cmd_train)

    wls = sub.add_parser("wls", formatter_class=fmt,
                         help="weighted-least-squares baseline over a dataset")
    wls.add_argument("--dataset", required=True, help="dataset CSV from `generate`")
    wls.add_argument("--out", default="wls_estimates.csv",
                     help="per-sample estimates CSV")
    wls.add_argument("--stats-out", default=None, dest="stats_out",
                     help="aggregate statistics CSV (default: <out>_stats.csv)")
    wls.add_argument("--tol", type=float, default=1e-8, help="convergence tolerance")
    wls.add_argument("--max-iter", type=int, default=50, dest="max_iter",
                     help="Gauss-Newton iteration cap")
    wls.add_argument("--case", default=None,
                     help="case file path (default: bundled 14-bus case)")
    wls.set_defaults(func=cmd_wls)

    rep = sub.add_parser("report", formatter_class=fmt,
                         help="render the text table from a report.json")
    rep.add_argument("--report", default="report.json", help="report.json path")
    rep.add_argument("--out", default=None, help="also write the table here")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DatasetError, GridModelError, PowerFlowError, WLSError, ValueError,
            OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
