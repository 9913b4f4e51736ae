"""Cross-validated training across loss-weighting regimes, with reports.

Seeds: a master seed feeds numpy SeedSequence spawn keys, one stream per
purpose (fold split / init / shuffle). Init and shuffle streams depend on
the fold index but NOT on the regime, so every regime trains the same fold
layout from the same starting network with the same batch orders; regimes
differ only in the loss weighting. Comparisons between regimes are
therefore paired, and adding or removing a regime never perturbs another's
randomness.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset, PreprocessStats, k_fold_split, preprocess
from .grid import GridModel
from .loss import LambdaSchedule, Regime, schedule_lambdas
from .network import (
    AdamState,
    NonFiniteLossError,
    adam_step,
    backward,
    forward,
    init_mlp,
    save_checkpoint,
)

_STREAM_FOLDS = 101
_STREAM_INIT = 202
_STREAM_SHUFFLE = 303

VALIDATION_METRIC = (
    "100 x mean absolute error between predicted and true targets in the "
    "rescaled [-1, 1] target space, data term only; predictions are the "
    "reconstructed states re-expressed in rescaled space, so features that "
    "are constant on the training folds are read off the reconstruction"
)
FOLD_STD_CONVENTION = "population standard deviation (divide by k) over fold best errors"

ALL_REGIMES = tuple(Regime)


class TrainingError(RuntimeError):
    """Training could not run or aborted mid-fold."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs for one cross-validated regime comparison."""

    epochs: int = 1000
    batch_size: int = 16
    k_folds: int = 5
    period: int = 100
    learning_rate: float = 1e-3
    hidden: int = 32
    master_seed: int = 1
    regimes: tuple[Regime, ...] = ALL_REGIMES

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.epochs < self.period:
            raise ValueError("epochs must cover at least one schedule period")
        if self.batch_size < 1 or self.k_folds < 2:
            raise ValueError("batch_size must be >= 1 and k_folds >= 2")
        if len(self.regimes) != len(set(self.regimes)):
            raise ValueError("duplicate regimes")
        object.__setattr__(self, "regimes", tuple(self.regimes))

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "k_folds": self.k_folds,
            "period": self.period,
            "learning_rate": self.learning_rate,
            "hidden": self.hidden,
            "master_seed": self.master_seed,
            "regimes": [r.label for r in self.regimes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {
            "epochs", "batch_size", "k_folds", "period", "learning_rate",
            "hidden", "master_seed", "regimes",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "regimes" in kwargs:
            kwargs["regimes"] = tuple(Regime.from_label(r) for r in kwargs["regimes"])
        return cls(**kwargs)


def derive_seed(master: int, stream: int, *key: int) -> int:
    """Stable 32-bit seed from (master, stream, extra key parts)."""
    ss = np.random.SeedSequence([master, stream, *key])
    return int(ss.generate_state(1, np.uint32)[0])


def fold_split_seed(cfg: ExperimentConfig) -> int:
    return derive_seed(cfg.master_seed, _STREAM_FOLDS)


@dataclass(frozen=True)
class FoldReport:
    """One fold's validation history and selected model."""

    fold_index: int
    val_error_per_epoch: np.ndarray
    best_epoch: int
    best_val_error: float
    final_model: str | None = None

    def __post_init__(self):
        series = np.asarray(self.val_error_per_epoch, dtype=float)
        series.flags.writeable = False
        object.__setattr__(self, "val_error_per_epoch", series)
        if self.val_error_per_epoch[self.best_epoch] != self.best_val_error:
            raise ValueError("best_val_error must equal the series at best_epoch")

    def summary_dict(self) -> dict:
        return {
            "fold_index": self.fold_index,
            "best_epoch": self.best_epoch,
            "best_val_error": self.best_val_error,
            "final_model": self.final_model,
        }


@dataclass(frozen=True)
class RegimeReport:
    """Aggregates over folds; normalized columns are vs the plain-NN row."""

    regime: Regime
    cv_error: float
    fold_std: float
    avg_best_epoch: float
    folds: tuple[FoldReport, ...]
    normalized_error: float | None = None
    normalized_std: float | None = None
    normalized_epoch: float | None = None

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.label,
            "cv_error": self.cv_error,
            "fold_std": self.fold_std,
            "avg_best_epoch": self.avg_best_epoch,
            "normalized_error": self.normalized_error,
            "normalized_std": self.normalized_std,
            "normalized_epoch": self.normalized_epoch,
            "folds": [f.summary_dict() for f in self.folds],
        }


def regime_slug(regime: Regime) -> str:
    return regime.name.lower()


def validation_error(net, x_val: np.ndarray, t_val: np.ndarray,
                     stats: PreprocessStats) -> float:
    """Percent MAE in rescaled target space; the model-selection metric.

    The prediction scored here is the estimator's output, i.e. the physical
    reconstruction mapped back to rescaled space. For features with a
    training-fold scale that round trip is the identity on the raw network
    output; a constant feature reconstructs to the constant itself, which
    rescales to 0 regardless of what the network emits on that head.
    """
    alpha, _ = stats.target_inverse_coeffs()
    y = np.where(alpha > 0.0, forward(net, x_val), 0.0)
    return float(100.0 * np.abs(y - t_val).mean())


def train_fold(
    cfg: ExperimentConfig,
    grid: GridModel,
    dataset: Dataset,
    fold: tuple[np.ndarray, np.ndarray],
    schedule: LambdaSchedule,
    *,
    fold_index: int = 0,
    out_dir: str | Path | None = None,
) -> FoldReport:
    """Train one fold end to end and pick its best epoch by validation error."""
    train_idx, val_idx = np.asarray(fold[0]), np.asarray(fold[1])
    if train_idx.size < cfg.batch_size:
        raise TrainingError(
            f"fold {fold_index}: batch_size {cfg.batch_size} exceeds "
            f"training-fold size {train_idx.size}"
        )
    tds, stats = preprocess(dataset, train_idx)
    x_all, t_all = tds.inputs(), tds.targets()
    i_all = tds.currents()
    x_tr, t_tr, i_tr = x_all[train_idx], t_all[train_idx], i_all[train_idx]
    x_val, t_val = x_all[val_idx], t_all[val_idx]
    ybus = grid.y_bus

    net = init_mlp(
        dataset.n_buses,
        seed=derive_seed(cfg.master_seed, _STREAM_INIT, fold_index),
        hidden=cfg.hidden,
    )
    adam = AdamState.for_net(net, alpha=cfg.learning_rate)
    shuffle_rng = np.random.default_rng(
        derive_seed(cfg.master_seed, _STREAM_SHUFFLE, fold_index)
    )

    n_tr = train_idx.size
    val_errors = np.empty(cfg.epochs)
    curve_rows = []
    for epoch in range(cfg.epochs):
        lam = schedule_lambdas(schedule, epoch)
        perm = shuffle_rng.permutation(n_tr)
        totals = np.zeros(3)  # total, u_norm, f_norm sums over batches
        n_batches = 0
        for start in range(0, n_tr, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            try:
                parts, grads = backward(net, x_tr[idx], t_tr[idx], i_tr[idx],
                                        stats, ybus, lam)
            except NonFiniteLossError as exc:
                raise TrainingError(
                    f"fold {fold_index} epoch {epoch} batch {n_batches}: {exc}"
                ) from exc
            adam_step(net, adam, grads)
            totals += (parts.total, parts.u_norm, parts.f_norm)
            n_batches += 1
        val_errors[epoch] = validation_error(net, x_val, t_val, stats)
        means = totals / n_batches
        curve_rows.append((epoch, means[0], means[1], means[2], lam[0], lam[1],
                           val_errors[epoch]))

    best_epoch = int(np.argmin(val_errors))
    model_ref = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        slug = regime_slug(schedule.regime)
        model_ref = f"{slug}_fold{fold_index}_model.json"
        save_checkpoint(out_dir / model_ref, net, adam, stats)
        with open(out_dir / f"{slug}_fold{fold_index}_curve.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "u_norm", "f_norm",
                             "lambda1", "lambda2", "val_error"])
            for row in curve_rows:
                writer.writerow([row[0]] + [f"{x:.17g}" for x in row[1:]])
    return FoldReport(
        fold_index=fold_index,
        val_error_per_epoch=val_errors,
        best_epoch=best_epoch,
        best_val_error=float(val_errors[best_epoch]),
        final_model=model_ref,
    )


def cross_validate(
    cfg: ExperimentConfig,
    grid: GridModel,
    dataset: Dataset,
    regime: Regime,
    *,
    out_dir: str | Path | None = None,
    n_jobs: int = 1,
) -> RegimeReport:
    """k folds of train_fold for one regime, aggregated.

    n_jobs > 1 runs folds on a thread pool (each fold is an independent
    model with its own RNG streams); results keep fold-index order, so the
    outputs are identical to a serial run.
    """
    if n_jobs < 1:
        raise ValueError("n_jobs must be at least 1")
    folds = k_fold_split(len(dataset), cfg.k_folds, seed=fold_split_seed(cfg))
    schedule = LambdaSchedule(regime, period=cfg.period)

    def run(j: int) -> FoldReport:
        try:
            return train_fold(cfg, grid, dataset, folds[j], schedule,
                              fold_index=j, out_dir=out_dir)
        except TrainingError:
            raise
        except Exception as exc:
            raise TrainingError(f"{regime.label} fold {j} failed: {exc}") from exc

    if n_jobs == 1:
        reports = [run(j) for j in range(len(folds))]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            reports = list(pool.map(run, range(len(folds))))
    best = np.array([r.best_val_error for r in reports])
    return RegimeReport(
        regime=regime,
        cv_error=float(best.mean()),
        fold_std=float(best.std()),
        avg_best_epoch=float(np.mean([r.best_epoch for r in reports])),
        folds=tuple(reports),
    )


def _normalize(x: float, base: float) -> float | None:
    if base == 0.0:
        return 0.0 if x == base else None
    return 100.0 * (x - base) / base


def compare_regimes(
    cfg: ExperimentConfig,
    grid: GridModel,
    dataset: Dataset,
    *,
    out_dir: str | Path | None = None,
    n_jobs: int = 1,
) -> list[RegimeReport]:
    """One RegimeReport per configured regime, normalized against plain NN."""
    if Regime.PLAIN_NN not in cfg.regimes:
        raise TrainingError("the plain-NN regime is the normalization baseline "
                            "and must be included")
    raw = {r: cross_validate(cfg, grid, dataset, r, out_dir=out_dir, n_jobs=n_jobs)
           for r in cfg.regimes}
    base = raw[Regime.PLAIN_NN]
    table = [
        replace(
            raw[r],
            normalized_error=_normalize(raw[r].cv_error, base.cv_error),
            normalized_std=_normalize(raw[r].fold_std, base.fold_std),
            normalized_epoch=_normalize(raw[r].avg_best_epoch, base.avg_best_epoch),
        )
        for r in cfg.regimes
    ]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(report_json(cfg, dataset, table))
        (out_dir / "report.txt").write_text(report_text(table))
    return table


def report_json(cfg: ExperimentConfig, dataset: Dataset, table: list[RegimeReport]) -> str:
    """Deterministic JSON report; identical configs give identical bytes."""
    payload = {
        "config": cfg.to_dict(),
        "dataset": {
            "scenario": dataset.scenario.value,
            "n_samples": len(dataset),
            "n_buses": dataset.n_buses,
            "seed": dataset.seed,
            "noise": dataset.noise.to_dict() if dataset.noise else None,
        },
        "seeds": {
            "master_seed": cfg.master_seed,
            "fold_split_seed": fold_split_seed(cfg),
            "scheme": "SeedSequence([master, stream, fold]); streams: "
                      f"folds={_STREAM_FOLDS}, init={_STREAM_INIT}, "
                      f"shuffle={_STREAM_SHUFFLE}; fold-dependent, "
                      "regime-independent",
        },
        "metrics": {
            "validation_error": VALIDATION_METRIC,
            "fold_std": FOLD_STD_CONVENTION,
            "normalized": "100 x (value - plain_nn_value) / plain_nn_value",
        },
        "regimes": [r.to_dict() for r in table],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _fmt_norm(x: float | None) -> str:
    return "n/a" if x is None else f"{x:+.2f}%"


def report_text(table: list[RegimeReport]) -> str:
    """Fixed-width table: error, std, best epoch, each with normalized column."""
    header = (
        f"{'Regime':<8} {'CV Error':>10} {'Norm.':>9} {'Fold Std':>10} "
        f"{'Norm.':>9} {'Best Epoch':>11} {'Norm.':>9}"
    )
    lines = [header, "-" * len(header)]
    for r in table:
        lines.append(
            f"{r.regime.label:<8} {r.cv_error:>9.4f}% {_fmt_norm(r.normalized_error):>9} "
            f"{r.fold_std:>9.4f}% {_fmt_norm(r.normalized_std):>9} "
            f"{r.avg_best_epoch:>11.1f} {_fmt_norm(r.normalized_epoch):>9}"
        )
    return "\n".join(lines) + "\n"
