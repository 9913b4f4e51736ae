"""Gauss-Newton weighted-least-squares state estimation from P/Q injections.

A non-learning estimator over the same measurement vector the datasets carry,
used to sanity-check generated data and as an accuracy yardstick. State is
[angles at all buses except slack, magnitudes at all buses]; the slack angle
is the reference and stays fixed at 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dataset import Dataset, NoiseSpec
from .grid import GridModel
from .power_flow import PolarVoltage, injection_jacobian, injections

# exact-zero injections get a floor instead of an infinite weight
SIGMA_FLOOR = 0.01


class WLSError(RuntimeError):
    """Estimation failed: singular gain matrix or no convergence."""


@dataclass(frozen=True)
class MeasurementSet:
    """Stacked injection measurements (P_1..P_N, Q_1..Q_N) with weights.

    Weights are inverse noise variances; uniform 1.0 works for noiseless
    data, where WLS reduces to ordinary least squares.
    """

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        if values.ndim != 1 or values.shape != weights.shape:
            raise ValueError("values and weights must be 1-d arrays of equal length")
        if values.size % 2 != 0 or values.size == 0:
            raise ValueError("measurement vector must stack P and Q (even length)")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(weights)):
            raise ValueError("measurements and weights must be finite")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")

    @property
    def n_buses(self) -> int:
        return self.values.size // 2


def measurement_weights(values: np.ndarray, noise: NoiseSpec | None = None) -> np.ndarray:
    """Inverse-variance weights for a stacked (P, Q) measurement vector.

    Without a noise spec every weight is 1.0. With one, sigma_i is the
    relative sigma times max(|z_i|, SIGMA_FLOOR); the floor keeps exact-zero
    injections at a large finite weight (the usual virtual-measurement
    treatment) instead of an infinite one.
    """
    values = np.asarray(values, dtype=float)
    n = values.size // 2
    weights = np.ones(values.size)
    if noise is None:
        return weights
    rels = np.concatenate([np.full(n, noise.p_sigma_rel), np.full(n, noise.q_sigma_rel)])
    active = rels > 0.0
    sigma = rels[active] * np.maximum(np.abs(values[active]), SIGMA_FLOOR)
    weights[active] = sigma**-2
    return weights


def estimate_wls(
    grid: GridModel,
    meas: MeasurementSet,
    *,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> PolarVoltage:
    """Iterate dx = (H^T W H)^-1 H^T W r from a flat start until max|dx| < tol."""
    n = grid.n
    if meas.n_buses != n:
        raise ValueError(f"measurement set is for {meas.n_buses} buses, grid has {n}")
    slack = grid.slack_index
    nonslack = np.flatnonzero(np.arange(n) != slack)
    w = meas.weights

    v_mag = np.ones(n)
    v_ang = np.zeros(n)
    for _ in range(max_iter):
        v = PolarVoltage(v_mag, v_ang)
        inj = injections(v, grid.y_bus)
        r = meas.values - np.concatenate([inj.p, inj.q])
        dp_dth, dp_dv, dq_dth, dq_dv = injection_jacobian(v, grid.y_bus)
        h_mat = np.block(
            [
                [dp_dth[:, nonslack], dp_dv],
                [dq_dth[:, nonslack], dq_dv],
            ]
        )
        gain = h_mat.T @ (w[:, None] * h_mat)
        rhs = h_mat.T @ (w * r)
        try:
            dx = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gain), rhs)
        except scipy.linalg.LinAlgError as exc:
            raise WLSError(f"gain matrix is not positive definite: {exc}") from exc
        if not np.all(np.isfinite(dx)):
            raise WLSError("non-finite state update; measurements may be inconsistent")
        v_ang[nonslack] += dx[: n - 1]
        v_mag += dx[n - 1 :]
        if np.max(np.abs(dx)) < tol:
            v_mag.flags.writeable = False
            v_ang.flags.writeable = False
            return PolarVoltage(v_mag, v_ang)
    res_norm = float(np.linalg.norm(meas.values - np.concatenate([inj.p, inj.q])))
    raise WLSError(
        f"no convergence after {max_iter} iterations; final residual norm {res_norm:.3e}"
    )


@dataclass(frozen=True)
class WLSBatchResult:
    """Per-sample WLS estimates against a dataset, with truth errors."""

    v_mag: np.ndarray  # (n_samples, n)
    v_ang: np.ndarray
    mag_mae: np.ndarray  # (n_samples,), mean |est - true| per sample
    ang_mae: np.ndarray
    failures: tuple[tuple[int, str], ...] = field(default=())

    def __len__(self) -> int:
        return self.v_mag.shape[0]

    def error_summary(self) -> dict:
        ok = np.all(np.isfinite(self.v_mag), axis=1)
        if not np.any(ok):
            raise WLSError("every sample failed to converge")
        return {
            "n_samples": int(len(self)),
            "n_failed": int(len(self.failures)),
            "mean_mag_mae": float(self.mag_mae[ok].mean()),
            "max_mag_mae": float(self.mag_mae[ok].max()),
            "mean_ang_mae": float(self.ang_mae[ok].mean()),
            "max_ang_mae": float(self.ang_mae[ok].max()),
        }


def wls_batch(
    grid: GridModel,
    dataset: Dataset,
    *,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> WLSBatchResult:
    """Estimate every sample; failed samples become NaN rows plus a note."""
    if dataset.n_buses != grid.n:
        raise ValueError("dataset and grid bus counts differ")
    n = grid.n
    count = len(dataset)
    v_mag = np.full((count, n), np.nan)
    v_ang = np.full((count, n), np.nan)
    mag_mae = np.full(count, np.nan)
    ang_mae = np.full(count, np.nan)
    failures: list[tuple[int, str]] = []
    for k, sample in enumerate(dataset.samples):
        values = np.concatenate([sample.p_meas, sample.q_meas])
        meas = MeasurementSet(values, measurement_weights(values, dataset.noise))
        try:
            est = estimate_wls(grid, meas, tol=tol, max_iter=max_iter)
        except WLSError as exc:
            failures.append((k, str(exc)))
            continue
        v_mag[k] = est.v_mag
        v_ang[k] = est.v_ang
        mag_mae[k] = np.abs(est.v_mag - sample.v_true.v_mag).mean()
        ang_mae[k] = np.abs(est.v_ang - sample.v_true.v_ang).mean()
    return WLSBatchResult(v_mag, v_ang, mag_mae, ang_mae, tuple(failures))


def save_wls_estimates(path, result: WLSBatchResult) -> None:
    """Per-sample estimates CSV: index, magnitudes, angles, per-sample MAEs."""
    n = result.v_mag.shape[1]
    header = (
        ["sample"]
        + [f"vmag_{i + 1}" for i in range(n)]
        + [f"vang_{i + 1}" for i in range(n)]
        + ["mag_mae", "ang_mae"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(result)):
            row = np.concatenate(
                [result.v_mag[k], result.v_ang[k], [result.mag_mae[k], result.ang_mae[k]]]
            )
            writer.writerow([k] + [f"{x:.17g}" for x in row])


def save_wls_stats(path, result: WLSBatchResult) -> None:
    """Aggregate error statistics CSV, one metric per row."""
    summary = result.error_summary()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key, value in summary.items():
            writer.writerow([key, f"{value:.17g}" if isinstance(value, float) else value])
