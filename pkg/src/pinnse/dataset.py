"""Scenario generation, measurement noise, preprocessing and k-fold splits."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pinnse.grid import Bus, BusKind, GridModel
from pinnse.power_flow import (
    CurrentSet,
    InjectionSet,
    PolarVoltage,
    PowerFlowError,
    current_injections,
    injections,
    solve_newton_raphson,
)

ZERO_EPSILON = 1e-8


class DatasetError(RuntimeError):
    """Scenario generation or dataset persistence failed."""


class Scenario(enum.Enum):
    STEADY_STATE = "steady_state"
    GENERATOR_OUTAGE = "generator_outage"


@dataclass(frozen=True, eq=False)
class Sample:
    """One instance: noisy injection measurements (network inputs), the true
    voltage state (regression target) and the true current injections."""

    p_meas: np.ndarray
    q_meas: np.ndarray
    v_true: PolarVoltage
    i_true: CurrentSet


@dataclass(frozen=True)
class NoiseSpec:
    """Relative Gaussian measurement noise: z -> z * (1 + eps)."""

    p_sigma_rel: float = 0.01
    q_sigma_rel: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.p_sigma_rel < 0 or self.q_sigma_rel < 0:
            raise ValueError("noise sigmas must be >= 0")

    def to_dict(self) -> dict:
        return {"p_sigma_rel": self.p_sigma_rel, "q_sigma_rel": self.q_sigma_rel,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(d["p_sigma_rel"], d["q_sigma_rel"], d["seed"])


@dataclass(frozen=True, eq=False)
class PreprocessStats:
    """Training-fold statistics for the transform pipeline.

    Inputs: replace exact zeros with zero_epsilon, standardize with the
    train mean/std, then affinely rescale to [-1, 1] with the train extremes
    of the standardized values. Targets: zero replacement, then the affine
    rescale only. A feature that is constant on the training folds has no
    scale; it maps to 0 with a recorded warning, and the inverse transform
    reconstructs the constant itself (alpha = 0). Downstream consequence:
    reconstructed physical states always carry the exact known value for
    constant features, whatever the network emits on those heads, so those
    heads are excluded from both physics feedback and evaluation rather
    than being trained against an arbitrary made-up scale.
    """

    input_mean: np.ndarray
    input_std: np.ndarray
    input_min: np.ndarray
    input_max: np.ndarray
    target_min: np.ndarray
    target_max: np.ndarray
    zero_epsilon: float = ZERO_EPSILON
    warnings: tuple[str, ...] = ()

    def transform_inputs(self, x: np.ndarray) -> np.ndarray:
        xs = (_replace_zeros(x, self.zero_epsilon) - self.input_mean) / self.input_std
        span = self.input_max - self.input_min
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 2.0 * (xs - self.input_min) / span - 1.0
        return np.where(span > 0.0, out, 0.0)

    def transform_targets(self, t: np.ndarray) -> np.ndarray:
        tz = _replace_zeros(t, self.zero_epsilon)
        span = self.target_max - self.target_min
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 2.0 * (tz - self.target_min) / span - 1.0
        return np.where(span > 0.0, out, 0.0)

    def target_inverse_coeffs(self) -> tuple[np.ndarray, np.ndarray]:
        """(alpha, beta) with physical = alpha * rescaled + beta per feature.
        Constant features reconstruct the constant exactly: alpha = 0,
        beta = the constant."""
        span = self.target_max - self.target_min
        alpha = np.where(span > 0.0, span / 2.0, 0.0)
        beta = np.where(span > 0.0, (self.target_max + self.target_min) / 2.0,
                        self.target_min)
        return alpha, beta

    def inverse_transform_targets(self, t_rescaled: np.ndarray) -> np.ndarray:
        alpha, beta = self.target_inverse_coeffs()
        return alpha * t_rescaled + beta

    def to_dict(self) -> dict:
        return {
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
            "input_min": self.input_min.tolist(),
            "input_max": self.input_max.tolist(),
            "target_min": self.target_min.tolist(),
            "target_max": self.target_max.tolist(),
            "zero_epsilon": self.zero_epsilon,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessStats":
        return cls(
            np.array(d["input_mean"]), np.array(d["input_std"]),
            np.array(d["input_min"]), np.array(d["input_max"]),
            np.array(d["target_min"]), np.array(d["target_max"]),
            d["zero_epsilon"], tuple(d["warnings"]),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered samples plus the provenance needed to reproduce them."""

    samples: tuple[Sample, ...]
    scenario: Scenario
    seed: int
    noise: NoiseSpec | None = None
    preprocess: PreprocessStats | None = None

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_buses(self) -> int:
        return self.samples[0].p_meas.shape[0]

    def inputs(self) -> np.ndarray:
        """(n_samples, 2N) measurement matrix, columns [p_1..p_N, q_1..q_N]."""
        return np.array([np.concatenate((s.p_meas, s.q_meas)) for s in self.samples])

    def targets(self) -> np.ndarray:
        """(n_samples, 2N) state matrix, columns [vmag_1..vmag_N, vang_1..vang_N]."""
        return np.array(
            [np.concatenate((s.v_true.v_mag, s.v_true.v_ang)) for s in self.samples]
        )

    def currents(self) -> np.ndarray:
        """(n_samples, N) complex true current injections."""
        return np.array([s.i_true.to_complex() for s in self.samples])


def _replace_zeros(a: np.ndarray, eps: float) -> np.ndarray:
    return np.where(a == 0.0, eps, a)


def _solve_sample(grid: GridModel, spec: InjectionSet) -> Sample:
    # measurements are the scheduled injections where the schedule fixes
    # them (keeping zero-injection buses exactly zero) and the solved values
    # where it does not: slack P/Q and reactive output at PV buses
    v = solve_newton_raphson(grid, spec)
    inj = injections(v, grid.y_bus)
    p = spec.p.astype(float).copy()
    q = spec.q.astype(float).copy()
    slack = grid.slack_index
    p[slack] = inj.p[slack]
    q[slack] = inj.q[slack]
    pv = grid.pv_indices
    q[pv] = inj.q[pv]
    return Sample(p, q, v, current_injections(v, grid.y_bus))


def generate_steady_state(
    grid: GridModel, n: int = 192, load_band: float = 0.2, seed: int = 0
) -> Dataset:
    """Independent load-variation snapshots.

    Every bus load (P and Q together) is scaled by its own uniform factor in
    [1 - load_band, 1 + load_band] and the network re-solved. Measurements
    are the noiseless solved injections; apply add_noise separately. A
    non-converging perturbation is redrawn up to 10 times.
    """
    if not 0.0 <= load_band < 1.0:
        raise ValueError(f"load_band must lie in [0, 1), got {load_band}")
    rng = np.random.default_rng(seed)
    base_p, base_q = grid.load_p, grid.load_q
    gen_p = grid.gen_p
    samples = []
    for idx in range(n):
        last_err = None
        for _ in range(10):
            factors = rng.uniform(1.0 - load_band, 1.0 + load_band, grid.n)
            spec = InjectionSet(gen_p - base_p * factors, -base_q * factors)
            try:
                samples.append(_solve_sample(grid, spec))
                break
            except PowerFlowError as err:
                last_err = err
        else:
            raise DatasetError(f"sample {idx}: no converging perturbation in 10 draws") from last_err
    return Dataset(tuple(samples), Scenario.STEADY_STATE, seed)


OUTAGE_BUS = 1  # zero-based index of the tripped generator's bus


def generate_outage_trajectory(
    grid: GridModel, n: int = 2000, seed: int = 0, jitter: float = 0.01
) -> Dataset:
    """Quasi-static generator-trip trajectory.

    First 10% of the samples: base operation with per-bus uniform load
    jitter. Then the generator at OUTAGE_BUS steps to zero output (the bus
    drops to PQ, the slack absorbs the deficit) and recovers exponentially
    toward its base dispatch with time constant = 25% of the trajectory
    length. Each instance is an independent flat-start solve.
    """
    base_gen = grid.buses[OUTAGE_BUS].gen_p
    if base_gen <= 0.0:
        raise DatasetError(f"grid has no active generation at bus index {OUTAGE_BUS}")
    if n < 10:
        raise ValueError(f"trajectory needs n >= 10, got {n}")
    rng = np.random.default_rng(seed)
    base_p, base_q = grid.load_p, grid.load_q
    gen_p = grid.gen_p
    n_step = n // 10
    tau = 0.25 * n

    pq_buses = tuple(
        dataclasses.replace(b, kind=BusKind.PQ) if b.index == OUTAGE_BUS else b
        for b in grid.buses
    )
    grid_outaged = dataclasses.replace(grid, buses=pq_buses)

    samples = []
    for idx in range(n):
        if idx < n_step:
            last_err = None
            for _ in range(10):
                factors = rng.uniform(1.0 - jitter, 1.0 + jitter, grid.n)
                spec = InjectionSet(gen_p - base_p * factors, -base_q * factors)
                try:
                    samples.append(_solve_sample(grid, spec))
                    break
                except PowerFlowError as err:
                    last_err = err
            else:
                raise DatasetError(f"sample {idx}: no converging jitter in 10 draws") from last_err
            continue
        gen2 = base_gen * -np.expm1(-(idx - n_step) / tau)
        p_sched = gen_p.copy()
        p_sched[OUTAGE_BUS] = gen2
        model = grid_outaged if gen2 == 0.0 else grid
        try:
            samples.append(_solve_sample(model, InjectionSet(p_sched - base_p, -base_q)))
        except PowerFlowError as err:
            raise DatasetError(f"sample {idx}: trajectory solve failed: {err}") from err
    return Dataset(tuple(samples), Scenario.GENERATOR_OUTAGE, seed)


def add_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    """Multiplicative Gaussian noise on the measurements; truth untouched.

    Draw order is fixed (all P factors, then all Q factors), so the result
    is deterministic in spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    n, nb = len(ds), ds.n_buses
    eps_p = spec.p_sigma_rel * rng.standard_normal((n, nb))
    eps_q = spec.q_sigma_rel * rng.standard_normal((n, nb))
    noisy = tuple(
        Sample(s.p_meas * (1.0 + eps_p[i]), s.q_meas * (1.0 + eps_q[i]), s.v_true, s.i_true)
        for i, s in enumerate(ds.samples)
    )
    return Dataset(noisy, ds.scenario, ds.seed, noise=spec, preprocess=ds.preprocess)


_INPUT_GROUPS = ("p", "q")
_TARGET_GROUPS = ("vmag", "vang")


def _feature_names(groups: tuple[str, ...], nb: int) -> list[str]:
    return [f"{g}_{i + 1}" for g in groups for i in range(nb)]


def preprocess(ds: Dataset, train_indices) -> tuple[Dataset, PreprocessStats]:
    """Fit the transform pipeline on the training rows, apply it everywhere.

    Returns a dataset whose samples carry TRANSFORMED measurements and
    targets (i_true stays physical) plus the fitted stats. Statistics never
    see the held-out rows.
    """
    train = np.asarray(train_indices, dtype=int)
    if train.size == 0:
        raise ValueError("train_indices is empty")
    if train.min() < 0 or train.max() >= len(ds):
        raise ValueError("train_indices out of range")

    nb = ds.n_buses
    x = _replace_zeros(ds.inputs(), ZERO_EPSILON)
    t = _replace_zeros(ds.targets(), ZERO_EPSILON)
    warnings: list[str] = []

    mean = x[train].mean(axis=0)
    std = x[train].std(axis=0)
    input_names = _feature_names(_INPUT_GROUPS, nb)
    for j in np.flatnonzero(std == 0.0):
        warnings.append(f"input feature {input_names[j]} is constant on the training folds; "
                        "standardized to 0")
    std = np.where(std > 0.0, std, 1.0)
    xs = (x - mean) / std

    smin = xs[train].min(axis=0)
    smax = xs[train].max(axis=0)
    for j in np.flatnonzero(smax - smin == 0.0):
        warnings.append(f"input feature {input_names[j]} has no training range; rescaled to 0")

    tmin = t[train].min(axis=0)
    tmax = t[train].max(axis=0)
    target_names = _feature_names(_TARGET_GROUPS, nb)
    for j in np.flatnonzero(tmax - tmin == 0.0):
        warnings.append(f"target feature {target_names[j]} has no training range; rescaled to 0")

    stats = PreprocessStats(mean, std, smin, smax, tmin, tmax, ZERO_EPSILON, tuple(warnings))
    xr = stats.transform_inputs(ds.inputs())
    tr = stats.transform_targets(ds.targets())
    transformed = tuple(
        Sample(
            xr[i, :nb], xr[i, nb:],
            PolarVoltage(tr[i, :nb], tr[i, nb:]),
            s.i_true,
        )
        for i, s in enumerate(ds.samples)
    )
    return Dataset(transformed, ds.scenario, ds.seed, ds.noise, stats), stats


def k_fold_split(n: int, k: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Contiguous validation blocks of a seeded shuffle; every index
    validates exactly once. Returns [(train_idx, val_idx), ...] sorted."""
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    base, rem = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < rem else 0)
        val = perm[start:start + size]
        train = np.concatenate((perm[:start], perm[start + size:]))
        folds.append((np.sort(train), np.sort(val)))
        start += size
    return folds


# -- persistence --------------------------------------------------------------


def _csv_header(nb: int) -> list[str]:
    return _feature_names(("p", "q", "vmag", "vang", "ire", "iim"), nb)


def sidecar_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_dataset(ds: Dataset, csv_path: str | Path) -> None:
    """Write the samples as CSV plus a JSON sidecar with the provenance."""
    csv_path = Path(csv_path)
    nb = ds.n_buses
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_csv_header(nb))
        for s in ds.samples:
            row = np.concatenate(
                (s.p_meas, s.q_meas, s.v_true.v_mag, s.v_true.v_ang, s.i_true.i_re, s.i_true.i_im)
            )
            writer.writerow([f"{float(v):.17g}" for v in row])
    meta = {
        "scenario": ds.scenario.value,
        "seed": ds.seed,
        "n_buses": nb,
        "n_samples": len(ds),
        "noise": ds.noise.to_dict() if ds.noise else None,
        "preprocess": ds.preprocess.to_dict() if ds.preprocess else None,
    }
    sidecar_path(csv_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_dataset(csv_path: str | Path) -> Dataset:
    """Read a dataset written by save_dataset (CSV plus sidecar)."""
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise DatasetError(f"dataset file not found: {csv_path}")
    side = sidecar_path(csv_path)
    if not side.exists():
        raise DatasetError(f"missing sidecar {side}")
    try:
        meta = json.loads(side.read_text())
        scenario = Scenario(meta["scenario"])
        nb = int(meta["n_buses"])
    except (json.JSONDecodeError, KeyError, ValueError) as err:
        raise DatasetError(f"bad sidecar {side}: {err}") from err

    with csv_path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _csv_header(nb):
            raise DatasetError(f"{csv_path}: header does not match the {nb}-bus column layout")
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 6 * nb:
                raise DatasetError(f"{csv_path}:{lineno}: expected {6 * nb} columns, got {len(row)}")
            try:
                vals = np.array([float(v) for v in row])
            except ValueError as err:
                raise DatasetError(f"{csv_path}:{lineno}: {err}") from err
            p, q, vm, va, ire, iim = vals.reshape(6, nb)
            samples.append(Sample(p, q, PolarVoltage(vm, va), CurrentSet(ire, iim)))
    if not samples:
        raise DatasetError(f"{csv_path}: no samples")

    noise = NoiseSpec.from_dict(meta["noise"]) if meta.get("noise") else None
    stats = PreprocessStats.from_dict(meta["preprocess"]) if meta.get("preprocess") else None
    return Dataset(tuple(samples), scenario, int(meta["seed"]), noise, stats)
