"""Composite data/physics loss with batch-max normalization and lambda schedules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from pinnse.power_flow import CurrentSet


class Regime(enum.Enum):
    """Loss weighting regimes. Values are stable ids used in seed derivation."""

    PLAIN_NN = 0
    INCREMENT_10 = 1
    INCREMENT_20 = 2
    INCREMENT_25 = 3
    INCREMENT_33 = 4
    INCREMENT_50 = 5

    @property
    def increment(self) -> float:
        return _INCREMENTS[self]

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "Regime":
        key = text.strip().lower().rstrip("%")
        for prefix in ("increment", "inc"):  # "inc50", "increment_25", ...
            if key.startswith(prefix):
                key = key[len(prefix):].lstrip("_-")
                break
        for regime in cls:
            if key in (regime.label.lower().rstrip("%"), regime.name.lower()):
                return regime
        raise ValueError(f"unknown regime {text!r}; expected one of "
                         + ", ".join(r.label for r in cls))


_INCREMENTS = {
    Regime.PLAIN_NN: 0.0,
    Regime.INCREMENT_10: 0.10,
    Regime.INCREMENT_20: 0.20,
    Regime.INCREMENT_25: 0.25,
    Regime.INCREMENT_33: 0.33,
    Regime.INCREMENT_50: 0.50,
}

_LABELS = {
    Regime.PLAIN_NN: "NN",
    Regime.INCREMENT_10: "10%",
    Regime.INCREMENT_20: "20%",
    Regime.INCREMENT_25: "25%",
    Regime.INCREMENT_33: "33%",
    Regime.INCREMENT_50: "50%",
}


@dataclass(frozen=True)
class LambdaSchedule:
    """Stepwise weight trajectory: every `period` epochs lambda1 steps down
    and lambda2 steps up by the regime's increment, clamped to [0, 1]."""

    regime: Regime
    period: int = 100
    lambda1_0: float = 1.0
    lambda2_0: float = 0.0

    def __post_init__(self):
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")
        for name in ("lambda1_0", "lambda2_0"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")


def schedule_lambdas(sched: LambdaSchedule, epoch: int) -> tuple[float, float]:
    """Weights in effect at a given epoch (PlainNN is pinned at (1, 0))."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    if sched.regime is Regime.PLAIN_NN:
        return 1.0, 0.0
    k = epoch // sched.period
    c = sched.regime.increment
    lam1 = max(0.0, sched.lambda1_0 - k * c)
    lam2 = min(1.0, sched.lambda2_0 + k * c)
    return lam1, lam2


@dataclass(frozen=True)
class LossParts:
    """One training step's loss breakdown."""

    u_raw: float
    f_raw: float
    u_norm: float
    f_norm: float
    total: float
    lambda1: float
    lambda2: float


def data_loss(v_pred: np.ndarray, v_true: np.ndarray) -> tuple[float, float]:
    """Mean squared error over all batch entries, plus its batch-max
    normalized value u_norm = mean(d^2) / max(d^2) in [0, 1]."""
    d2 = np.square(np.asarray(v_pred, dtype=float) - np.asarray(v_true, dtype=float))
    if d2.size == 0:
        raise ValueError("empty batch")
    u_raw = float(d2.mean())
    peak = float(d2.max())
    return u_raw, (u_raw / peak if peak > 0.0 else 0.0)


def physics_loss(i_pred, i_true) -> tuple[float, float]:
    """Mean modulus of the complex current mismatch over batch x buses, plus
    its batch-max normalized value f_norm = mean|d| / max|d| in [0, 1]."""
    mod = np.abs(_as_complex(i_pred) - _as_complex(i_true))
    if mod.size == 0:
        raise ValueError("empty batch")
    f_raw = float(mod.mean())
    peak = float(mod.max())
    return f_raw, (f_raw / peak if peak > 0.0 else 0.0)


def combine(u_norm: float, f_norm: float, lambda1: float, lambda2: float) -> float:
    """Weighted sum lambda1*u_norm + lambda2*f_norm."""
    for name, val in (("u_norm", u_norm), ("f_norm", f_norm),
                      ("lambda1", lambda1), ("lambda2", lambda2)):
        if not math.isfinite(val):
            raise ValueError(f"{name} is not finite: {val}")
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("lambda weights must be nonnegative")
    return lambda1 * u_norm + lambda2 * f_norm


def evaluate_losses(v_pred, v_true, i_pred, i_true, lambda1, lambda2) -> LossParts:
    """Forward-only evaluation of the full composite loss."""
    u_raw, u_norm = data_loss(v_pred, v_true)
    f_raw, f_norm = physics_loss(i_pred, i_true)
    total = combine(u_norm, f_norm, lambda1, lambda2)
    return LossParts(u_raw, f_raw, u_norm, f_norm, total, lambda1, lambda2)


def _as_complex(x) -> np.ndarray:
    if isinstance(x, CurrentSet):
        return x.to_complex()
    return np.asarray(x, dtype=complex)
