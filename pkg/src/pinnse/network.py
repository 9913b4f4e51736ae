"""Single-hidden-layer tanh regressor with hand-written gradients and Adam.

The backward pass differentiates the composite loss exactly: the data branch
is normalized MSE in rescaled target space; the physics branch inverse-
transforms the outputs to physical polar voltages, forms I = Y*V and takes
the normalized MAE of the complex mismatch. Both normalization denominators
(the batch max terms) are held constant per batch, and the MAE subgradient
at exactly zero mismatch is 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pinnse.dataset import PreprocessStats
from pinnse.grid import AdmittanceMatrix
from pinnse.loss import LossParts, combine


class NonFiniteLossError(RuntimeError):
    """A loss branch produced NaN/Inf; the message names the branch."""


@dataclass(eq=False)
class MLP:
    """Parameters of the 2N -> hidden -> 2N network (tanh hidden, linear out)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.w2.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def parameters(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.w1, self.b1, self.w2, self.b2


@dataclass(eq=False)
class Gradients:
    """Loss partials, same shapes as the MLP parameters."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.w1, self.b1, self.w2, self.b2

    @classmethod
    def zeros_like(cls, net: MLP) -> "Gradients":
        return cls(*(np.zeros_like(p) for p in net.parameters()))


def init_mlp(n_buses: int, seed: int, hidden: int = 32) -> MLP:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    if n_buses < 2:
        raise ValueError(f"need at least 2 buses, got {n_buses}")
    width = 2 * n_buses
    rng = np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (width + hidden))
    w1 = rng.uniform(-bound, bound, (hidden, width))
    w2 = rng.uniform(-bound, bound, (width, hidden))
    return MLP(w1, np.zeros(hidden), w2, np.zeros(width))


def forward(net: MLP, x: np.ndarray) -> np.ndarray:
    """y = w2 tanh(w1 x + b1) + b2, rows are samples."""
    x = np.atleast_2d(x)
    if x.shape[1] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} input features, got {x.shape[1]}")
    a = np.tanh(x @ net.w1.T + net.b1)
    return a @ net.w2.T + net.b2


def backward(
    net: MLP,
    x: np.ndarray,
    targets: np.ndarray,
    i_true: np.ndarray,
    stats: PreprocessStats,
    ybus: AdmittanceMatrix,
    lambdas: tuple[float, float],
) -> tuple[LossParts, Gradients]:
    """Loss and its exact parameter gradients for one transformed batch.

    x and targets are in the model's rescaled spaces; i_true is the physical
    complex current (batch x N). The physics forward value is always
    computed (for logging) but its gradient is skipped when lambda2 == 0.
    """
    lam1, lam2 = lambdas
    x = np.atleast_2d(x)
    targets = np.atleast_2d(targets)
    i_true = np.atleast_2d(i_true)
    nb = ybus.n

    z1 = x @ net.w1.T + net.b1
    a = np.tanh(z1)
    y = a @ net.w2.T + net.b2

    # data branch: normalized MSE, denominator detached
    d = y - targets
    d2 = d * d
    u_raw = float(d2.mean())
    if not np.isfinite(u_raw):
        raise NonFiniteLossError("data branch produced a non-finite loss term")
    maxsq = float(d2.max())
    u_norm = u_raw / maxsq if maxsq > 0.0 else 0.0

    # physics branch: rescaled outputs -> physical polar state -> I = Y V
    alpha, beta = stats.target_inverse_coeffs()
    phys = alpha * y + beta
    vm = phys[:, :nb]
    va = phys[:, nb:]
    cos_a = np.cos(va)
    sin_a = np.sin(va)
    v_re = vm * cos_a
    v_im = vm * sin_a
    g, b = ybus.g, ybus.b
    i_re = v_re @ g.T - v_im @ b.T
    i_im = v_re @ b.T + v_im @ g.T
    d_re = i_re - i_true.real
    d_im = i_im - i_true.imag
    mod = np.hypot(d_re, d_im)
    f_raw = float(mod.mean())
    if not np.isfinite(f_raw):
        raise NonFiniteLossError("physics branch produced a non-finite loss term")
    maxmod = float(mod.max())
    f_norm = f_raw / maxmod if maxmod > 0.0 else 0.0

    total = combine(u_norm, f_norm, lam1, lam2)
    parts = LossParts(u_raw, f_raw, u_norm, f_norm, total, lam1, lam2)

    # d total / d y
    gy = np.zeros_like(y)
    if lam1 != 0.0 and maxsq > 0.0:
        gy += (2.0 * lam1 / (d2.size * maxsq)) * d
    if lam2 != 0.0 and maxmod > 0.0:
        scale = lam2 / (mod.size * maxmod)
        with np.errstate(invalid="ignore", divide="ignore"):
            g_re = np.where(mod > 0.0, scale * d_re / mod, 0.0)
            g_im = np.where(mod > 0.0, scale * d_im / mod, 0.0)
        gv_re = g_re @ g + g_im @ b
        gv_im = -g_re @ b + g_im @ g
        g_vm = gv_re * cos_a + gv_im * sin_a
        g_va = vm * (gv_im * cos_a - gv_re * sin_a)
        gy += alpha * np.concatenate((g_vm, g_va), axis=1)

    gw2 = gy.T @ a
    gb2 = gy.sum(axis=0)
    ga = gy @ net.w2
    gz1 = ga * (1.0 - a * a)
    gw1 = gz1.T @ x
    gb1 = gz1.sum(axis=0)
    return parts, Gradients(gw1, gb1, gw2, gb2)


@dataclass(eq=False)
class AdamState:
    """First/second moment accumulators and the optimizer constants."""

    m: Gradients
    v: Gradients
    t: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_net(cls, net: MLP, alpha: float = 1e-3, beta1: float = 0.9,
                beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(Gradients.zeros_like(net), Gradients.zeros_like(net),
                   0, alpha, beta1, beta2, epsilon)


def adam_step(net: MLP, state: AdamState, grads: Gradients) -> None:
    """One bias-corrected Adam update, applied to net and state in place."""
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for param, m, v, g in zip(net.parameters(), state.m.arrays(),
                              state.v.arrays(), grads.arrays()):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        param -= state.alpha * (m / c1) / (np.sqrt(v / c2) + state.epsilon)


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(path: str | Path, net: MLP, state: AdamState,
                    stats: PreprocessStats | None) -> None:
    """JSON checkpoint: shapes, flat full-precision parameters, Adam state
    and the preprocessing stats in effect during training."""
    doc = {
        "shapes": {k: list(p.shape) for k, p in zip("w1 b1 w2 b2".split(), net.parameters())},
        "params": {k: p.ravel().tolist() for k, p in zip("w1 b1 w2 b2".split(), net.parameters())},
        "adam": {
            "t": state.t,
            "alpha": state.alpha,
            "beta1": state.beta1,
            "beta2": state.beta2,
            "epsilon": state.epsilon,
            "m": {k: p.ravel().tolist() for k, p in zip("w1 b1 w2 b2".split(), state.m.arrays())},
            "v": {k: p.ravel().tolist() for k, p in zip("w1 b1 w2 b2".split(), state.v.arrays())},
        },
        "preprocess": stats.to_dict() if stats is not None else None,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[MLP, AdamState, PreprocessStats | None]:
    doc = json.loads(Path(path).read_text())
    shapes = doc["shapes"]

    def unpack(group: dict) -> list[np.ndarray]:
        return [np.array(group[k], dtype=float).reshape(shapes[k]) for k in ("w1", "b1", "w2", "b2")]

    net = MLP(*unpack(doc["params"]))
    adam = doc["adam"]
    state = AdamState(
        Gradients(*unpack(adam["m"])), Gradients(*unpack(adam["v"])),
        adam["t"], adam["alpha"], adam["beta1"], adam["beta2"], adam["epsilon"],
    )
    stats = PreprocessStats.from_dict(doc["preprocess"]) if doc.get("preprocess") else None
    return net, state, stats
