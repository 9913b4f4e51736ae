"""AC power injections, current balance and a polar Newton-Raphson solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pinnse.grid import AdmittanceMatrix, GridModel


class PowerFlowError(RuntimeError):
    """Newton iteration failed to converge or produced non-finite values."""


@dataclass(frozen=True, eq=False)
class PolarVoltage:
    """Bus voltages as magnitude (pu) and angle (radians) arrays."""

    v_mag: np.ndarray
    v_ang: np.ndarray

    @property
    def n(self) -> int:
        return self.v_mag.shape[0]

    def to_complex(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)

    @staticmethod
    def from_complex(v: np.ndarray) -> "PolarVoltage":
        return PolarVoltage(np.abs(v), np.angle(v))


@dataclass(frozen=True, eq=False)
class InjectionSet:
    """Net active/reactive power injected at each bus (pu)."""

    p: np.ndarray
    q: np.ndarray


@dataclass(frozen=True, eq=False)
class CurrentSet:
    """Net complex current injected at each bus, rectangular parts (pu)."""

    i_re: np.ndarray
    i_im: np.ndarray

    def to_complex(self) -> np.ndarray:
        return self.i_re + 1j * self.i_im


def _trig_kernels(v: PolarVoltage, y: AdmittanceMatrix) -> tuple[np.ndarray, np.ndarray]:
    # A[i,j] = G_ij cos(th_i - th_j) + B_ij sin(th_i - th_j)
    # D[i,j] = G_ij sin(th_i - th_j) - B_ij cos(th_i - th_j)
    ang = v.v_ang[:, None] - v.v_ang[None, :]
    c = np.cos(ang)
    s = np.sin(ang)
    return y.g * c + y.b * s, y.g * s - y.b * c


def injections(v: PolarVoltage, y: AdmittanceMatrix) -> InjectionSet:
    """Bus power injections from the trigonometric balance equations.

        P_i = V_i sum_j V_j (G_ij cos th_ij + B_ij sin th_ij)
        Q_i = V_i sum_j V_j (G_ij sin th_ij - B_ij cos th_ij)
    """
    a, d = _trig_kernels(v, y)
    return InjectionSet(v.v_mag * (a @ v.v_mag), v.v_mag * (d @ v.v_mag))


def current_injections(v: PolarVoltage, y: AdmittanceMatrix) -> CurrentSet:
    """Nodal current balance I = Y V (matrix as stored, not conjugated)."""
    i = y.matrix @ v.to_complex()
    return CurrentSet(i.real.copy(), i.imag.copy())


def injection_jacobian(
    v: PolarVoltage, y: AdmittanceMatrix
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Full dense partials (dP/dth, dP/dV, dQ/dth, dQ/dV), each n x n.

    Rows are equations, columns state variables; callers slice out the
    slack/PV entries they need. Shared by the Newton solver and the WLS
    estimator.
    """
    a, d = _trig_kernels(v, y)
    vm = v.v_mag
    p = vm * (a @ vm)
    q = vm * (d @ vm)
    vv = vm[:, None] * vm[None, :]
    g_diag = np.diag(y.g)
    b_diag = np.diag(y.b)

    dp_dth = vv * d
    np.fill_diagonal(dp_dth, -q - b_diag * vm**2)
    dp_dv = vm[:, None] * a
    np.fill_diagonal(dp_dv, p / vm + g_diag * vm)
    dq_dth = -vv * a
    np.fill_diagonal(dq_dth, p - g_diag * vm**2)
    dq_dv = vm[:, None] * d
    np.fill_diagonal(dq_dv, q / vm - b_diag * vm)
    return dp_dth, dp_dv, dq_dth, dq_dv


def flat_profile(grid: GridModel) -> PolarVoltage:
    """Flat start: setpoint magnitude at slack/PV buses, 1.0 at PQ, 0 angles."""
    vm = np.ones(grid.n)
    for i in np.concatenate(([grid.slack_index], grid.pv_indices)).astype(int):
        vm[i] = grid.buses[i].v_setpoint
    return PolarVoltage(vm, np.zeros(grid.n))


def solve_newton_raphson(
    grid: GridModel,
    spec: InjectionSet | None = None,
    *,
    tol: float = 1e-8,
    max_iter: int = 50,
    flat_start: bool = True,
    v0: PolarVoltage | None = None,
) -> PolarVoltage:
    """Solve the power flow for the scheduled injections by Newton-Raphson.

    spec carries the net scheduled P (used at PV and PQ buses) and Q (used
    at PQ buses) in pu; None means the grid's own base injections. The full
    polar Jacobian is rebuilt and factorized every iteration. max_iter
    bounds the number of state updates; the mismatch is checked before the
    first update, so an already-converged v0 returns immediately.

    Raises PowerFlowError when the mismatch is still above tol after
    max_iter updates or turns non-finite.
    """
    if spec is None:
        p_sched, q_sched = grid.base_injections()
    else:
        p_sched, q_sched = spec.p, spec.q
    if v0 is not None:
        vm = v0.v_mag.astype(float).copy()
        va = v0.v_ang.astype(float).copy()
    elif flat_start:
        start = flat_profile(grid)
        vm, va = start.v_mag, start.v_ang
    else:
        raise ValueError("flat_start=False requires an explicit v0")

    y = grid.y_bus
    pq = grid.pq_indices
    pvpq = np.sort(np.concatenate((grid.pv_indices, pq))).astype(int)
    n_ang = pvpq.size

    mismatch = np.inf
    for sweep in range(max_iter + 1):
        v = PolarVoltage(vm, va)
        calc = injections(v, y)
        f = np.concatenate((p_sched[pvpq] - calc.p[pvpq], q_sched[pq] - calc.q[pq]))
        if not np.all(np.isfinite(f)):
            raise PowerFlowError(f"non-finite power mismatch at iteration {sweep}")
        mismatch = np.max(np.abs(f)) if f.size else 0.0
        if mismatch < tol:
            vm.setflags(write=False)
            va.setflags(write=False)
            return v
        if sweep == max_iter:
            break
        dp_dth, dp_dv, dq_dth, dq_dv = injection_jacobian(v, y)
        jac = np.block(
            [
                [dp_dth[np.ix_(pvpq, pvpq)], dp_dv[np.ix_(pvpq, pq)]],
                [dq_dth[np.ix_(pq, pvpq)], dq_dv[np.ix_(pq, pq)]],
            ]
        )
        try:
            dx = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as err:
            raise PowerFlowError(f"singular Jacobian at iteration {sweep}: {err}") from err
        va[pvpq] += dx[:n_ang]
        vm[pq] += dx[n_ang:]

    raise PowerFlowError(
        f"no convergence after {max_iter} iterations, max mismatch {mismatch:.3e} pu"
    )
