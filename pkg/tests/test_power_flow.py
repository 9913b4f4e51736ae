"""Injection equations, Jacobian and Newton-Raphson solver."""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from pinnse.grid import Branch, Bus, BusKind, GridModel, load_case14
from pinnse.power_flow import (
    CurrentSet,
    InjectionSet,
    PolarVoltage,
    PowerFlowError,
    current_injections,
    flat_profile,
    injection_jacobian,
    injections,
    solve_newton_raphson,
)

FIXTURES = Path(__file__).parent / "fixtures"
REF = json.loads((FIXTURES / "case14_reference.json").read_text())


def two_bus(r=0.01, x=0.1, load_p=0.3, load_q=0.1, v_slack=1.0):
    buses = (
        Bus(0, BusKind.SLACK, v_setpoint=v_slack),
        Bus(1, BusKind.PQ, load_p=load_p, load_q=load_q),
    )
    return GridModel.from_components(buses, (Branch(0, 1, r=r, x=x),))


def test_flat_voltage_zero_injections():
    # no shunt paths: uniform voltage drives no current anywhere
    g = two_bus()
    v = PolarVoltage(np.ones(2), np.zeros(2))
    inj = injections(v, g.y_bus)
    cur = current_injections(v, g.y_bus)
    assert np.max(np.abs(inj.p)) < 1e-12
    assert np.max(np.abs(inj.q)) < 1e-12
    assert np.max(np.abs(cur.to_complex())) < 1e-12


def test_two_bus_hand_injections():
    # V = [1 at 0 rad, 0.98 at -0.05 rad] over r=0.01, x=0.1
    g = two_bus()
    v = PolarVoltage(np.array([1.0, 0.98]), np.array([0.0, -0.05]))
    inj = injections(v, g.y_bus)
    cur = current_injections(v, g.y_bus)
    np.testing.assert_allclose(inj.p[0], 0.5059609937282976, rtol=1e-12)
    np.testing.assert_allclose(inj.q[0], 0.1616513487565001, rtol=1e-12)
    np.testing.assert_allclose(inj.p[1], -0.5031397168710043, rtol=1e-12)
    np.testing.assert_allclose(inj.q[1], -0.1334385801835679, rtol=1e-12)
    np.testing.assert_allclose(cur.i_re[0], 0.5059609937282976, rtol=1e-12)
    np.testing.assert_allclose(cur.i_im[0], -0.1616513487565001, rtol=1e-12)
    # currents at the two ends of a single line cancel
    np.testing.assert_allclose(cur.to_complex()[1], -cur.to_complex()[0], rtol=1e-12)


def test_trig_form_matches_complex_form():
    # P + jQ must equal V * conj(Y V) elementwise on random states
    y = load_case14().y_bus
    rng = np.random.default_rng(42)
    for _ in range(100):
        v = PolarVoltage(rng.uniform(0.9, 1.1, 14), rng.uniform(-0.5, 0.5, 14))
        inj = injections(v, y)
        s = v.to_complex() * np.conj(y.matrix @ v.to_complex())
        np.testing.assert_allclose(inj.p, s.real, atol=1e-12)
        np.testing.assert_allclose(inj.q, s.imag, atol=1e-12)


def test_jacobian_matches_finite_differences():
    y = load_case14().y_bus
    rng = np.random.default_rng(7)
    v = PolarVoltage(rng.uniform(0.95, 1.05, 14), rng.uniform(-0.3, 0.3, 14))
    dp_dth, dp_dv, dq_dth, dq_dv = injection_jacobian(v, y)
    h = 1e-6
    for j in range(14):
        dth = np.zeros(14)
        dth[j] = h
        up = injections(PolarVoltage(v.v_mag, v.v_ang + dth), y)
        dn = injections(PolarVoltage(v.v_mag, v.v_ang - dth), y)
        np.testing.assert_allclose(dp_dth[:, j], (up.p - dn.p) / (2 * h), atol=1e-6)
        np.testing.assert_allclose(dq_dth[:, j], (up.q - dn.q) / (2 * h), atol=1e-6)
        dv = np.zeros(14)
        dv[j] = h
        up = injections(PolarVoltage(v.v_mag + dv, v.v_ang), y)
        dn = injections(PolarVoltage(v.v_mag - dv, v.v_ang), y)
        np.testing.assert_allclose(dp_dv[:, j], (up.p - dn.p) / (2 * h), atol=1e-6)
        np.testing.assert_allclose(dq_dv[:, j], (up.q - dn.q) / (2 * h), atol=1e-6)


def test_newton_zero_load_is_flat():
    g = two_bus(load_p=0.0, load_q=0.0)
    v = solve_newton_raphson(g)
    np.testing.assert_allclose(v.v_mag, [1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(v.v_ang, [0.0, 0.0], atol=1e-12)


def test_newton_two_bus_matches_reference():
    ref = REF["two_bus"]
    g = two_bus(r=ref["r"], x=ref["x"], load_p=ref["load_p"], load_q=ref["load_q"],
                v_slack=ref["v_slack"])
    v = solve_newton_raphson(g)
    np.testing.assert_allclose(v.v_mag, ref["v_mag"], atol=1e-8)
    np.testing.assert_allclose(v.v_ang, ref["v_ang_rad"], atol=1e-8)


def test_newton_case14_matches_reference():
    g = load_case14()
    t0 = time.perf_counter()
    v = solve_newton_raphson(g)
    elapsed = time.perf_counter() - t0
    ref = REF["case14"]
    np.testing.assert_allclose(v.v_mag, ref["v_mag"], atol=1e-6)
    np.testing.assert_allclose(v.v_ang, ref["v_ang_rad"], atol=1e-6)
    assert elapsed < 1.0
    # slack angle is exactly zero, PV magnitudes exactly at setpoint
    assert v.v_ang[0] == 0.0
    np.testing.assert_array_equal(v.v_mag[g.pv_indices], g.v_setpoints[g.pv_indices])


def test_newton_roundtrip_on_scaled_loads():
    # solve, then push the solution back through the injection equations
    g = load_case14()
    p0, q0 = g.base_injections()
    rng = np.random.default_rng(99)
    tol = 1e-8
    for _ in range(20):
        scale = rng.uniform(0.7, 1.3, g.n)
        spec = InjectionSet(
            np.where(g.gen_p > 0, p0, p0 * scale), np.where(g.load_q != 0, q0 * scale, q0)
        )
        v = solve_newton_raphson(g, spec, tol=tol)
        inj = injections(v, g.y_bus)
        free = np.concatenate((g.pv_indices, g.pq_indices))
        assert np.max(np.abs(inj.p[free] - spec.p[free])) < 10 * tol
        assert np.max(np.abs(inj.q[g.pq_indices] - spec.q[g.pq_indices])) < 10 * tol
        # net active injection covers the (nonnegative) line losses
        assert inj.p.sum() > -1e-10


def test_newton_converged_start_returns_immediately():
    g = load_case14()
    v = solve_newton_raphson(g)
    again = solve_newton_raphson(g, v0=v, max_iter=0)
    np.testing.assert_array_equal(again.v_mag, v.v_mag)
    np.testing.assert_array_equal(again.v_ang, v.v_ang)


def test_newton_requires_start():
    with pytest.raises(ValueError, match="flat_start"):
        solve_newton_raphson(load_case14(), flat_start=False)


def test_newton_reports_divergence():
    g = two_bus(load_p=100.0, load_q=50.0)  # far beyond the line's capacity
    with pytest.raises(PowerFlowError):
        solve_newton_raphson(g)


def test_newton_iteration_budget():
    g = load_case14()
    with pytest.raises(PowerFlowError, match="no convergence"):
        solve_newton_raphson(g, max_iter=1)


def test_polar_voltage_complex_roundtrip():
    rng = np.random.default_rng(3)
    vm = rng.uniform(0.9, 1.1, 14)
    va = rng.uniform(-np.pi / 2, np.pi / 2, 14)
    v = PolarVoltage(vm, va)
    back = PolarVoltage.from_complex(v.to_complex())
    np.testing.assert_allclose(back.v_mag, vm, rtol=1e-14)
    np.testing.assert_allclose(back.v_ang, va, rtol=1e-12)
    assert v.n == 14


def test_flat_profile_uses_setpoints():
    g = load_case14()
    v = flat_profile(g)
    np.testing.assert_allclose(v.v_mag[[0, 1, 2, 5, 7]], [1.06, 1.045, 1.01, 1.07, 1.09])
    np.testing.assert_allclose(v.v_mag[g.pq_indices], 1.0)
    assert np.all(v.v_ang == 0.0)


def test_current_set_roundtrip():
    c = CurrentSet(np.array([1.0, -2.0]), np.array([0.5, 0.25]))
    np.testing.assert_array_equal(c.to_complex(), [1 + 0.5j, -2 + 0.25j])
