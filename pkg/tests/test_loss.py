"""Composite loss terms, normalization and lambda schedules."""

import numpy as np
import pytest

from pinnse.loss import (
    LambdaSchedule,
    Regime,
    combine,
    data_loss,
    evaluate_losses,
    physics_loss,
    schedule_lambdas,
)
from pinnse.power_flow import CurrentSet


def test_data_loss_exact_prediction():
    v = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert data_loss(v, v) == (0.0, 0.0)


def test_data_loss_singleton():
    u_raw, u_norm = data_loss(np.array([2.0]), np.array([1.0]))
    assert u_raw == 1.0 and u_norm == 1.0


def test_data_loss_two_errors():
    # errors {1, 3}: mean of squares 5, max 9
    u_raw, u_norm = data_loss(np.array([1.0, 3.0]), np.zeros(2))
    assert u_raw == 5.0
    np.testing.assert_allclose(u_norm, 5.0 / 9.0, rtol=1e-15)


def test_physics_loss_exact():
    i = np.array([1 + 2j, 3 - 4j])
    assert physics_loss(i, i) == (0.0, 0.0)


def test_physics_loss_single_modulus():
    f_raw, f_norm = physics_loss(np.array([3 + 4j]), np.array([0j]))
    assert f_raw == 5.0 and f_norm == 1.0


def test_physics_loss_two_moduli():
    f_raw, f_norm = physics_loss(np.array([5.0 + 0j, 10j]), np.zeros(2, complex))
    assert f_raw == 7.5 and f_norm == 0.75


def test_physics_loss_accepts_current_sets():
    a = CurrentSet(np.array([3.0]), np.array([4.0]))
    b = CurrentSet(np.array([0.0]), np.array([0.0]))
    assert physics_loss(a, b) == (5.0, 1.0)


def test_combine_examples():
    assert combine(0.5, 0.5, 1.0, 0.0) == 0.5
    assert combine(0.2, 0.8, 0.5, 0.5) == 0.5
    assert combine(1.0, 1.0, 0.0, 1.0) == 1.0


def test_combine_is_the_weighted_sum():
    rng = np.random.default_rng(5)
    for _ in range(200):
        u, f = rng.uniform(0, 1, 2)
        l1, l2 = rng.uniform(0, 1, 2)
        assert combine(u, f, l1, l2) == l1 * u + l2 * f
        np.testing.assert_allclose(
            combine(2 * u, 2 * f, l1, l2), 2 * combine(u, f, l1, l2), rtol=1e-12
        )


def test_combine_rejects_bad_weights():
    with pytest.raises(ValueError, match="nonnegative"):
        combine(0.5, 0.5, -0.1, 0.5)
    with pytest.raises(ValueError, match="finite"):
        combine(np.inf, 0.0, 1.0, 0.0)


def test_norm_terms_bounded_over_random_batches():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        b = int(rng.integers(1, 32))
        d = int(rng.integers(1, 29))
        pred = rng.normal(0, rng.uniform(0.01, 100), (b, d))
        true = rng.normal(0, 1, (b, d))
        _, u_norm = data_loss(pred, true)
        assert 0.0 <= u_norm <= 1.0
        ip = rng.normal(size=(b, d)) + 1j * rng.normal(size=(b, d))
        it = ip + rng.normal(0, rng.uniform(1e-6, 10), (b, d)) * np.exp(
            1j * rng.uniform(0, 2 * np.pi, (b, d))
        )
        _, f_norm = physics_loss(ip, it)
        assert 0.0 <= f_norm <= 1.0


def test_normalization_scale_invariant():
    # scaling the error values themselves; adding them onto targets first
    # would re-test float cancellation, not the mean/max ratio
    rng = np.random.default_rng(11)
    err = rng.normal(size=(16, 28))
    zeros = np.zeros_like(err)
    ierr = rng.normal(size=(16, 14)) + 1j * rng.normal(size=(16, 14))
    izeros = np.zeros_like(ierr)
    _, u_base = data_loss(err, zeros)
    _, f_base = physics_loss(ierr, izeros)
    for scale in (1e-6, 0.5, 3.0, 1e7):
        _, u_scaled = data_loss(scale * err, zeros)
        np.testing.assert_allclose(u_scaled, u_base, rtol=1e-12)
        _, f_scaled = physics_loss(scale * ierr, izeros)
        np.testing.assert_allclose(f_scaled, f_base, rtol=1e-12)


def test_empty_batch_rejected():
    with pytest.raises(ValueError, match="empty"):
        data_loss(np.empty((0, 4)), np.empty((0, 4)))
    with pytest.raises(ValueError, match="empty"):
        physics_loss(np.empty(0, complex), np.empty(0, complex))


def test_evaluate_losses_composes():
    rng = np.random.default_rng(8)
    vp, vt = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
    ip = rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3))
    it = rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3))
    parts = evaluate_losses(vp, vt, ip, it, 0.7, 0.3)
    assert parts.total == 0.7 * parts.u_norm + 0.3 * parts.f_norm
    assert 0 <= parts.u_norm <= 1 and 0 <= parts.f_norm <= 1
    assert parts.lambda1 == 0.7 and parts.lambda2 == 0.3
    assert np.isfinite(parts.u_raw) and np.isfinite(parts.f_raw)


# -- schedules ---------------------------------------------------------------


def test_schedule_starts_at_data_only():
    for regime in Regime:
        assert schedule_lambdas(LambdaSchedule(regime), 0) == (1.0, 0.0)


def test_schedule_increment10_midway():
    sched = LambdaSchedule(Regime.INCREMENT_10)
    assert schedule_lambdas(sched, 550) == (0.5, 0.5)


def test_schedule_increment50_clamps():
    sched = LambdaSchedule(Regime.INCREMENT_50)
    assert schedule_lambdas(sched, 999) == (0.0, 1.0)


def test_schedule_quarter_steps():
    sched = LambdaSchedule(Regime.INCREMENT_25)
    assert schedule_lambdas(sched, 99) == (1.0, 0.0)
    assert schedule_lambdas(sched, 100) == (0.75, 0.25)
    assert schedule_lambdas(sched, 399) == (0.25, 0.75)
    assert schedule_lambdas(sched, 400) == (0.0, 1.0)
    assert schedule_lambdas(sched, 10_000) == (0.0, 1.0)


def test_plain_nn_never_moves():
    sched = LambdaSchedule(Regime.PLAIN_NN)
    for epoch in (0, 1, 99, 100, 500, 10_000):
        assert schedule_lambdas(sched, epoch) == (1.0, 0.0)


def test_schedule_monotone_and_bounded():
    for regime in Regime:
        sched = LambdaSchedule(regime)
        prev1, prev2 = 1.0, 0.0
        for epoch in range(1300):
            l1, l2 = schedule_lambdas(sched, epoch)
            assert 0.0 <= l1 <= 1.0 and 0.0 <= l2 <= 1.0
            assert l1 <= prev1 + 1e-15 and l2 >= prev2 - 1e-15
            if 0.0 < l1 and l2 < 1.0:
                np.testing.assert_allclose(l1 + l2, 1.0, atol=1e-12)
            # weights only move at multiples of the period
            if epoch % sched.period != 0:
                assert (l1, l2) == (prev1, prev2)
            prev1, prev2 = l1, l2


def test_schedule_respects_custom_period():
    sched = LambdaSchedule(Regime.INCREMENT_50, period=10)
    assert schedule_lambdas(sched, 9) == (1.0, 0.0)
    assert schedule_lambdas(sched, 10) == (0.5, 0.5)
    assert schedule_lambdas(sched, 20) == (0.0, 1.0)


def test_schedule_validation():
    with pytest.raises(ValueError, match="period"):
        LambdaSchedule(Regime.PLAIN_NN, period=0)
    with pytest.raises(ValueError, match="lambda1_0"):
        LambdaSchedule(Regime.PLAIN_NN, lambda1_0=1.5)
    with pytest.raises(ValueError, match="epoch"):
        schedule_lambdas(LambdaSchedule(Regime.PLAIN_NN), -1)


def test_regime_ids_and_labels_stable():
    assert [r.value for r in Regime] == [0, 1, 2, 3, 4, 5]
    assert [r.label for r in Regime] == ["NN", "10%", "20%", "25%", "33%", "50%"]
    assert Regime.INCREMENT_33.increment == 0.33
    assert Regime.PLAIN_NN.increment == 0.0


def test_regime_from_label():
    assert Regime.from_label("NN") is Regime.PLAIN_NN
    assert Regime.from_label("nn") is Regime.PLAIN_NN
    assert Regime.from_label("50%") is Regime.INCREMENT_50
    assert Regime.from_label("increment_25") is Regime.INCREMENT_25
    assert Regime.from_label("10") is Regime.INCREMENT_10
    with pytest.raises(ValueError, match="unknown regime"):
        Regime.from_label("75%")
