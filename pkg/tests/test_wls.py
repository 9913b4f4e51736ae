"""WLS estimator: exact recovery, noise behavior, batch mode, file output."""

import csv

import numpy as np
import pytest

from pinnse.dataset import NoiseSpec, add_noise, generate_steady_state, generate_outage_trajectory
from pinnse.grid import Branch, Bus, BusKind, GridModel, load_case14
from pinnse.wls import (
    MeasurementSet,
    WLSError,
    estimate_wls,
    measurement_weights,
    save_wls_estimates,
    save_wls_stats,
    wls_batch,
)


@pytest.fixture(scope="module")
def case14():
    return load_case14()


@pytest.fixture(scope="module")
def steady(case14):
    return generate_steady_state(case14, n=40, seed=3)


@pytest.fixture(scope="module")
def outage(case14):
    return generate_outage_trajectory(case14, n=60, seed=3)


def test_measurement_set_validation():
    with pytest.raises(ValueError, match="even length"):
        MeasurementSet(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError, match="equal length"):
        MeasurementSet(np.zeros(4), np.ones(6))
    with pytest.raises(ValueError, match="positive"):
        MeasurementSet(np.zeros(4), np.array([1.0, 1.0, 0.0, 1.0]))
    with pytest.raises(ValueError, match="finite"):
        MeasurementSet(np.array([0.0, np.nan, 0.0, 0.0]), np.ones(4))
    ms = MeasurementSet(np.zeros(28), np.ones(28))
    assert ms.n_buses == 14


def test_weights_uniform_without_noise():
    np.testing.assert_array_equal(measurement_weights(np.random.default_rng(0).normal(size=8)), np.ones(8))


def test_weights_follow_inverse_variance():
    values = np.array([0.5, 0.0, -0.2, 0.001])  # P_1 P_2 Q_1 Q_2
    noise = NoiseSpec(p_sigma_rel=0.01, q_sigma_rel=0.001)
    w = measurement_weights(values, noise)
    np.testing.assert_allclose(w[0], (0.01 * 0.5) ** -2, rtol=1e-14)
    # exact zero and tiny entries hit the sigma floor
    np.testing.assert_allclose(w[1], (0.01 * 0.01) ** -2, rtol=1e-14)
    np.testing.assert_allclose(w[2], (0.001 * 0.2) ** -2, rtol=1e-14)
    np.testing.assert_allclose(w[3], (0.001 * 0.01) ** -2, rtol=1e-14)


def test_weights_zero_sigma_stays_uniform():
    values = np.array([0.5, 0.1, -0.2, 0.3])
    w = measurement_weights(values, NoiseSpec(p_sigma_rel=0.0, q_sigma_rel=0.01))
    assert w[0] == 1.0 and w[1] == 1.0
    assert w[2] == (0.01 * 0.2) ** -2


def test_flat_profile_is_fixed_point_of_zero_measurements():
    # no shunts, no charging, unity setpoints: flat voltage injects nothing,
    # so the all-zero measurement vector has zero residual at the start
    buses = (Bus(0, BusKind.SLACK), Bus(1, BusKind.PQ), Bus(2, BusKind.PQ))
    branches = (Branch(0, 1, r=0.02, x=0.1), Branch(1, 2, r=0.03, x=0.15))
    grid = GridModel.from_components(buses, branches)
    est = estimate_wls(grid, MeasurementSet(np.zeros(6), np.ones(6)))
    np.testing.assert_array_equal(est.v_mag, np.ones(3))
    np.testing.assert_array_equal(est.v_ang, np.zeros(3))


def _recovery_errors(grid, ds):
    result = wls_batch(grid, ds)
    assert not result.failures
    mag = np.abs(result.v_mag - np.stack([s.v_true.v_mag for s in ds.samples]))
    ang = np.abs(result.v_ang - np.stack([s.v_true.v_ang for s in ds.samples]))
    return mag.max(), ang.max()


def test_noiseless_recovery_steady(case14, steady):
    mag, ang = _recovery_errors(case14, steady)
    assert mag < 1e-7 and ang < 1e-7


def test_noiseless_recovery_outage(case14, outage):
    # covers both the pre-trip and tripped operating points
    mag, ang = _recovery_errors(case14, outage)
    assert mag < 1e-7 and ang < 1e-7


def test_recovery_insensitive_to_weights(case14, steady):
    # consistent measurements are recovered exactly whatever the weighting
    sample = steady.samples[7]
    values = np.concatenate([sample.p_meas, sample.q_meas])
    weights = np.random.default_rng(5).uniform(0.1, 10.0, size=values.size)
    est = estimate_wls(case14, MeasurementSet(values, weights))
    np.testing.assert_allclose(est.v_mag, sample.v_true.v_mag, atol=1e-7)
    np.testing.assert_allclose(est.v_ang, sample.v_true.v_ang, atol=1e-7)


def test_error_grows_with_noise(case14):
    ds = generate_steady_state(case14, n=50, seed=21)
    means = []
    for rel in (0.01, 0.001, 0.0001):
        noisy = add_noise(ds, NoiseSpec(p_sigma_rel=rel, q_sigma_rel=rel, seed=9))
        summary = wls_batch(case14, noisy).error_summary()
        assert summary["n_failed"] == 0
        means.append(summary["mean_mag_mae"])
    assert means[0] > means[1] > means[2] > 0.0


def test_noisy_error_bounded(case14, steady):
    noisy = add_noise(steady, NoiseSpec(p_sigma_rel=0.01, q_sigma_rel=0.01, seed=2))
    summary = wls_batch(case14, noisy).error_summary()
    assert 0.0 < summary["mean_mag_mae"] < 0.02
    assert 0.0 < summary["mean_ang_mae"] < 0.02


def test_estimate_rejects_wrong_size(case14):
    with pytest.raises(ValueError, match="buses"):
        estimate_wls(case14, MeasurementSet(np.zeros(6), np.ones(6)))


def test_estimate_reports_nonconvergence(case14, steady):
    sample = steady.samples[0]
    values = np.concatenate([sample.p_meas, sample.q_meas])
    meas = MeasurementSet(values, np.ones(values.size))
    with pytest.raises(WLSError, match="residual norm"):
        estimate_wls(case14, meas, max_iter=1)


def test_batch_collects_failures(case14, steady):
    result = wls_batch(case14, steady, max_iter=1)
    assert len(result.failures) == len(steady)
    assert np.all(np.isnan(result.v_mag))
    with pytest.raises(WLSError, match="every sample failed"):
        result.error_summary()


def test_batch_rejects_mismatched_grid(steady):
    buses = (Bus(0, BusKind.SLACK), Bus(1, BusKind.PQ))
    grid = GridModel.from_components(buses, (Branch(0, 1, r=0.01, x=0.1),))
    with pytest.raises(ValueError, match="bus counts"):
        wls_batch(grid, steady)


def test_estimates_csv_roundtrip(tmp_path, case14, steady):
    result = wls_batch(case14, steady)
    path = tmp_path / "estimates.csv"
    save_wls_estimates(path, result)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["sample", "vmag_1"]
    assert rows[0][-2:] == ["mag_mae", "ang_mae"]
    assert len(rows) == len(steady) + 1
    assert float(rows[1][1]) == result.v_mag[0, 0]
    assert float(rows[3][-2]) == result.mag_mae[2]


def test_stats_csv_matches_summary(tmp_path, case14, steady):
    result = wls_batch(case14, steady)
    path = tmp_path / "stats.csv"
    save_wls_stats(path, result)
    with open(path, newline="") as fh:
        rows = {row[0]: row[1] for row in csv.reader(fh)}
    summary = result.error_summary()
    assert float(rows["mean_mag_mae"]) == summary["mean_mag_mae"]
    assert int(rows["n_failed"]) == 0
