"""Generate the two benchmark datasets and walk through preprocessing.

Steady state: independent load-variation snapshots. Outage: a quasi-static
generator-trip trajectory. Both carry clean solved states and clean current
injections; measurement noise is a separate, reproducible step.
"""

import tempfile
from pathlib import Path

import numpy as np

from pinnse import (
    NoiseSpec,
    add_noise,
    generate_outage_trajectory,
    generate_steady_state,
    load_case14,
    load_dataset,
    preprocess,
    save_dataset,
)

if __name__ == "__main__":
    grid = load_case14()

    steady = generate_steady_state(grid, n=192, seed=1)
    outage = generate_outage_trajectory(grid, n=400, seed=2)
    print(f"steady: {len(steady)} samples   outage: {len(outage)} samples")

    # the outage trajectory dips and recovers; watch the slack pick up the
    # tripped generator's output
    p_slack = np.array([s.p_meas[0] for s in outage.samples])
    print(f"slack P before trip {p_slack[:40].mean():.3f} pu, "
          f"just after {p_slack[45:85].mean():.3f} pu, "
          f"end of recovery {p_slack[-40:].mean():.3f} pu")

    noisy = add_noise(steady, NoiseSpec(p_sigma_rel=0.01, q_sigma_rel=0.01, seed=3))
    clean_in, noisy_in = steady.inputs(), noisy.inputs()
    nz = clean_in != 0.0  # zero-injection buses stay exactly zero under noise
    rel = np.abs(noisy_in[nz] / clean_in[nz] - 1.0)
    print(f"applied 1% relative noise; observed mean |rel| {rel.mean():.4f}")

    # rescaling is fit on training rows only; constant columns are reported
    train_rows = np.arange(150)
    tds, stats = preprocess(noisy, train_rows)
    x = tds.inputs()
    print(f"rescaled inputs: min {x[train_rows].min():.3f} max {x[train_rows].max():.3f}")
    print(f"{len(stats.warnings)} constant-feature warnings, e.g. {stats.warnings[0]!r}")

    # datasets round-trip through CSV with a JSON sidecar
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "steady.csv"
        save_dataset(noisy, path)
        back = load_dataset(path)
        same = np.array_equal(back.inputs(), noisy.inputs())
        print(f"CSV round trip exact: {same}")
