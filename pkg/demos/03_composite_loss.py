"""Anatomy of the composite training loss and the weight schedules.

The loss blends a normalized data term (MSE on rescaled states) with a
normalized physics term (mean modulus of the current-injection mismatch).
The blend weights move on a fixed schedule: every 100 epochs lambda1 steps
down by the regime's increment and lambda2 steps up, clamped to [0, 1].
"""

import numpy as np

from pinnse import (
    LambdaSchedule,
    Regime,
    backward,
    evaluate_losses,
    forward,
    generate_steady_state,
    init_mlp,
    load_case14,
    preprocess,
    schedule_lambdas,
)

if __name__ == "__main__":
    print("weights over epochs (lambda1 falls, lambda2 rises):")
    epochs = (0, 99, 100, 200, 400, 999)
    print("regime  " + "".join(f"  e={e:<11d}" for e in epochs))
    for regime in Regime:
        sched = LambdaSchedule(regime, period=100)
        cells = "".join(
            "  ({:.2f}, {:.2f})".format(*schedule_lambdas(sched, e)) for e in epochs)
        print(f"{regime.label:6s}{cells}")

    # evaluate the two terms on a freshly initialized network
    grid = load_case14()
    ds = generate_steady_state(grid, n=64, seed=5)
    tds, stats = preprocess(ds, np.arange(64))
    net = init_mlp(grid.n, seed=0)
    x, t, cur = tds.inputs()[:16], tds.targets()[:16], tds.currents()[:16]

    y = forward(net, x)
    alpha, beta = stats.target_inverse_coeffs()
    phys = alpha * y + beta
    vc = phys[:, :grid.n] * np.exp(1j * phys[:, grid.n:])
    i_pred = vc @ grid.y_bus.matrix.T

    parts = evaluate_losses(y, t, i_pred, cur, 0.5, 0.5)
    print(f"\nuntrained net, equal weights: u_norm {parts.u_norm:.4f} "
          f"f_norm {parts.f_norm:.4f} total {parts.total:.4f}")
    print("both normalized terms live in [0, 1] by construction")

    # one gradient step's worth of information, physics term only
    _, grads = backward(net, x, t, cur, stats, grid.y_bus, (0.0, 1.0))
    norms = [float(np.abs(g).max()) for g in grads.arrays()]
    print(f"physics-only gradient max |entries| per tensor: "
          + ", ".join(f"{n:.2e}" for n in norms))
