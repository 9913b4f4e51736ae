"""Solve the bundled 14-bus network and a small custom grid.

Shows the grid model, the admittance matrix, and the Newton-Raphson solve,
then checks the solved state against the scheduled injections.
"""

import numpy as np

from pinnse import (
    Branch,
    Bus,
    BusKind,
    GridModel,
    injections,
    load_case14,
    solve_newton_raphson,
)

if __name__ == "__main__":
    grid = load_case14()
    print(f"bundled case: {grid.n} buses, {len(grid.branches)} branches, "
          f"base {grid.base_mva:.0f} MVA")

    v = solve_newton_raphson(grid)
    print("\n bus   |V| (pu)   angle (deg)")
    for i in range(grid.n):
        print(f"  {i + 1:2d}   {v.v_mag[i]:8.5f}   {np.degrees(v.v_ang[i]):10.4f}")

    # the solved state reproduces the scheduled load at every PQ bus
    inj = injections(v, grid.y_bus)
    pq = grid.pq_indices
    sched_p = grid.gen_p - grid.load_p
    print(f"\nmax PQ-bus P mismatch: {np.abs(inj.p[pq] - sched_p[pq]).max():.2e} pu")

    # a grid can also be built by hand
    toy = GridModel.from_components(
        buses=(
            Bus(0, BusKind.SLACK, v_setpoint=1.02),
            Bus(1, BusKind.PQ, load_p=0.4, load_q=0.15),
            Bus(2, BusKind.PQ, load_p=0.25, load_q=0.08),
        ),
        branches=(
            Branch(0, 1, r=0.02, x=0.12, b_charging=0.03),
            Branch(1, 2, r=0.04, x=0.18),
            Branch(0, 2, r=0.05, x=0.2),
        ),
    )
    vt = solve_newton_raphson(toy)
    print("\n3-bus toy voltages (pu):", np.round(vt.v_mag, 5))
