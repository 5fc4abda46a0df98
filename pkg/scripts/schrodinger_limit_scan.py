#!/usr/bin/env python3
"""Measure how fast the field dynamics converges to Schrodinger evolution.

Runs the same free Gaussian packet through the full canonical-pair
integrator and through a split-step Schrodinger oracle at several values
of the stiffness speed c, then fits the log-log slope of the final L2
deviation.  The slaving analysis predicts slope -2 (error ~ kappa^2 ~ 1/c^2).
"""

import argparse

import numpy as np

from pairfield.dynamics import PhysicalConstants, Potential, Stepper, init_adiabatic
from pairfield.lattice import make_grid
from pairfield.quantum import (
    SchrodingerStepper,
    from_wavefunction,
    gaussian_packet,
    l2_distance,
    state_to_wavefunction,
)


def run_one(grid, pot, w0, c, horizon):
    k = PhysicalConstants(h=1.0, m=1.0, c=c)
    # hit the horizon exactly while keeping dt under the stiffness bound
    steps = int(np.ceil(horizon * k.planck_frequency / 0.4))
    dt = horizon / steps
    p, q = from_wavefunction(w0)
    state = init_adiabatic(p, q, k)
    stepper = Stepper(grid, pot, k, dt)
    oracle = w0
    oracle_stepper = SchrodingerStepper(grid, pot, k, dt)
    for _ in range(steps):
        state = stepper.step(state)
        oracle = oracle_stepper.step(oracle)
    return steps, dt, l2_distance(state_to_wavefunction(state), oracle)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=float, nargs="+", default=[5.0, 10.0, 20.0, 40.0])
    ap.add_argument("--time", type=float, default=1.0, help="evolution horizon")
    ap.add_argument("--points", type=int, default=256)
    ap.add_argument("--box", type=float, default=20.0 * np.pi)
    ap.add_argument("--plot", default=None, help="write a log-log PNG here")
    args = ap.parse_args()

    grid = make_grid([(args.points, args.box)])
    pot = Potential.zero(grid)
    w0 = gaussian_packet(grid, center=(0.0,), width=1.0, carrier=(2.0,))

    errs = []
    print(f"{'c':>8} {'steps':>8} {'dt':>12} {'L2 deviation':>14}")
    for c in args.c:
        steps, dt, err = run_one(grid, pot, w0, c, args.time)
        errs.append(err)
        print(f"{c:8.1f} {steps:8d} {dt:12.4g} {err:14.4e}")

    slope = np.polyfit(np.log(args.c), np.log(errs), 1)[0]
    print(f"fitted log-log slope: {slope:.3f} (slaving predicts -2)")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(args.c, errs, "o-", label="measured")
        ref = errs[0] * (np.asarray(args.c) / args.c[0]) ** -2.0
        ax.loglog(args.c, ref, "k--", label="slope -2")
        ax.set_xlabel("c")
        ax.set_ylabel("L2 deviation at t = %g" % args.time)
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)
        print(f"wrote {args.plot}")


if __name__ == "__main__":
    main()
