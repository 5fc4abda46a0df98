#!/usr/bin/env python3
"""Compare measured slow-mode frequencies against the analytic branch.

Superposes free plane-wave pairs, evolves them, and extracts one frequency
per Fourier mode with the matrix-pencil fit.  The slow branch of the
linearized system is the positive root of w^2 + w_P w - k^2 c^2 / 2 = 0,
which approaches the Schrodinger value h k^2 / 2m as c grows.
"""

import argparse

import numpy as np

from pairfield.dynamics import PhysicalConstants, Potential, Stepper, init_adiabatic
from pairfield.lattice import ComplexLattice, make_grid
from pairfield.quantum import Wavefunction, from_wavefunction, plane_wave, state_to_wavefunction
from pairfield.scenario import dominant_frequency, slow_mode_frequency


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=float, default=10.0)
    ap.add_argument("--modes", type=int, default=8, help="fit k = 1..modes")
    ap.add_argument("--points", type=int, default=64)
    ap.add_argument("--steps", type=int, default=512)
    args = ap.parse_args()

    grid = make_grid([(args.points, 2.0 * np.pi)])
    k = PhysicalConstants(h=1.0, m=1.0, c=args.c)
    dt = 0.4 / k.planck_frequency

    values = np.zeros(grid.shape, dtype=np.complex128)
    for j in range(1, args.modes + 1):
        values += plane_wave(grid, (float(j),)).values
    psi0 = Wavefunction(ComplexLattice(grid, values / np.sqrt(args.modes)))
    p, q = from_wavefunction(psi0)
    state = init_adiabatic(p, q, k)

    series = np.empty((args.steps + 1, args.modes), dtype=np.complex128)
    series[0] = np.fft.fft(state_to_wavefunction(state).values)[1 : args.modes + 1]
    stepper = Stepper(grid, Potential.zero(grid), k, dt)
    for i in range(args.steps):
        state = stepper.step(state)
        series[i + 1] = np.fft.fft(state_to_wavefunction(state).values)[1 : args.modes + 1]

    print(f"c = {args.c}, dt = {dt:.3g}, {args.steps} steps")
    print(f"{'k':>4} {'measured':>14} {'analytic':>14} {'schrodinger':>14} {'rel err':>10}")
    for j in range(1, args.modes + 1):
        measured = dominant_frequency(series[:, j - 1], dt)
        analytic = slow_mode_frequency(float(j), k)
        schrod = k.h * j**2 / (2.0 * k.m)
        rel = abs(measured - analytic) / analytic
        print(f"{j:4d} {measured:14.8f} {analytic:14.8f} {schrod:14.8f} {rel:10.2e}")


if __name__ == "__main__":
    main()
