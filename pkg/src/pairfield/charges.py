"""Conserved charges of the field dynamics and their time-series export.

The translation charge density is t_j = p d_j q + sum_i (P_i d_j Q_i +
pi_i d_j eta_i).  All reported charges flip its sign, m_j = -int t_j, so
that a plane wave exp(ikx) embedded as (p, q) carries momentum +k and the
charges line up with quantum expectation values of -i d_j.  Angular
momentum moments are taken about the grid center; the phase charge is the
total pair intensity (1/2) int (p^2 + q^2 + sum of auxiliary squares),
conserved because every term of the energy density is invariant under a
simultaneous rotation of all pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    FieldState,
    PhysicalConstants,
    Potential,
    adiabatic_residual,
    total_energy,
)
from .lattice import (
    Grid,
    RealLattice,
    derivative_values,
    integrate_values,
    require_same_grid,
)

BOUNDARY_SHELL_FRACTION = 0.1
BOUNDARY_MASS_WARN = 1e-8


@dataclass(frozen=True)
class ChargeRecord:
    """All scalar diagnostics of one sampled instant.

    angular_momentum holds the strictly upper triangle of L_lk in row-major
    order (L_12, L_13, L_23 in 3D; empty in 1D), which makes antisymmetry
    structural rather than numerical.
    """

    time: float
    energy: float
    momentum: tuple[float, ...]
    angular_momentum: tuple[float, ...]
    phase_charge: float
    adiabatic_residual: float
    norm: float

    def __post_init__(self):
        object.__setattr__(self, "momentum", tuple(float(v) for v in self.momentum))
        object.__setattr__(
            self, "angular_momentum", tuple(float(v) for v in self.angular_momentum)
        )
        n = len(self.momentum)
        if len(self.angular_momentum) != n * (n - 1) // 2:
            raise ValueError("angular momentum entry count does not match dimension")
        scalars = (self.time, self.energy, self.phase_charge, self.adiabatic_residual, self.norm)
        if not all(np.isfinite(v) for v in (*scalars, *self.momentum, *self.angular_momentum)):
            raise ValueError("charge record entries must be finite")

    @property
    def ndim(self) -> int:
        return len(self.momentum)

    def angular_momentum_matrix(self) -> np.ndarray:
        n = self.ndim
        mat = np.zeros((n, n))
        idx = 0
        for l in range(n):
            for k in range(l + 1, n):
                mat[l, k] = self.angular_momentum[idx]
                mat[k, l] = -self.angular_momentum[idx]
                idx += 1
        return mat


def upper_triangle_labels(ndim: int) -> list[str]:
    return [f"L_{l + 1}{k + 1}" for l in range(ndim) for k in range(l + 1, ndim)]


def momentum_density(s: FieldState) -> tuple[RealLattice, ...]:
    """Translation charge density t_j as built from the fields directly.

    Note the reported charges carry the opposite sign; see momentum_charge.
    """
    grid = s.grid
    out = []
    for ax in range(grid.ndim):
        dens = s.p.values * derivative_values(grid, s.q.values, ax)
        for P, Q in zip(s.P, s.Q):
            dens += P.values * derivative_values(grid, Q.values, ax)
        for pi, eta in zip(s.pi, s.eta):
            dens += pi.values * derivative_values(grid, eta.values, ax)
        out.append(RealLattice(grid, dens))
    return tuple(out)


def momentum_charge(s: FieldState) -> np.ndarray:
    """m_j = -int t_j; a plane wave exp(ikx) pair carries +k per unit norm."""
    return np.array(
        [-integrate_values(s.grid, d.values) for d in momentum_density(s)]
    )


def momentum_charge_reduced(p: RealLattice, q: RealLattice) -> np.ndarray:
    """Slow-pair part alone: m_j = int(-p d_j q).

    Equals the expectation of -i d_j in psi = (q + ip)/sqrt(2) identically
    (the difference is the integral of a total derivative).
    """
    grid = require_same_grid(p, q)
    return np.array(
        [
            -integrate_values(grid, p.values * derivative_values(grid, q.values, ax))
            for ax in range(grid.ndim)
        ]
    )


def momentum_correction_term(
    p: RealLattice, q: RealLattice, k: PhysicalConstants
) -> np.ndarray:
    """Auxiliary-pair contribution under slaving: int(-2 kappa^2 d_i p d_j d_i q).

    Satisfies momentum_charge(init_adiabatic(p, q)) =
    momentum_charge_reduced(p, q) + this term, exactly up to roundoff.
    """
    grid = require_same_grid(p, q)
    kap2 = k.kappa**2
    out = np.zeros(grid.ndim)
    for i in range(grid.ndim):
        dip = derivative_values(grid, p.values, i)
        diq = derivative_values(grid, q.values, i)
        for j in range(grid.ndim):
            out[j] += -2.0 * kap2 * integrate_values(
                grid, dip * derivative_values(grid, diq, j)
            )
    return out


def boundary_mass_fraction(s: FieldState, shell: float = BOUNDARY_SHELL_FRACTION) -> float:
    """Fraction of the (p, q) norm in the outer shell of the domain.

    A site is in the shell when its centered coordinate lies beyond
    (1 - shell) of the half-width along any axis.
    """
    grid = s.grid
    density = 0.5 * (s.p.values**2 + s.q.values**2)
    total = float(np.sum(density))
    if total == 0.0:
        return 0.0
    mask = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.ndim):
        x = grid.centered_coords(ax).reshape(
            tuple(-1 if j == ax else 1 for j in range(grid.ndim))
        )
        mask |= np.abs(x) > (1.0 - shell) * (grid.lengths[ax] / 2.0)
    return float(np.sum(density[mask])) / total


def angular_momentum_charge(
    s: FieldState, origin_shift: tuple[float, ...] | None = None
) -> np.ndarray:
    """L_lk = int [x_l (-t_k) - x_k (-t_l)] about the grid center.

    origin_shift moves the reference point to center + shift; doing so
    changes L_lk by exactly shift_k m_l - shift_l m_k.  Periodic coordinate
    weighting is only meaningful for states far from the seam, so a warning
    fires when more than a trace of the norm sits in the outer shell.
    """
    grid = s.grid
    n = grid.ndim
    if n < 2:
        raise ValueError("angular momentum needs at least two axes")
    if origin_shift is None:
        origin_shift = (0.0,) * n
    if len(origin_shift) != n:
        raise ValueError("origin shift must have one component per axis")
    frac = boundary_mass_fraction(s)
    if frac > BOUNDARY_MASS_WARN:
        warnings.warn(
            f"{frac:.3g} of the norm lies in the outer {BOUNDARY_SHELL_FRACTION:.0%} "
            "shell; position-weighted charges are unreliable near the periodic seam"
        )
    dens = momentum_density(s)
    coords = [
        grid.centered_coords(ax).reshape(
            tuple(-1 if j == ax else 1 for j in range(n))
        )
        - origin_shift[ax]
        for ax in range(n)
    ]
    L = np.zeros((n, n))
    for l in range(n):
        for k in range(l + 1, n):
            val = -integrate_values(
                grid, coords[l] * dens[k].values - coords[k] * dens[l].values
            )
            L[l, k] = val
            L[k, l] = -val
    return L


def phase_charge(s: FieldState) -> float:
    """Total pair intensity (1/2) int (p^2 + q^2 + all auxiliary squares).

    Conserved by the dynamics for any potential: both split sub-flows are
    pointwise or per-mode rotations that preserve it exactly.
    """
    acc = s.p.values**2 + s.q.values**2
    for f in (*s.P, *s.Q, *s.pi, *s.eta):
        acc = acc + f.values**2
    return 0.5 * float(integrate_values(s.grid, acc))


def pair_norm(s: FieldState) -> float:
    """int |psi|^2 with psi = (q + ip)/sqrt(2), from the slow pair alone."""
    return 0.5 * float(
        integrate_values(s.grid, s.p.values**2 + s.q.values**2)
    )


def momentum_balance_residual(
    history: list[FieldState], pot: Potential, k: PhysicalConstants
) -> np.ndarray:
    """Balance-law defect d/dt m_reduced + (1/h) int |psi|^2 grad V per sample.

    Uses centered differences in time over the given equally spaced
    samples, so the result validates the evolved trajectory end to end;
    returns shape (len(history) - 2, ndim) for the interior samples.
    """
    if len(history) < 3:
        raise ValueError("need at least three samples for a centered difference")
    grid = history[0].grid
    times = np.array([s.time for s in history])
    spacing = np.diff(times)
    dt = spacing[0]
    if dt <= 0 or not np.allclose(spacing, dt, rtol=1e-9, atol=0.0):
        raise ValueError("samples must be equally spaced in time")
    for s in history:
        if s.grid != grid:
            raise ValueError("all samples must share one grid")
    if pot.grid != grid:
        raise ValueError("potential lives on a different grid")

    reduced = np.array([momentum_charge_reduced(s.p, s.q) for s in history])
    out = np.empty((len(history) - 2, grid.ndim))
    for i in range(1, len(history) - 1):
        s = history[i]
        dens = 0.5 * (s.p.values**2 + s.q.values**2)
        force = np.array(
            [
                integrate_values(grid, dens * pot.gradV[ax].values)
                for ax in range(grid.ndim)
            ]
        )
        out[i - 1] = (reduced[i + 1] - reduced[i - 1]) / (2.0 * dt) + force / k.h
    return out


def compute_charge_record(s: FieldState, pot: Potential, k: PhysicalConstants) -> ChargeRecord:
    """Evaluate every diagnostic of one state against one potential."""
    n = s.grid.ndim
    if n >= 2:
        L = angular_momentum_charge(s)
        upper = tuple(L[l, kk] for l in range(n) for kk in range(l + 1, n))
    else:
        upper = ()
    return ChargeRecord(
        time=s.time,
        energy=total_energy(s, pot, k),
        momentum=tuple(momentum_charge(s)),
        angular_momentum=upper,
        phase_charge=phase_charge(s),
        adiabatic_residual=adiabatic_residual(s, k),
        norm=pair_norm(s),
    )


def write_charges_csv(path, records: list[ChargeRecord]):
    """One row per record; shortest round-trip float formatting."""
    if not records:
        raise ValueError("no records to write")
    n = records[0].ndim
    header = ["time", "energy"]
    header += [f"m_{j + 1}" for j in range(n)]
    header += upper_triangle_labels(n)
    header += ["phase_charge", "adiabatic_residual", "norm"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for rec in records:
            if rec.ndim != n:
                raise ValueError("records mix dimensions")
            row = [rec.time, rec.energy, *rec.momentum, *rec.angular_momentum,
                   rec.phase_charge, rec.adiabatic_residual, rec.norm]
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
