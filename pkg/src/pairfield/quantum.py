"""Wavefunction side of the field-charge dictionary.

psi = (q + ip)/sqrt(2) maps the slow canonical pair to a complex amplitude
whose quantum expectation values match the field charges: the reduced
momentum charge equals <-i hbar d_j> exactly on a periodic grid, and the
angular momentum charge converges to <L_lk> as the stiffness grows.  The
module also carries an independent split-step solver for

    i hbar d_t psi = -(hbar^2 / 2m) laplacian psi + V psi

used as the reference in limit tests, plus the Ehrenfest balance check
d<p_j>/dt = <-d_j V> with a scan over the proportionality constant between
momentum charge and -i d_j that shows hbar is the only consistent choice.

This module deliberately reaches into no stepping machinery of the field
dynamics; cross-checks against it are black-box by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import FieldState, PhysicalConstants, Potential
from .lattice import (
    ComplexLattice,
    Grid,
    RealLattice,
    derivative_values,
    integrate_values,
    require_same_grid,
)

NORM_TOLERANCE = 1e-10
BOUNDARY_SHELL_FRACTION = 0.1
BOUNDARY_MASS_WARN = 1e-8


@dataclass(frozen=True)
class Wavefunction:
    """A complex amplitude on a grid plus the hbar convention it carries."""

    psi: ComplexLattice
    hbar: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.hbar) and self.hbar > 0):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar}")

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    @property
    def values(self) -> np.ndarray:
        return self.psi.values

    def norm(self) -> float:
        """Total probability int |psi|^2."""
        return float(integrate_values(self.grid, np.abs(self.values) ** 2))

    def normalized(self) -> "Wavefunction":
        n = self.norm()
        if n <= 0:
            raise ValueError("cannot normalize a zero wavefunction")
        return Wavefunction(ComplexLattice(self.grid, self.values / np.sqrt(n)), self.hbar)


def to_wavefunction(p: RealLattice, q: RealLattice, hbar: float = 1.0) -> Wavefunction:
    """psi = (q + i p) / sqrt(2), pointwise."""
    grid = require_same_grid(p, q)
    return Wavefunction(
        ComplexLattice(grid, (q.values + 1j * p.values) / np.sqrt(2.0)), hbar
    )


def from_wavefunction(w: Wavefunction) -> tuple[RealLattice, RealLattice]:
    """Inverse map: (p, q) = (sqrt(2) Im psi, sqrt(2) Re psi)."""
    root2 = np.sqrt(2.0)
    return (
        RealLattice(w.grid, root2 * w.values.imag),
        RealLattice(w.grid, root2 * w.values.real),
    )


def state_to_wavefunction(s: FieldState, hbar: float = 1.0) -> Wavefunction:
    return to_wavefunction(s.p, s.q, hbar)


def plane_wave(grid: Grid, k_vector, amplitude: float = 1.0) -> Wavefunction:
    """amplitude * exp(i k.x) / sqrt(volume); k must fit the periodic box."""
    k_vector = tuple(float(v) for v in k_vector)
    if len(k_vector) != grid.ndim:
        raise ValueError("wave vector needs one component per axis")
    phase = np.zeros(grid.shape)
    for ax, kj in enumerate(k_vector):
        cycles = kj * grid.lengths[ax] / (2.0 * np.pi)
        if abs(cycles - round(cycles)) > 1e-9:
            raise ValueError(
                f"k[{ax}] = {kj} is not a harmonic of the box "
                f"(needs an integer multiple of 2*pi/{grid.lengths[ax]})"
            )
        x = grid.coords(ax).reshape(tuple(-1 if j == ax else 1 for j in range(grid.ndim)))
        phase = phase + kj * x
    values = amplitude * np.exp(1j * phase) / np.sqrt(grid.volume)
    return Wavefunction(ComplexLattice(grid, values))


def gaussian_packet(grid: Grid, center, width: float, carrier) -> Wavefunction:
    """Normalized packet exp(i k0.(x-x0)) exp(-|x-x0|^2 / 4 width^2).

    width is the position-space standard deviation of |psi|^2; the result
    is normalized on the grid (so wraparound tails are absorbed into the
    amplitude rather than the norm).
    """
    center = tuple(float(v) for v in center)
    carrier = tuple(float(v) for v in carrier)
    if len(center) != grid.ndim or len(carrier) != grid.ndim:
        raise ValueError("center and carrier need one component per axis")
    if not (np.isfinite(width) and width > 0):
        raise ValueError(f"width must be positive, got {width}")
    r2 = np.zeros(grid.shape)
    phase = np.zeros(grid.shape)
    for ax in range(grid.ndim):
        x = grid.centered_coords(ax).reshape(
            tuple(-1 if j == ax else 1 for j in range(grid.ndim))
        )
        dx = x - center[ax]
        r2 = r2 + dx * dx
        phase = phase + carrier[ax] * dx
    values = np.exp(1j * phase - r2 / (4.0 * width**2))
    w = Wavefunction(ComplexLattice(grid, values))
    return w.normalized()


def l2_distance(a: Wavefunction, b: Wavefunction) -> float:
    """sqrt(int |a - b|^2)."""
    if a.grid != b.grid:
        raise ValueError("wavefunctions live on different grids")
    return float(
        np.sqrt(integrate_values(a.grid, np.abs(a.values - b.values) ** 2))
    )


def _check_norm(w: Wavefunction, allow_unnormalized: bool):
    if allow_unnormalized:
        return
    n = w.norm()
    if abs(n - 1.0) > 1e-6:
        raise ValueError(
            f"wavefunction norm {n} is not 1; pass allow_unnormalized=True "
            "to take the raw integral"
        )


def _warn_boundary_mass(grid: Grid, density: np.ndarray):
    total = float(np.sum(density))
    if total == 0.0:
        return
    mask = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.ndim):
        x = grid.centered_coords(ax).reshape(
            tuple(-1 if j == ax else 1 for j in range(grid.ndim))
        )
        mask |= np.abs(x) > (1.0 - BOUNDARY_SHELL_FRACTION) * (grid.lengths[ax] / 2.0)
    frac = float(np.sum(density[mask])) / total
    if frac > BOUNDARY_MASS_WARN:
        warnings.warn(
            f"{frac:.3g} of the probability lies in the outer "
            f"{BOUNDARY_SHELL_FRACTION:.0%} shell; position-weighted "
            "expectations are unreliable near the periodic seam"
        )


def momentum_expectation(
    w: Wavefunction,
    hbar: float | None = None,
    allow_unnormalized: bool = False,
    return_imag: bool = False,
):
    """<p_j> = Re int psi* (-i hbar d_j psi).

    The raw integral is real up to roundoff (periodic integration by
    parts); return_imag=True also returns the imaginary defect vector so
    callers can assert it stays below 1e-11 * norm.
    """
    if hbar is None:
        hbar = w.hbar
    _check_norm(w, allow_unnormalized)
    grid = w.grid
    raw = np.empty(grid.ndim, dtype=np.complex128)
    for ax in range(grid.ndim):
        dpsi = derivative_values(grid, w.values, ax)
        raw[ax] = integrate_values(grid, np.conj(w.values) * (-1j * hbar) * dpsi)
    if return_imag:
        return raw.real.copy(), raw.imag.copy()
    return raw.real.copy()


def position_expectation(w: Wavefunction, allow_unnormalized: bool = False) -> np.ndarray:
    """<x_j> about the grid center, with the seam warning of all x-weighted integrals."""
    _check_norm(w, allow_unnormalized)
    grid = w.grid
    density = np.abs(w.values) ** 2
    _warn_boundary_mass(grid, density)
    out = np.empty(grid.ndim)
    for ax in range(grid.ndim):
        x = grid.centered_coords(ax).reshape(
            tuple(-1 if j == ax else 1 for j in range(grid.ndim))
        )
        out[ax] = integrate_values(grid, density * x)
    return out


def angular_momentum_expectation(
    w: Wavefunction, hbar: float | None = None, allow_unnormalized: bool = False
) -> np.ndarray:
    """<L_lk> = Re int psi* hbar (-i x_l d_k + i x_k d_l) psi, origin at grid center."""
    if hbar is None:
        hbar = w.hbar
    grid = w.grid
    n = grid.ndim
    if n < 2:
        raise ValueError("angular momentum needs at least two axes")
    _check_norm(w, allow_unnormalized)
    _warn_boundary_mass(grid, np.abs(w.values) ** 2)
    coords = [
        grid.centered_coords(ax).reshape(tuple(-1 if j == ax else 1 for j in range(n)))
        for ax in range(n)
    ]
    grads = [derivative_values(grid, w.values, ax) for ax in range(n)]
    L = np.zeros((n, n))
    conj = np.conj(w.values)
    for l in range(n):
        for k in range(l + 1, n):
            raw = integrate_values(
                grid, conj * (-1j * hbar) * (coords[l] * grads[k] - coords[k] * grads[l])
            )
            L[l, k] = raw.real
            L[k, l] = -raw.real
    return L


def force_expectation(w: Wavefunction, pot: Potential) -> np.ndarray:
    """int |psi|^2 (-d_j V): the right side of the momentum balance law."""
    if pot.grid != w.grid:
        raise ValueError("potential lives on a different grid")
    density = np.abs(w.values) ** 2
    return np.array(
        [
            -integrate_values(w.grid, density * pot.gradV[ax].values)
            for ax in range(w.grid.ndim)
        ]
    )


class SchrodingerStepper:
    """Split-step solver with cached phase tables for one (grid, V, constants, dt).

    One step is exp(-iV dt/2 hbar) F^-1 exp(-i hbar |k|^2 dt/2m) F
    exp(-iV dt/2 hbar); each factor is unitary, so the norm is preserved to
    roundoff regardless of dt.
    """

    def __init__(self, grid: Grid, pot: Potential, k: PhysicalConstants, dt: float):
        if pot.grid != grid:
            raise ValueError("potential lives on a different grid")
        if not (np.isfinite(dt) and dt > 0):
            raise ValueError(f"dt must be positive and finite, got {dt}")
        self.grid = grid
        self.potential = pot
        self.constants = k
        self.dt = float(dt)
        self._half_potential = np.exp(pot.V.values * (-0.5j * self.dt / k.h))
        k2 = np.zeros(grid.shape)
        for ax in range(grid.ndim):
            kax = grid.wavenumbers(ax).reshape(
                tuple(-1 if j == ax else 1 for j in range(grid.ndim))
            )
            k2 = k2 + kax * kax
        self._kinetic = np.exp(k2 * (-0.5j * k.h * self.dt / k.m))

    def step(self, w: Wavefunction) -> Wavefunction:
        if w.grid != self.grid:
            raise ValueError("wavefunction grid does not match stepper grid")
        values = w.values * self._half_potential
        values = np.fft.ifftn(np.fft.fftn(values) * self._kinetic)
        values = values * self._half_potential
        return Wavefunction(ComplexLattice(self.grid, values), w.hbar)


_SCHRODINGER_CACHE: dict[tuple, SchrodingerStepper] = {}


def schrodinger_step(
    w: Wavefunction, pot: Potential, k: PhysicalConstants, dt: float
) -> Wavefunction:
    """One split step of the reference Schrodinger solver (cached per setup)."""
    key = (w.grid.points, w.grid.lengths, id(pot), k.h, k.m, float(dt))
    stepper = _SCHRODINGER_CACHE.get(key)
    if stepper is None or stepper.potential is not pot:
        stepper = SchrodingerStepper(w.grid, pot, k, dt)
        if len(_SCHRODINGER_CACHE) >= 16:
            _SCHRODINGER_CACHE.pop(next(iter(_SCHRODINGER_CACHE)))
        _SCHRODINGER_CACHE[key] = stepper
    return stepper.step(w)


@dataclass(frozen=True)
class EhrenfestReport:
    """Both sides of d<p_j>/dt = <-d_j V> on interior samples, plus summaries.

    beta_scan maps each tried proportionality constant between the momentum
    charge and -i d_j to the residual it produces; the physical value hbar
    is the unique minimum.  order_estimate is the measured convergence
    order of the residual under halving of the sample rate (None when the
    history is too short to subsample).
    """

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    max_abs_residual: float
    order_estimate: float | None
    beta_scan: tuple[tuple[float, float], ...]
    hbar: float

    def __post_init__(self):
        if self.lhs.shape != self.rhs.shape or self.lhs.shape[0] != self.times.shape[0]:
            raise ValueError("lhs, rhs and times must be shape-matched")
        resid = float(np.max(np.abs(self.lhs - self.rhs))) if self.lhs.size else 0.0
        if not np.isclose(resid, self.max_abs_residual, rtol=1e-12, atol=1e-300):
            raise ValueError("stored residual does not match stored arrays")

    def to_json_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "max_abs_residual": self.max_abs_residual,
            "order_estimate": self.order_estimate,
            "beta_scan": [
                {"beta": b, "max_abs_residual": r} for b, r in self.beta_scan
            ],
            "hbar": self.hbar,
        }


def _as_wavefunctions(history, hbar: float) -> list[Wavefunction]:
    out = []
    for item in history:
        if isinstance(item, Wavefunction):
            out.append(Wavefunction(item.psi, hbar))
        elif isinstance(item, FieldState):
            out.append(to_wavefunction(item.p, item.q, hbar))
        else:
            raise TypeError(f"history items must be states or wavefunctions, got {type(item)}")
    return out


def _balance_arrays(
    wfs: list[Wavefunction], times: np.ndarray, pot: Potential, beta: float
):
    """Centered-difference lhs and pointwise rhs on interior samples."""
    dt = times[1] - times[0]
    mom = np.array(
        [beta * momentum_expectation(w, hbar=1.0, allow_unnormalized=True) for w in wfs]
    )
    lhs = (mom[2:] - mom[:-2]) / (2.0 * dt)
    rhs = np.array([force_expectation(w, pot) for w in wfs[1:-1]])
    return lhs, rhs


def ehrenfest_check(
    history,
    pot: Potential,
    k: PhysicalConstants,
    times=None,
    betas: tuple[float, ...] | None = None,
) -> EhrenfestReport:
    """Check d<p_j>/dt = <-d_j V> along a sampled trajectory.

    history: equally spaced FieldState or Wavefunction samples.  For
    FieldState samples the times are taken from the states; wavefunction
    histories must pass sample times explicitly.  The derivative is a
    second-order centered difference, so the residual of an accurate
    trajectory shrinks as the sample interval squared; order_estimate
    measures that by re-running on every second sample.
    """
    history = list(history)
    if len(history) < 3:
        raise ValueError("need at least three samples for a centered difference")
    if times is None:
        if not all(isinstance(s, FieldState) for s in history):
            raise ValueError("pass sample times explicitly for wavefunction histories")
        times = np.array([s.time for s in history])
    else:
        times = np.asarray(times, dtype=np.float64)
        if times.shape != (len(history),):
            raise ValueError("need exactly one time per sample")
    spacing = np.diff(times)
    if spacing[0] <= 0 or not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
        raise ValueError("samples must be equally spaced in time")

    hbar = k.h
    wfs = _as_wavefunctions(history, hbar)
    grid = wfs[0].grid
    if pot.grid != grid:
        raise ValueError("potential lives on a different grid")
    for w in wfs:
        if w.grid != grid:
            raise ValueError("all samples must share one grid")

    lhs, rhs = _balance_arrays(wfs, times, pot, hbar)
    resid = float(np.max(np.abs(lhs - rhs)))

    order = None
    if len(wfs) >= 5:
        coarse_lhs, coarse_rhs = _balance_arrays(wfs[::2], times[::2], pot, hbar)
        coarse = float(np.max(np.abs(coarse_lhs - coarse_rhs)))
        if resid > 0 and coarse > 0:
            order = float(np.log2(coarse / resid))

    if betas is None:
        betas = (hbar / 2.0, hbar, 2.0 * hbar)
    scan = []
    for beta in betas:
        blhs, brhs = _balance_arrays(wfs, times, pot, float(beta))
        scan.append((float(beta), float(np.max(np.abs(blhs - brhs)))))

    return EhrenfestReport(
        times=times[1:-1].copy(),
        lhs=lhs,
        rhs=rhs,
        max_abs_residual=resid,
        order_estimate=order,
        beta_scan=tuple(scan),
        hbar=hbar,
    )
