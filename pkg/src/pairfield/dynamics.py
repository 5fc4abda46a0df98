"""Field state, energy functional, Hamilton equations and time stepping.

The model couples one slow canonical pair (p, q) to 2n stiff auxiliary pairs
(P_j, Q_j) and (pi_j, eta_j), one of each per spatial axis.  The energy
density is

    H = (1/2h) V (p^2 + q^2)
        - (m c^2 / 2h) sum_j (P_j^2 + Q_j^2 + pi_j^2 + eta_j^2)
        - (c/2) p sum_j d_j(Q_j + eta_j)
        - (c/2) sum_j (P_j + pi_j) d_j q

with {q, Q, eta} the coordinates and {p, P, pi} their conjugate momenta.
The auxiliary pairs oscillate at the stiff frequency m c^2 / h; when they
are slaved to the gradients of (p, q) the slow pair obeys a Schrodinger
equation for psi = (q + i p)/sqrt(2).

Time stepping is Strang splitting of two exactly-solvable sub-flows: a
site-wise rotation of (q, p) generated by the potential term, and the
V-independent part solved exactly per Fourier mode by a cached matrix
exponential.  With V = 0 a step is exact up to roundoff, which is what
makes the conservation checks in the test suite sharp.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .lattice import (
    ComplexLattice,
    Grid,
    RealLattice,
    derivative_values,
    integrate_values,
    require_same_grid,
)

# Policy bound on |dt| * (m c^2 / h): keeps the splitting commutator error,
# which couples to the stiff branch, under control.
DT_STIFFNESS_BOUND = 0.5


@dataclass(frozen=True)
class PhysicalConstants:
    """Base constants h, m, c plus the derived stiffness and slaving scales."""

    h: float = 1.0
    m: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("h", "m", "c"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"constant {name} must be positive and finite, got {v}")

    @property
    def planck_frequency(self) -> float:
        """Stiff oscillation frequency m*c^2/h of the auxiliary pairs."""
        return self.m * self.c**2 / self.h

    @property
    def kappa(self) -> float:
        """Slaving length h/(2*m*c) relating auxiliary fields to gradients."""
        return self.h / (2.0 * self.m * self.c)


@dataclass(frozen=True)
class FieldState:
    """All 2(1+2n) real fields at one instant; immutable."""

    grid: Grid
    p: RealLattice
    q: RealLattice
    P: tuple[RealLattice, ...]
    Q: tuple[RealLattice, ...]
    pi: tuple[RealLattice, ...]
    eta: tuple[RealLattice, ...]
    time: float = 0.0

    def __post_init__(self):
        n = self.grid.ndim
        object.__setattr__(self, "P", tuple(self.P))
        object.__setattr__(self, "Q", tuple(self.Q))
        object.__setattr__(self, "pi", tuple(self.pi))
        object.__setattr__(self, "eta", tuple(self.eta))
        for name in ("P", "Q", "pi", "eta"):
            group = getattr(self, name)
            if len(group) != n:
                raise ValueError(f"{name} must hold one lattice per axis ({n}), got {len(group)}")
        for lat in self.lattices():
            if lat.grid != self.grid:
                raise ValueError("all fields of a state must share one grid")
        if not np.isfinite(self.time):
            raise ValueError("state time must be finite")

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "FieldState":
        z = RealLattice.zeros(grid)
        n = grid.ndim
        return cls(grid, z, z, (z,) * n, (z,) * n, (z,) * n, (z,) * n, time)

    def lattices(self):
        yield self.p
        yield self.q
        yield from self.P
        yield from self.Q
        yield from self.pi
        yield from self.eta

    def stacked(self) -> np.ndarray:
        """Raw samples as one (2+4n, *grid.shape) array, order q,p,Q..,P..,eta..,pi.."""
        parts = [self.q.values, self.p.values]
        parts += [f.values for f in self.Q]
        parts += [f.values for f in self.P]
        parts += [f.values for f in self.eta]
        parts += [f.values for f in self.pi]
        return np.stack(parts)

    @classmethod
    def from_stacked(cls, grid: Grid, stacked: np.ndarray, time: float) -> "FieldState":
        n = grid.ndim
        if stacked.shape != (2 + 4 * n, *grid.shape):
            raise ValueError("stacked array has wrong shape")
        lat = [RealLattice(grid, a) for a in stacked]
        return cls(
            grid,
            p=lat[1],
            q=lat[0],
            Q=tuple(lat[2 : 2 + n]),
            P=tuple(lat[2 + n : 2 + 2 * n]),
            eta=tuple(lat[2 + 2 * n : 2 + 3 * n]),
            pi=tuple(lat[2 + 3 * n : 2 + 4 * n]),
            time=time,
        )


@dataclass(frozen=True)
class FieldDerivative:
    """Time derivative of every field of a state (no time member)."""

    grid: Grid
    p: RealLattice
    q: RealLattice
    P: tuple[RealLattice, ...]
    Q: tuple[RealLattice, ...]
    pi: tuple[RealLattice, ...]
    eta: tuple[RealLattice, ...]


class Potential:
    """External potential samples plus its gradient fields.

    If no gradient is supplied it is computed spectrally, which is only
    sensible for potentials that are smooth across the periodic seam; the
    shaped constructors (harmonic, linear, ...) supply analytic gradients
    in the grid's centered coordinates instead.
    """

    def __init__(self, grid: Grid, V: RealLattice, gradV: tuple[RealLattice, ...] | None = None):
        require_same_grid(V, V)  # shape sanity via construction
        if V.grid != grid:
            raise ValueError("potential samples must live on the given grid")
        if gradV is None:
            gradV = tuple(
                RealLattice(grid, derivative_values(grid, V.values, ax))
                for ax in range(grid.ndim)
            )
        gradV = tuple(gradV)
        if len(gradV) != grid.ndim:
            raise ValueError("need one gradient component per axis")
        for g in gradV:
            if g.grid != grid:
                raise ValueError("gradient components must share the potential's grid")
        self.grid = grid
        self.V = V
        self.gradV = gradV
        self.is_zero = not np.any(V.values)

    @classmethod
    def zero(cls, grid: Grid) -> "Potential":
        z = RealLattice.zeros(grid)
        return cls(grid, z, (z,) * grid.ndim)

    @classmethod
    def harmonic(cls, grid: Grid, mass: float, omega: float) -> "Potential":
        """V = (1/2) mass omega^2 |x|^2 in centered coordinates."""
        mesh = grid.centered_mesh()
        r2 = sum(x * x for x in mesh)
        V = 0.5 * mass * omega**2 * np.broadcast_to(r2, grid.shape)
        grad = tuple(
            RealLattice(grid, np.broadcast_to(mass * omega**2 * x, grid.shape))
            for x in mesh
        )
        return cls(grid, RealLattice(grid, V), grad)

    @classmethod
    def linear(cls, grid: Grid, g: list[float]) -> "Potential":
        """V = sum_j g_j x_j in centered coordinates (a uniform force -g)."""
        if len(g) != grid.ndim:
            raise ValueError("need one slope component per axis")
        mesh = grid.centered_mesh()
        V = sum(gj * x for gj, x in zip(g, mesh))
        grad = tuple(
            RealLattice(grid, np.full(grid.shape, float(gj))) for gj in g
        )
        return cls(grid, RealLattice(grid, np.broadcast_to(V, grid.shape)), grad)

    @classmethod
    def gaussian_well(cls, grid: Grid, depth: float, width: float) -> "Potential":
        """V = -depth * exp(-|x|^2 / (2 width^2)) in centered coordinates."""
        if width <= 0:
            raise ValueError("width must be positive")
        mesh = grid.centered_mesh()
        r2 = np.broadcast_to(sum(x * x for x in mesh), grid.shape)
        V = -depth * np.exp(-r2 / (2.0 * width**2))
        grad = tuple(
            RealLattice(grid, -V * x / width**2) for x in np.broadcast_arrays(*mesh)
        )
        return cls(grid, RealLattice(grid, V), grad)


def _sum_derivatives(grid: Grid, groups: tuple[RealLattice, ...]) -> np.ndarray:
    """sum_j d_j f_j for a vector of fields (spectral divergence)."""
    out = np.zeros(grid.shape)
    for ax, f in enumerate(groups):
        out += derivative_values(grid, f.values, ax)
    return out


def hamiltonian_density(s: FieldState, pot: Potential, k: PhysicalConstants) -> RealLattice:
    """Pointwise energy density of the state under the given potential."""
    grid = s.grid
    if pot.grid != grid:
        raise ValueError("potential and state live on different grids")
    p, q = s.p.values, s.q.values
    wp = k.planck_frequency
    dens = (0.5 / k.h) * pot.V.values * (p * p + q * q)
    fast2 = np.zeros(grid.shape)
    for f in (*s.P, *s.Q, *s.pi, *s.eta):
        fast2 += f.values * f.values
    dens -= 0.5 * wp * fast2
    div_Qeta = _sum_derivatives(grid, tuple(
        RealLattice(grid, a.values + b.values) for a, b in zip(s.Q, s.eta)
    ))
    dens -= 0.5 * k.c * p * div_Qeta
    for ax in range(grid.ndim):
        dq = derivative_values(grid, q, ax)
        dens -= 0.5 * k.c * (s.P[ax].values + s.pi[ax].values) * dq
    return RealLattice(grid, dens)


def total_energy(s: FieldState, pot: Potential, k: PhysicalConstants) -> float:
    return float(integrate_values(s.grid, hamiltonian_density(s, pot, k).values))


def equations_of_motion(s: FieldState, pot: Potential, k: PhysicalConstants) -> FieldDerivative:
    """Right-hand side of the Hamilton field equations.

    Sign pattern: d/dt(coordinate) = +dH/d(momentum) and
    d/dt(momentum) = -dH/d(coordinate) with coordinates {q, Q, eta} and
    momenta {p, P, pi}; the test suite checks every component against a
    central-difference functional derivative of total_energy.
    """
    grid = s.grid
    if pot.grid != grid:
        raise ValueError("potential and state live on different grids")
    wp = k.planck_frequency
    halfc = 0.5 * k.c
    Vh = pot.V.values / k.h
    p, q = s.p.values, s.q.values

    div_Qeta = np.zeros(grid.shape)
    div_Ppi = np.zeros(grid.shape)
    for ax in range(grid.ndim):
        div_Qeta += derivative_values(grid, s.Q[ax].values + s.eta[ax].values, ax)
        div_Ppi += derivative_values(grid, s.P[ax].values + s.pi[ax].values, ax)

    dq = Vh * p - halfc * div_Qeta
    dp = -Vh * q - halfc * div_Ppi

    dQ, dP, deta, dpi = [], [], [], []
    for ax in range(grid.ndim):
        grad_q = derivative_values(grid, q, ax)
        grad_p = derivative_values(grid, p, ax)
        dQ.append(RealLattice(grid, -wp * s.P[ax].values - halfc * grad_q))
        dP.append(RealLattice(grid, wp * s.Q[ax].values - halfc * grad_p))
        deta.append(RealLattice(grid, -wp * s.pi[ax].values - halfc * grad_q))
        dpi.append(RealLattice(grid, wp * s.eta[ax].values - halfc * grad_p))

    return FieldDerivative(
        grid,
        p=RealLattice(grid, dp),
        q=RealLattice(grid, dq),
        P=tuple(dP),
        Q=tuple(dQ),
        pi=tuple(dpi),
        eta=tuple(deta),
    )


def init_adiabatic(p: RealLattice, q: RealLattice, k: PhysicalConstants) -> FieldState:
    """Build a state whose auxiliary pairs are slaved to the gradients of (p, q).

    Q_i = eta_i = kappa * d_i p and P_i = pi_i = -kappa * d_i q, which makes
    the auxiliary pairs instantaneously stationary; this is the starting
    point of every Schrodinger-regime run.
    """
    grid = require_same_grid(p, q)
    kap = k.kappa
    Q, P = [], []
    for ax in range(grid.ndim):
        Q.append(RealLattice(grid, kap * derivative_values(grid, p.values, ax)))
        P.append(RealLattice(grid, -kap * derivative_values(grid, q.values, ax)))
    Q = tuple(Q)
    P = tuple(P)
    return FieldState(grid, p=p, q=q, P=P, Q=Q, pi=P, eta=Q, time=0.0)


def adiabatic_residual(s: FieldState, k: PhysicalConstants) -> float:
    """Worst relative deviation of the auxiliary fields from their slaved values.

    Returns max over axes and over the four slaving relations of
    ||actual - predicted||_2 / max(||predicted||_2, tiny).
    """
    grid = s.grid
    kap = k.kappa
    worst = 0.0
    floor = 1e-300
    for ax in range(grid.ndim):
        pred_coord = kap * derivative_values(grid, s.p.values, ax)
        pred_mom = -kap * derivative_values(grid, s.q.values, ax)
        for actual, pred in (
            (s.Q[ax].values, pred_coord),
            (s.eta[ax].values, pred_coord),
            (s.P[ax].values, pred_mom),
            (s.pi[ax].values, pred_mom),
        ):
            denom = max(float(np.linalg.norm(pred)), floor)
            worst = max(worst, float(np.linalg.norm(actual - pred)) / denom)
    return worst


def _mode_matrices(grid: Grid, k: PhysicalConstants, dt: float) -> np.ndarray:
    """exp(dt*A) for every retained Fourier mode, stacked (modes, d, d).

    A(kvec) collects the V-independent equations of motion in Fourier space,
    with the same Nyquist-zeroed derivative symbols the real-space operators
    use, so the stepper and equations_of_motion describe one discrete system.
    Layout matches FieldState.stacked(): q, p, Q_1..n, P_1..n, eta_1..n,
    pi_1..n.  The last axis is stored in rfft (non-negative frequency) form.
    """
    n = grid.ndim
    d = 2 + 4 * n
    kshape = (*grid.shape[:-1], grid.shape[-1] // 2 + 1)
    syms = []
    for ax in range(n):
        full = grid.derivative_symbol(ax)
        sym = full[: kshape[-1]] if ax == n - 1 else full
        syms.append(sym.reshape(tuple(-1 if j == ax else 1 for j in range(n))))
    wp = k.planck_frequency
    halfc = 0.5 * k.c

    A = np.zeros((*kshape, d, d), dtype=np.complex128)
    iq, ip = 0, 1
    for ax in range(n):
        iQ, iP = 2 + ax, 2 + n + ax
        ieta, ipi = 2 + 2 * n + ax, 2 + 3 * n + ax
        dsym = np.broadcast_to(syms[ax], kshape)
        A[..., iq, iQ] = -halfc * dsym
        A[..., iq, ieta] = -halfc * dsym
        A[..., ip, iP] = -halfc * dsym
        A[..., ip, ipi] = -halfc * dsym
        A[..., iQ, iP] = -wp
        A[..., iQ, iq] = -halfc * dsym
        A[..., iP, iQ] = wp
        A[..., iP, ip] = -halfc * dsym
        A[..., ieta, ipi] = -wp
        A[..., ieta, iq] = -halfc * dsym
        A[..., ipi, ieta] = wp
        A[..., ipi, ip] = -halfc * dsym
    return expm(A.reshape(-1, d, d) * dt)


_MODE_CACHE: dict[tuple, np.ndarray] = {}


def _cached_mode_matrices(grid: Grid, k: PhysicalConstants, dt: float) -> np.ndarray:
    key = (grid.points, grid.lengths, k.h, k.m, k.c, dt)
    mats = _MODE_CACHE.get(key)
    if mats is None:
        mats = _mode_matrices(grid, k, dt)
        if len(_MODE_CACHE) >= 32:
            _MODE_CACHE.pop(next(iter(_MODE_CACHE)))
        _MODE_CACHE[key] = mats
    return mats


def check_dt_policy(k: PhysicalConstants, dt: float, allow_large_dt: bool = False):
    if dt == 0 or not np.isfinite(dt):
        raise ValueError(f"dt must be nonzero and finite, got {dt}")
    if abs(dt) * k.planck_frequency > DT_STIFFNESS_BOUND:
        msg = (
            f"|dt|*stiff frequency = {abs(dt) * k.planck_frequency:.3g} exceeds the "
            f"policy bound {DT_STIFFNESS_BOUND}"
        )
        if not allow_large_dt:
            raise ValueError(msg)
        warnings.warn(msg)


class Stepper:
    """Precomputed Strang-splitting stepper for one (grid, constants, potential, dt).

    step() applies: half-step site-wise rotation of (q, p) by V*dt/(2h),
    exact per-mode flow of the V-independent system over dt, and the
    closing half rotation.  Reusable across many steps; all precomputed
    tables are read-only.
    """

    def __init__(
        self,
        grid: Grid,
        pot: Potential,
        k: PhysicalConstants,
        dt: float,
        allow_large_dt: bool = False,
    ):
        if pot.grid != grid:
            raise ValueError("potential lives on a different grid")
        check_dt_policy(k, dt, allow_large_dt)
        self.grid = grid
        self.potential = pot
        self.constants = k
        self.dt = float(dt)
        self._modes = _cached_mode_matrices(grid, k, self.dt)
        self._rotate = not pot.is_zero
        if self._rotate:
            theta = pot.V.values * (self.dt / (2.0 * k.h))
            self._cos = np.cos(theta)
            self._sin = np.sin(theta)
        self._axes = tuple(range(1, grid.ndim + 1))

    def _rotate_qp(self, stacked: np.ndarray):
        q = stacked[0].copy()
        p = stacked[1]
        stacked[0] = q * self._cos + p * self._sin
        stacked[1] = p * self._cos - q * self._sin

    def step(self, s: FieldState) -> FieldState:
        if s.grid != self.grid:
            raise ValueError("state grid does not match stepper grid")
        F = s.stacked()
        if self._rotate:
            self._rotate_qp(F)
        Fh = np.fft.rfftn(F, axes=self._axes)
        d = F.shape[0]
        u = Fh.reshape(d, -1).T[..., None]  # (modes, d, 1)
        u = self._modes @ u
        Fh = u[..., 0].T.reshape(Fh.shape)
        F = np.fft.irfftn(Fh, s=self.grid.shape, axes=self._axes)
        if self._rotate:
            self._rotate_qp(F)
        return FieldState.from_stacked(self.grid, F, s.time + self.dt)


_STEPPER_CACHE: dict[tuple, Stepper] = {}


def step_full(
    s: FieldState,
    pot: Potential,
    k: PhysicalConstants,
    dt: float,
    allow_large_dt: bool = False,
) -> FieldState:
    """One Strang step of the full dynamics; convenience wrapper over Stepper.

    Steppers are cached per (grid, potential object, constants, dt); hot
    loops should hold a Stepper directly.
    """
    key = (s.grid.points, s.grid.lengths, id(pot), k.h, k.m, k.c, float(dt))
    stepper = _STEPPER_CACHE.get(key)
    if stepper is None or stepper.potential is not pot:
        stepper = Stepper(s.grid, pot, k, dt, allow_large_dt)
        if len(_STEPPER_CACHE) >= 16:
            _STEPPER_CACHE.pop(next(iter(_STEPPER_CACHE)))
        _STEPPER_CACHE[key] = stepper
    return stepper.step(s)
