"""Periodic n-dimensional lattices with spectral calculus.

Everything downstream (field dynamics, charge integrals, the wavefunction
map) is built on three primitives defined here: FFT-based differentiation,
trapezoid-exact quadrature on a periodic grid, and the L2 pairing.  All
fields are sampled on uniform periodic grids of 1 to 3 axes with an even
number of points per axis; the Nyquist mode's derivative coefficient is
zeroed so differentiation maps real fields to real fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_AXES = 3
MIN_POINTS = 4


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice geometry: points and physical length per axis.

    Spacing, wavenumber tables and derivative symbols are derived on demand;
    only (points, lengths) are stored, so two grids compare equal iff they
    describe the same geometry.
    """

    points: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        if not (1 <= len(self.points) <= MAX_AXES):
            raise ValueError(f"grid must have 1..{MAX_AXES} axes, got {len(self.points)}")
        if len(self.points) != len(self.lengths):
            raise ValueError("points and lengths must have the same number of axes")
        for ax, (n, length) in enumerate(zip(self.points, self.lengths)):
            if int(n) != n or n < MIN_POINTS:
                raise ValueError(f"axis {ax}: need at least {MIN_POINTS} points, got {n}")
            if n % 2 != 0:
                raise ValueError(f"axis {ax}: point count must be even, got {n}")
            if not (np.isfinite(length) and length > 0):
                raise ValueError(f"axis {ax}: length must be positive and finite, got {length}")
        object.__setattr__(self, "points", tuple(int(n) for n in self.points))
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))

    @property
    def ndim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(L / n for n, L in zip(self.points, self.lengths))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def num_sites(self) -> int:
        return int(np.prod(self.points))

    def wavenumbers(self, axis: int) -> np.ndarray:
        """DFT wavenumbers 2*pi*m/L for m = -N/2..N/2-1, in FFT storage order."""
        n, length = self._axis(axis)
        return 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)

    def derivative_symbol(self, axis: int) -> np.ndarray:
        """Multiplier i*k applied in Fourier space by d/dx_axis.

        The Nyquist mode's coefficient is set to zero, which keeps the
        derivative of a real field real.
        """
        n, _ = self._axis(axis)
        sym = 1j * self.wavenumbers(axis)
        sym[n // 2] = 0.0
        return sym

    def coords(self, axis: int) -> np.ndarray:
        """Sample coordinates along one axis, in [0, L)."""
        n, length = self._axis(axis)
        return np.arange(n) * (length / n)

    def centered_coords(self, axis: int) -> np.ndarray:
        """Sample coordinates measured from the grid center, in [-L/2, L/2)."""
        return self.coords(axis) - self.lengths[axis] / 2.0

    def centered_mesh(self) -> tuple[np.ndarray, ...]:
        """Centered coordinate arrays broadcastable to the full lattice shape."""
        return tuple(
            self.centered_coords(ax).reshape(
                tuple(-1 if j == ax else 1 for j in range(self.ndim))
            )
            for ax in range(self.ndim)
        )

    def _axis(self, axis: int) -> tuple[int, float]:
        if not (0 <= axis < self.ndim):
            raise ValueError(f"axis {axis} out of range for {self.ndim}-axis grid")
        return self.points[axis], self.lengths[axis]


def make_grid(axes: list[tuple[int, float]]) -> Grid:
    """Build a Grid from (points, length) pairs, one per axis."""
    if len(axes) == 0:
        raise ValueError("grid needs at least one axis")
    return Grid(tuple(n for n, _ in axes), tuple(L for _, L in axes))


def _coerce(grid: Grid, values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)  # own the buffer so freezing it is safe
    if arr.shape != grid.shape:
        raise ValueError(f"values shape {arr.shape} does not match grid shape {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("lattice values must be finite (no NaN/Inf)")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RealLattice:
    """One double-precision real sample per lattice site, row-major."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _coerce(self.grid, self.values, np.float64))

    @classmethod
    def zeros(cls, grid: Grid) -> "RealLattice":
        return cls(grid, np.zeros(grid.shape))


@dataclass(frozen=True)
class ComplexLattice:
    """One double-precision complex sample per lattice site, row-major."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _coerce(self.grid, self.values, np.complex128))

    @classmethod
    def zeros(cls, grid: Grid) -> "ComplexLattice":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))


def require_same_grid(a, b) -> Grid:
    if a.grid != b.grid:
        raise ValueError("lattices live on different grids")
    return a.grid


def derivative_values(grid: Grid, values: np.ndarray, axis: int) -> np.ndarray:
    """Spectral d/dx_axis of a raw sample array (real or complex)."""
    sym = grid.derivative_symbol(axis).reshape(
        tuple(-1 if j == axis else 1 for j in range(values.ndim))
    )
    out = np.fft.ifft(sym * np.fft.fft(values, axis=axis), axis=axis)
    if not np.iscomplexobj(values):
        return out.real.copy()
    return out


def spectral_derivative(f: RealLattice, axis: int) -> RealLattice:
    """Differentiate along one axis by FFT; exact for band-limited fields."""
    return RealLattice(f.grid, derivative_values(f.grid, f.values, axis))


def integrate_values(grid: Grid, values: np.ndarray):
    """Trapezoid quadrature over the periodic grid (= plain sum x cell volume)."""
    return values.sum() * grid.cell_volume


def integrate(f: RealLattice) -> float:
    return float(integrate_values(f.grid, f.values))


def inner_product(a, b):
    """L2 pairing integral of a*b over the grid (bilinear, no conjugation).

    Real inputs give a float; complex inputs keep their imaginary part.
    """
    grid = require_same_grid(a, b)
    out = integrate_values(grid, a.values * b.values)
    return complex(out) if np.iscomplexobj(out) else float(out)
