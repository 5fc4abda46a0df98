"""Shared helpers: band-limited random fields and standard grids."""

import numpy as np
import pytest

from pairfield.lattice import Grid, RealLattice, make_grid


def band_limited_real(grid: Grid, rng: np.random.Generator, cutoff: int = 4,
                      scale: float = 1.0) -> RealLattice:
    """Random real field whose spectrum lives below the given mode number.

    Low-mode support keeps finite-difference oracles accurate and makes the
    field resolution-independent; amplitude is normalized to max |f| = scale.
    """
    coef = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    for ax in range(grid.ndim):
        modes = np.rint(np.fft.fftfreq(grid.shape[ax], d=1.0 / grid.shape[ax]))
        keep = np.abs(modes) <= cutoff
        coef *= keep.reshape(tuple(-1 if j == ax else 1 for j in range(grid.ndim)))
    values = np.fft.ifftn(coef).real
    peak = np.max(np.abs(values))
    if peak > 0:
        values = values * (scale / peak)
    return RealLattice(grid, values)


def random_pair(grid: Grid, rng: np.random.Generator, cutoff: int = 4):
    """A random smooth (p, q) pair on the grid."""
    return (
        band_limited_real(grid, rng, cutoff),
        band_limited_real(grid, rng, cutoff),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture
def grid1d():
    return make_grid([(64, 2.0 * np.pi)])


@pytest.fixture
def grid2d():
    return make_grid([(32, 2.0 * np.pi), (32, 4.0 * np.pi)])


@pytest.fixture
def grid3d():
    return make_grid([(8, 2.0 * np.pi), (8, 2.0 * np.pi), (8, 2.0 * np.pi)])
