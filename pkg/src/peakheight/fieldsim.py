"""Direct simulation of Gaussian fields on grids and peak harvesting.

Realizations are exact draws from the multivariate normal law of the grid
values: the grid covariance is factorized once and applied to blocks of
standard normal vectors. Local maxima are strict and compared with the two
axis neighbours along every axis, or with every surrounding lattice point
when ``full=True``; boundary points never count. The axis-only test also
accepts saddles whose principal axes are diagonal to the lattice, so it
overcounts maxima at any resolution; use ``full=True`` when comparing with
Kac-Rice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._parallel import chunk_bounds, map_ordered, rng
from .covmodel import Kernel, ProcessModel
from .errors import ContractError, GridTooLarge, NoPeaks, NotPSDGrid
from .gaussian import cholesky_psd
from .scalespace import field_covariance

#: Realizations per chunk; each chunk has its own random stream.
REALIZATION_CHUNK = 256
#: Default memory budget (bytes) for the grid covariance and its factor.
MEMORY_BUDGET = 3.0e9
_TAG_SIM = 30


@dataclass(frozen=True)
class GridSpec:
    """Regular lattice given per axis as ``(start, stop, step)``.

    ``stop`` is included when it lies on the lattice (up to rounding).
    """

    axes: tuple

    def __post_init__(self):
        axes = tuple(tuple(float(x) for x in ax) for ax in self.axes)
        if not axes:
            raise ContractError("grid needs at least one axis")
        for start, stop, step in axes:
            if not step > 0:
                raise ContractError("grid step must be positive")
            if int(math.floor((stop - start) / step + 1e-9)) + 1 < 3:
                raise ContractError("each grid axis needs at least 3 points")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def linspace(cls, *axes: tuple) -> "GridSpec":
        """Grid from ``(start, stop, num)`` triples, endpoints included."""
        return cls(tuple((a, b, (b - a) / (int(n) - 1)) for a, b, n in axes))

    @property
    def shape(self) -> tuple:
        return tuple(int(math.floor((stop - start) / step + 1e-9)) + 1
                     for start, stop, step in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def coords(self, axis: int) -> np.ndarray:
        start, _, step = self.axes[axis]
        return start + step * np.arange(self.shape[axis])

    def points(self) -> np.ndarray:
        """Lattice points in C order, shape ``(size, ndim)``."""
        mesh = np.meshgrid(*(self.coords(a) for a in range(self.ndim)), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class PeakSampleSet:
    """Heights and locations of grid local maxima over many realizations.

    Attributes
    ----------
    heights : (n,) array
    locations : (n, ndim) array
    realization : (n,) int array
        Index of the realization each peak came from.
    nsims, seed : int
    axis_names : tuple of str
    """

    heights: np.ndarray
    locations: np.ndarray
    realization: np.ndarray
    nsims: int
    seed: int
    axis_names: tuple = field(default=("t",))

    def __len__(self):
        return self.heights.size


def find_local_maxima(values, full: bool = False) -> np.ndarray:
    """Flat C-order indices of strict interior local maxima of one array.

    ``full`` compares against all ``3^ndim - 1`` surrounding points instead
    of the ``2 ndim`` axis neighbours.

    Examples
    --------
    >>> find_local_maxima(np.array([0.0, 1.0, 0.0, 2.0, 2.0, 0.0]))
    array([1])
    """
    v = np.asarray(values, dtype=float)
    if any(n < 3 for n in v.shape):
        raise ContractError("each axis needs at least 3 points")
    mask = _backend.local_maxima_mask(v.reshape(1, -1), v.shape, full)
    return np.flatnonzero(mask[0])


def _draw(chol: np.ndarray, seed: int, chunk: int, lo: int, hi: int) -> np.ndarray:
    # realizations lo..hi-1, which all live in chunk ``chunk``
    z = rng(seed, _TAG_SIM, chunk).standard_normal((hi - lo, chol.shape[0]))
    return z @ chol.T


def _sample_peaks(chol: np.ndarray, shape: tuple, points: np.ndarray, nsims: int, seed: int,
                  workers, axis_names, full: bool = False) -> PeakSampleSet:
    def run(item):
        c, (lo, hi) = item
        y = _draw(chol, seed, c, lo, hi)
        r, p = np.nonzero(_backend.local_maxima_mask(y, shape, full))
        return y[r, p], p, r + lo

    parts = map_ordered(run, list(enumerate(chunk_bounds(nsims, REALIZATION_CHUNK))), workers)
    if parts:
        h = np.concatenate([x[0] for x in parts])
        p = np.concatenate([x[1] for x in parts])
        r = np.concatenate([x[2] for x in parts])
    else:
        h, p, r = np.zeros(0), np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    return PeakSampleSet(h, points[p], r.astype(np.int64), int(nsims), int(seed), axis_names)


def _factor(cov: np.ndarray) -> np.ndarray:
    return cholesky_psd(cov, error=NotPSDGrid)


def _check_budget(n: int, budget: float):
    need = 3.0 * 8.0 * n * n
    if need > budget:
        raise GridTooLarge(f"{n} grid points need ~{need / 1e9:.1f} GB (budget {budget / 1e9:.1f} GB)")


def simulate_process_1d(model: ProcessModel, grid: GridSpec, nsims: int, seed: int,
                        workers: int | None = None,
                        memory_budget: float = MEMORY_BUDGET) -> PeakSampleSet:
    """Simulate a 1D process on ``grid`` and collect its local maxima.

    Raises
    ------
    NotPSDGrid
        If the grid covariance cannot be factorized even with jitter.
    """
    if grid.ndim != 1:
        raise ContractError("simulate_process_1d needs a one-axis grid")
    if nsims < 0:
        raise ContractError("nsims must be >= 0")
    _check_budget(grid.size, memory_budget)
    pts = grid.coords(0)
    model.check_domain(pts)
    chol = _factor(model.covariance_matrix(pts))
    return _sample_peaks(chol, grid.shape, pts[:, None], nsims, seed, workers, ("t",))


def grid_values_1d(model: ProcessModel, grid: GridSpec, nsims: int, seed: int,
                   workers: int | None = None,
                   memory_budget: float = MEMORY_BUDGET) -> np.ndarray:
    """Realizations on ``grid`` as an ``(nsims, n)`` array.

    Uses the same random streams as :func:`simulate_process_1d`, so its
    peaks are exactly the local maxima of these rows.
    """
    if grid.ndim != 1:
        raise ContractError("grid_values_1d needs a one-axis grid")
    if nsims < 0:
        raise ContractError("nsims must be >= 0")
    _check_budget(grid.size, memory_budget)
    pts = grid.coords(0)
    model.check_domain(pts)
    chol = _factor(model.covariance_matrix(pts))

    def run(item):
        c, (lo, hi) = item
        return _draw(chol, seed, c, lo, hi)

    parts = map_ordered(run, list(enumerate(chunk_bounds(nsims, REALIZATION_CHUNK))), workers)
    return np.concatenate(parts) if parts else np.zeros((0, grid.size))


def simulate_scale_space(N: int, grid: GridSpec, nu_grid: GridSpec, nsims: int, seed: int,
                         kernel: Kernel | None = None, workers: int | None = None,
                         memory_budget: float = MEMORY_BUDGET,
                         full: bool = True) -> PeakSampleSet:
    """Simulate the scale space field on the lattice ``grid x nu_grid``.

    Parameters
    ----------
    N : int
        Spatial dimension, 1 or 2.
    grid : GridSpec
        ``N`` spatial axes.
    nu_grid : GridSpec
        One axis of bandwidths (all positive).
    full : bool
        Full lattice neighbourhood for the maxima test (default). ``False``
        restores the axis-neighbour test.

    Raises
    ------
    GridTooLarge
        If the covariance and its factor exceed ``memory_budget`` bytes.
    """
    if N not in (1, 2):
        raise ContractError("N must be 1 or 2")
    if grid.ndim != N or nu_grid.ndim != 1:
        raise ContractError("grid must have N axes and nu_grid one axis")
    nus = nu_grid.coords(0)
    if np.any(nus <= 0):
        raise ContractError("bandwidths must be positive")
    lattice = GridSpec(grid.axes + nu_grid.axes)
    _check_budget(lattice.size, memory_budget)
    pts = lattice.points()
    cov = field_covariance(pts[:, :N], pts[:, N], N, kernel)
    chol = _factor(cov)
    del cov
    names = tuple(f"t{i + 1}" for i in range(N)) + ("nu",)
    return _sample_peaks(chol, lattice.shape, pts, nsims, seed, workers, names, full)


def empirical_tail(samples: PeakSampleSet, u) -> tuple[np.ndarray, np.ndarray]:
    """Fraction of peaks above each threshold and its binomial standard error.

    Raises
    ------
    NoPeaks
    """
    n = len(samples)
    if n == 0:
        raise NoPeaks("no peaks recorded")
    h = np.sort(samples.heights)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    tail = (n - np.searchsorted(h, u, side="right")) / n
    return tail, np.sqrt(tail * (1.0 - tail) / n)
