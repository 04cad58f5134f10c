"""Time partitions and the L2 projection between piecewise-constant spaces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sps

from .errors import GridMismatch, InvalidGrid

#: breakpoints closer than this fraction of the horizon are treated as equal
COINCIDENCE = 1e-13


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Partition 0 = t_0 < t_1 < ... < t_M = T with intervals (t_{m-1}, t_m]."""

    t_points: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_points, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise InvalidGrid("a time grid needs at least one interval")
        if t[0] != 0.0:
            raise InvalidGrid("time grids start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise InvalidGrid("time points must be strictly increasing")
        if np.any(np.diff(t) <= COINCIDENCE * t[-1]):
            # breakpoints this close are merged by the projection
            raise InvalidGrid(f"time steps must exceed {COINCIDENCE:g} T")
        t.setflags(write=False)
        object.__setattr__(self, "t_points", t)

    @classmethod
    def uniform(cls, T: float, M: int) -> "TimeGrid":
        t = np.linspace(0.0, T, int(M) + 1)
        t[-1] = T
        return cls(t)

    @property
    def T(self) -> float:
        return float(self.t_points[-1])

    @property
    def M(self) -> int:
        return len(self.t_points) - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.t_points)

    def key(self) -> tuple:
        return tuple(self.t_points.tolist())

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and self.M == other.M and np.array_equal(self.t_points, other.t_points)

    def __hash__(self):
        return hash(self.key())

    def shifted(self, offset: float) -> np.ndarray:
        """Absolute times of the breakpoints for a window starting at ``offset``."""
        return self.t_points + offset


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Piecewise-constant-in-time values: ``values[m]`` lives on interval m."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != self.grid.M:
            raise GridMismatch(f"{v.shape[0]} values for a grid with {self.grid.M} intervals")
        object.__setattr__(self, "values", v)

    def integral(self) -> np.ndarray:
        return np.tensordot(self.grid.dt, self.values, axes=(0, 0))

    def l2_norm(self) -> float:
        v = self.values.reshape(self.grid.M, -1)
        return float(np.sqrt(np.sum(self.grid.dt[:, None] * v**2)))


def _overlaps(src: np.ndarray, dst: np.ndarray, T: float):
    """Single merged sweep over both breakpoint lists.

    Returns (dst_index, src_index, overlap_length) triplets, one per piece of
    the common refinement.
    """
    tol = COINCIDENCE * T
    rows, cols, lens = [], [], []
    i = j = 0
    left = 0.0
    n_src, n_dst = len(src) - 1, len(dst) - 1
    while i < n_src and j < n_dst:
        a, b = src[i + 1], dst[j + 1]
        if abs(a - b) <= tol:
            # keep the source breakpoint so that source pieces sum to dt_src
            right = a
            rows.append(j), cols.append(i), lens.append(right - left)
            i += 1
            j += 1
        elif a < b:
            right = a
            rows.append(j), cols.append(i), lens.append(right - left)
            i += 1
        else:
            right = b
            rows.append(j), cols.append(i), lens.append(right - left)
            j += 1
        left = right
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(lens)


@lru_cache(maxsize=256)
def _projection_cached(src_key: tuple, dst_key: tuple) -> sps.csr_matrix:
    src = np.asarray(src_key)
    dst = np.asarray(dst_key)
    rows, cols, lens = _overlaps(src, dst, dst[-1])
    dt_dst = np.diff(dst)
    P = sps.csr_matrix((lens / dt_dst[rows], (rows, cols)), shape=(len(dst) - 1, len(src) - 1))
    P.sum_duplicates()
    return P


def projection_matrix(src: TimeGrid, dst: TimeGrid) -> sps.csr_matrix:
    """Matrix of the averaging map from P0(src) onto P0(dst)."""
    if abs(src.T - dst.T) > COINCIDENCE * max(src.T, dst.T):
        raise GridMismatch(f"horizons differ: {src.T} vs {dst.T}")
    return _projection_cached(src.key(), dst.key())


def project_values(values: np.ndarray, src: TimeGrid, dst: TimeGrid) -> np.ndarray:
    """Project an ``(src.M, ...)`` array onto ``dst``; columns are independent."""
    if src == dst:
        return np.array(values, dtype=float, copy=True)
    P = projection_matrix(src, dst)
    v = np.asarray(values, dtype=float)
    out = P @ v.reshape(src.M, -1)
    return out.reshape((dst.M,) + v.shape[1:])


def project(series: TimeSeries, dst_grid: TimeGrid) -> TimeSeries:
    return TimeSeries(dst_grid, project_values(series.values, series.grid, dst_grid))


def compose_projection_check(grid_a: TimeGrid, grid_b: TimeGrid, series: TimeSeries):
    """Return (L2-norm defect, integral defect) of projecting ``series`` to ``grid_b``.

    The norm defect is never positive for an L2 projection and the integral
    defect vanishes up to rounding.
    """
    if series.grid != grid_a:
        raise GridMismatch("series does not live on grid_a")
    out = project(series, grid_b)
    norm_defect = out.l2_norm() - series.l2_norm()
    integral_defect = out.integral() - series.integral()
    return norm_defect, integral_defect
