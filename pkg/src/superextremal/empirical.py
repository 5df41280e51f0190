"""
Pre-limit objects built from a batch of i.i.d. simulated processes: the
pointwise maximum M_n, the partial-maxima process M̃_n(u, t) over the first
⌊nu⌋ functions, and its empirical order statistics.

A batch is a (count, sites) array; row i is the i-th process X_{in}.
"""

import logging
from dataclasses import dataclass
from math import floor
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np
import numpy.typing as npt
import pandas as pd

from superextremal.errors import ArgumentError

if TYPE_CHECKING:
    from superextremal.ppp import PointMeasure

logger = logging.getLogger(__name__)

# Guards ⌊n u⌋ against n * u landing just below an integer in floating point.
FLOOR_TOLERANCE = 1e-9

Batch = Union[npt.NDArray[np.float64], Sequence[npt.ArrayLike]]


@dataclass(frozen=True, eq=False)
class CadlagMaxProcess:
    """Piecewise-constant running maxima: ``values[k]`` holds on [time_grid[k], time_grid[k + 1])."""

    time_grid: npt.NDArray[np.float64]
    values: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        times = np.array(self.time_grid, dtype=float, ndmin=1)
        values = np.array(self.values, dtype=float, ndmin=2)
        if times.ndim != 1 or values.shape[0] != times.size:
            raise ArgumentError(f"values shape {values.shape} does not match {times.size} times")
        if np.any(np.diff(times) < 0):
            raise ArgumentError("time grid must be sorted")
        if np.any(values < 0):
            raise ArgumentError("maxima processes are nonnegative")
        if np.any(np.diff(values, axis=0) < 0):
            raise ArgumentError("running maxima must be nondecreasing in time at every site")
        object.__setattr__(self, "time_grid", times)
        object.__setattr__(self, "values", values)

    @property
    def n_sites(self) -> int:
        return int(self.values.shape[1])

    @property
    def horizon(self) -> float:
        return float(self.time_grid[-1])

    def at(self, u: float) -> npt.NDArray[np.float64]:
        """Value at time u: the entry of the last grid time <= u, zero before the grid starts."""
        k = int(np.searchsorted(self.time_grid, u, side="right")) - 1
        if k < 0:
            return np.zeros(self.n_sites)
        return self.values[k].copy()

    def to_frame(self) -> pd.DataFrame:
        """Long (u, site, value) table for CSV export."""
        m, s = self.values.shape
        return pd.DataFrame(
            {
                "u": np.repeat(self.time_grid, s),
                "site": np.tile(np.arange(s), m),
                "value": self.values.ravel(),
            }
        )


def _as_batch(batch: Batch, n_sites: Optional[int] = None) -> npt.NDArray[np.float64]:
    if isinstance(batch, np.ndarray):
        array = batch.astype(float, copy=False)
    else:
        rows = [np.asarray(row, dtype=float) for row in batch]
        lengths = {row.size for row in rows}
        if len(lengths) > 1:
            raise ArgumentError(f"batch functions have inconsistent lengths {sorted(lengths)}")
        array = np.array(rows, dtype=float) if rows else np.zeros((0, n_sites or 0))
    if array.size == 0:
        width = array.shape[1] if array.ndim == 2 else 0
        return np.zeros((0, n_sites if n_sites is not None else width))
    if array.ndim != 2:
        raise ArgumentError(f"expected a (count, sites) batch, got shape {array.shape}")
    return array


def block_count(n: int, u: float) -> int:
    """⌊n u⌋, the number of functions active by time u."""
    if u < 0:
        raise ArgumentError(f"time must be nonnegative, got {u}")
    return int(floor(n * u + FLOOR_TOLERANCE))


def pointwise_max(batch: Batch, n_sites: Optional[int] = None) -> npt.NDArray[np.float64]:
    """M_n(t) = max_i X_i(t); the empty batch gives the zero function."""
    array = _as_batch(batch, n_sites)
    if array.shape[0] == 0:
        return np.zeros(array.shape[1])
    return array.max(axis=0)


def partial_maxima(batch: Batch, n: int, u_grid: npt.ArrayLike) -> CadlagMaxProcess:
    """M̃_n(u, t) = max of the first ⌊n u⌋ functions at site t, zero when ⌊n u⌋ = 0."""
    array = _as_batch(batch)
    times = np.array(u_grid, dtype=float, ndmin=1)
    if np.any(np.diff(times) < 0):
        raise ArgumentError("u grid must be sorted")
    counts = np.array([block_count(n, u) for u in times], dtype=int)
    needed = int(counts.max(initial=0))
    if needed > array.shape[0]:
        raise ArgumentError(f"partial maxima up to u={times[-1]} need {needed} functions, batch has {array.shape[0]}")

    values = np.zeros((times.size, array.shape[1]))
    if needed:
        running = np.maximum.accumulate(array[:needed], axis=0)
        active = counts > 0
        values[active] = running[counts[active] - 1]
    return CadlagMaxProcess(time_grid=times, values=values)


def empirical_order_stat(batch: Batch, n: int, rank: int, u: float, site: int) -> float:
    """rank-th largest of the first ⌊n u⌋ values at ``site``; zero when rank > ⌊n u⌋."""
    if rank < 1:
        raise ArgumentError(f"rank must be >= 1, got {rank}")
    array = _as_batch(batch)
    count = block_count(n, u)
    if count > array.shape[0]:
        raise ArgumentError(f"u={u} needs {count} functions, batch has {array.shape[0]}")
    if rank > count:
        return 0.0
    column = array[:count, site]
    return float(np.partition(column, count - rank)[count - rank])


def empirical_measure(batch: Batch, n: int) -> "PointMeasure":
    """
    Space-time empirical measure: one atom per nonzero function X_i, placed at time i / n.

    theta_map and theta_tilde_map applied to it reproduce pointwise_max and partial_maxima.
    """
    from superextremal.ppp import PointMeasure, polar_decompose

    array = _as_batch(batch)
    times = np.arange(1, array.shape[0] + 1) / n
    nonzero = array.max(axis=1, initial=0.0) > 0
    magnitudes, spectral = polar_decompose(array[nonzero])
    return PointMeasure(magnitudes=magnitudes, spectral=spectral, times=times[nonzero], horizon=array.shape[0] / n)
