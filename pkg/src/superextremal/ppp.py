"""
Poisson point measures on (nonzero functions) x [0, horizon] with intensity ν ⊗ ℓ,
and the maxima and order-statistic functionals evaluated on them.

Atoms are stored polar-decomposed: magnitude r = sup-norm of the raw function,
spectral profile s = raw / r with max(s) = 1, and a time mark u.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
import pandas as pd

from superextremal.domain import Grid, Variogram, increment_covariance, variogram_matrix
from superextremal.empirical import CadlagMaxProcess
from superextremal.errors import ArgumentError, NumericalError
from superextremal.gauss import cholesky_psd, draw_increments, increment_factor
from superextremal.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 1000
SPECTRAL_TOLERANCE = 1e-12
TIME_COLLISION = 1e-15


class SpectralSampler(Protocol):
    """Draws normalized profiles V with ν(A) = ∫ P[wV ∈ A] α w^{-α-1} dw."""

    @property
    def alpha(self) -> float: ...

    @property
    def n_sites(self) -> int: ...

    def draw(
        self, rng: np.random.Generator, count: int, sites: Optional[Sequence[int]] = None
    ) -> npt.NDArray[np.float64]: ...

    def marginal_scale(self, site: int) -> float: ...


@dataclass(frozen=True)
class DegenerateSampler:
    """V ≡ 1: every law of the limit process is an explicit Fréchet/Poisson law."""

    site_count: int
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.site_count < 1:
            raise ArgumentError(f"sampler needs at least one site, got {self.site_count}")
        if not self.alpha > 0:
            raise ArgumentError(f"alpha must be > 0, got {self.alpha}")

    @property
    def n_sites(self) -> int:
        return self.site_count

    def draw(
        self, rng: np.random.Generator, count: int, sites: Optional[Sequence[int]] = None
    ) -> npt.NDArray[np.float64]:
        width = self.site_count if sites is None else len(sites)
        return np.ones((count, width))

    def marginal_scale(self, site: int) -> float:
        return 1.0


@dataclass(frozen=True, eq=False)
class BrownResnickSampler:
    """V(t) = exp(W(t) - Γ(t, t0) / 2) with W the anchored Gaussian increment process."""

    grid: Grid
    variogram: Variogram
    alpha: float = 1.0
    _half_gamma: npt.NDArray[np.float64] = field(init=False, repr=False)
    _free: npt.NDArray[np.intp] = field(init=False, repr=False)
    _factor: npt.NDArray[np.float64] = field(init=False, repr=False)
    _site_factors: Dict[Tuple[int, ...], Tuple[npt.NDArray[np.intp], npt.NDArray[np.float64]]] = field(
        init=False, repr=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ArgumentError(f"alpha must be > 0, got {self.alpha}")
        free, factor = increment_factor(self.grid, self.variogram)
        half_gamma = 0.5 * variogram_matrix(self.grid, self.variogram)[:, self.grid.origin_index]
        object.__setattr__(self, "_free", free)
        object.__setattr__(self, "_factor", factor)
        object.__setattr__(self, "_half_gamma", half_gamma)

    @property
    def n_sites(self) -> int:
        return self.grid.size

    def _restricted_factor(self, sites: Tuple[int, ...]) -> Tuple[npt.NDArray[np.intp], npt.NDArray[np.float64]]:
        if sites not in self._site_factors:
            index = np.asarray(sites, dtype=int)
            free = np.flatnonzero(index != self.grid.origin_index)
            cov = increment_covariance(self.grid, self.variogram)[np.ix_(index[free], index[free])]
            self._site_factors[sites] = (free, cholesky_psd(cov))
        return self._site_factors[sites]

    def draw(
        self, rng: np.random.Generator, count: int, sites: Optional[Sequence[int]] = None
    ) -> npt.NDArray[np.float64]:
        if sites is None:
            w = draw_increments(self._free, self._factor, self.grid.size, count, rng)
            return np.exp(w - self._half_gamma)
        key = tuple(int(s) for s in sites)
        free, factor = self._restricted_factor(key)
        w = draw_increments(free, factor, len(key), count, rng)
        return np.exp(w - self._half_gamma[list(key)])

    def marginal_scale(self, site: int) -> float:
        """E[V(site)^α] = exp(α(α - 1) Γ(site, t0) / 2)."""
        return float(np.exp(self.alpha * (self.alpha - 1.0) * self._half_gamma[site]))


@dataclass(frozen=True)
class Atom:
    magnitude: float
    spectral: npt.NDArray[np.float64]
    time: float

    def __post_init__(self) -> None:
        if not (self.magnitude > 0 and np.isfinite(self.magnitude)):
            raise ArgumentError(f"atom magnitude must be positive and finite, got {self.magnitude}")
        if abs(float(np.max(self.spectral)) - 1.0) > SPECTRAL_TOLERANCE:
            raise ArgumentError("spectral profile must have sup-norm 1")
        if self.time < 0:
            raise ArgumentError(f"atom time must be nonnegative, got {self.time}")


def polar_decompose(raw: npt.ArrayLike) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Splits each row into (sup-norm magnitude, unit sup-norm profile)."""
    array = np.array(raw, dtype=float, ndmin=2)
    if array.shape[0] == 0:
        return np.zeros(0), array.reshape(0, array.shape[1])
    magnitudes = array.max(axis=1)
    if np.any(magnitudes <= 0) or np.any(array < 0):
        raise ArgumentError("only nonnegative, nonzero functions have a polar decomposition")
    return magnitudes, array / magnitudes[:, None]


@dataclass(frozen=True, eq=False)
class PointMeasure:
    magnitudes: npt.NDArray[np.float64]
    spectral: npt.NDArray[np.float64]
    times: npt.NDArray[np.float64]
    horizon: float
    truncation_radius: float = 0.0

    def __post_init__(self) -> None:
        r = np.array(self.magnitudes, dtype=float, ndmin=1)
        s = np.array(self.spectral, dtype=float, ndmin=2)
        u = np.array(self.times, dtype=float, ndmin=1)
        if not (s.shape[0] == r.size == u.size):
            raise ArgumentError(f"atom arrays disagree: {r.size} magnitudes, {s.shape[0]} profiles, {u.size} times")
        if self.horizon < 0:
            raise ArgumentError(f"horizon must be nonnegative, got {self.horizon}")
        if r.size:
            if np.any(r <= 0) or not np.all(np.isfinite(r)):
                raise ArgumentError("atom magnitudes must be positive and finite")
            if np.any(np.abs(s.max(axis=1) - 1.0) > SPECTRAL_TOLERANCE):
                raise ArgumentError("spectral profiles must have sup-norm 1")
            if np.any(u < 0) or np.any(u > self.horizon):
                raise ArgumentError(f"atom times must lie in [0, {self.horizon}]")
            if np.unique(u).size != u.size:
                raise ArgumentError("atom times must be pairwise distinct")
        object.__setattr__(self, "magnitudes", r)
        object.__setattr__(self, "spectral", s)
        object.__setattr__(self, "times", u)

    @classmethod
    def from_atoms(cls, atoms: Sequence[Atom], horizon: float, n_sites: Optional[int] = None) -> "PointMeasure":
        if not atoms:
            if n_sites is None:
                raise ArgumentError("an empty measure needs n_sites")
            return cls(np.zeros(0), np.zeros((0, n_sites)), np.zeros(0), horizon)
        return cls(
            magnitudes=np.array([a.magnitude for a in atoms]),
            spectral=np.stack([np.asarray(a.spectral, dtype=float) for a in atoms]),
            times=np.array([a.time for a in atoms]),
            horizon=horizon,
        )

    @property
    def n_sites(self) -> int:
        return int(self.spectral.shape[1])

    @property
    def size(self) -> int:
        return int(self.magnitudes.size)

    @property
    def atoms(self) -> List[Atom]:
        return [Atom(float(r), s, float(u)) for r, s, u in zip(self.magnitudes, self.spectral, self.times)]

    def raw(self) -> npt.NDArray[np.float64]:
        """Atoms as functions r * s, one row per atom."""
        return self.magnitudes[:, None] * self.spectral

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.magnitudes, "u": self.times, "s": [row.tolist() for row in self.spectral]})

    def to_jsonl(self, path: Union[str, Path]) -> None:
        """One atom per line: {"r": ..., "u": ..., "s": [...]}."""
        self.to_frame().to_json(path, orient="records", lines=True, double_precision=15)

    @classmethod
    def read_jsonl(cls, path: Union[str, Path], horizon: float, n_sites: Optional[int] = None) -> "PointMeasure":
        if Path(path).stat().st_size == 0:
            return cls.from_atoms([], horizon, n_sites)
        frame = pd.read_json(path, orient="records", lines=True, precise_float=True)
        if frame.empty:
            return cls.from_atoms([], horizon, n_sites)
        spectral = np.array(frame["s"].tolist(), dtype=float)
        # Re-normalize: the text form keeps 15 significant digits.
        magnitudes, spectral = polar_decompose(frame["r"].to_numpy(dtype=float)[:, None] * spectral)
        return cls(magnitudes, spectral, frame["u"].to_numpy(dtype=float), horizon)


def nominal_truncation_radius(count: int, horizon: float, alpha: float) -> float:
    """(K / M)^{-1/α}: radial level below which a K-atom truncation drops mass."""
    return float((count / horizon) ** (-1.0 / alpha))


def _separate_times(times: npt.NDArray[np.float64], rng: np.random.Generator, horizon: float) -> npt.NDArray[np.float64]:
    while True:
        order = np.argsort(times, kind="stable")
        gaps = np.diff(times[order])
        colliding = order[1:][gaps <= TIME_COLLISION]
        if colliding.size == 0:
            return times
        logger.debug(f"Resampling {colliding.size} colliding atom times")
        times[colliding] = rng.uniform(0.0, horizon, colliding.size)


def sample_ppp(
    sampler: SpectralSampler,
    horizon: float = 1.0,
    count: int = DEFAULT_TRUNCATION,
    seed: SeedLike = 0,
) -> PointMeasure:
    """
    The ``count`` largest atoms of a Poisson measure with intensity ν ⊗ ℓ on [0, horizon].

    Radii are R_k = (Γ_k / M)^{-1/α} for the arrival times Γ_k of a unit-rate
    Poisson process, time marks are uniform on [0, M], and R_k V_k is stored
    polar-decomposed.
    """
    if not horizon > 0:
        raise ArgumentError(f"horizon must be > 0, got {horizon}")
    if count < 1:
        raise ArgumentError(f"count must be >= 1, got {count}")
    if not sampler.alpha > 0:
        raise ArgumentError(f"alpha must be > 0, got {sampler.alpha}")

    rng = make_rng(seed)
    arrivals = np.cumsum(rng.standard_exponential(count))
    radii = (arrivals / horizon) ** (-1.0 / sampler.alpha)
    times = _separate_times(rng.uniform(0.0, horizon, count), rng, horizon)
    raw = radii[:, None] * sampler.draw(rng, count)
    if not np.all(np.isfinite(raw)):
        raise NumericalError("spectral draws produced non-finite atoms")
    magnitudes, spectral = polar_decompose(raw)
    return PointMeasure(
        magnitudes=magnitudes,
        spectral=spectral,
        times=times,
        horizon=horizon,
        truncation_radius=float(radii[-1]),
    )


def theta_map(pm: PointMeasure) -> npt.NDArray[np.float64]:
    """Pointwise supremum of r * s over all atoms; zero for the empty measure."""
    if pm.size == 0:
        return np.zeros(pm.n_sites)
    return pm.raw().max(axis=0)


def _check_time_grid(pm: PointMeasure, time_grid: npt.ArrayLike) -> npt.NDArray[np.float64]:
    grid = np.array(time_grid, dtype=float, ndmin=1)
    if np.any(np.diff(grid) < 0):
        raise ArgumentError("time grid must be sorted")
    if grid.size and (grid[0] < 0 or grid[-1] > pm.horizon):
        raise ArgumentError(f"time grid must lie in [0, {pm.horizon}]")
    return grid


def theta_tilde_map(pm: PointMeasure, time_grid: npt.ArrayLike) -> CadlagMaxProcess:
    """Running supremum of r * s over atoms with time <= u, at each query time u."""
    grid = _check_time_grid(pm, time_grid)
    values = np.zeros((grid.size, pm.n_sites))
    if pm.size:
        order = np.argsort(pm.times, kind="stable")
        running = np.maximum.accumulate(pm.raw()[order], axis=0)
        active = np.searchsorted(pm.times[order], grid, side="right")
        hit = active > 0
        values[hit] = running[active[hit] - 1]
    return CadlagMaxProcess(time_grid=grid, values=values)


def order_stat_map(pm: PointMeasure, rank: int, u: float, site: int) -> float:
    """rank-th largest r * s(site) among atoms with time <= u; zero if fewer qualify."""
    if rank < 1:
        raise ArgumentError(f"rank must be >= 1, got {rank}")
    values = pm.magnitudes[pm.times <= u] * pm.spectral[pm.times <= u, site]
    if values.size < rank:
        return 0.0
    return float(np.partition(values, values.size - rank)[values.size - rank])


def order_stat_process(pm: PointMeasure, max_rank: int, time_grid: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Joint order statistics: array (rank, time, site), entry [j - 1] is the j-th largest active value."""
    if max_rank < 1:
        raise ArgumentError(f"max_rank must be >= 1, got {max_rank}")
    grid = _check_time_grid(pm, time_grid)
    out = np.zeros((max_rank, grid.size, pm.n_sites))
    raw = pm.raw()
    for k, u in enumerate(grid):
        active = raw[pm.times <= u]
        if active.shape[0] == 0:
            continue
        top = -np.sort(-active, axis=0)[:max_rank]
        out[: top.shape[0], k] = top
    return out
