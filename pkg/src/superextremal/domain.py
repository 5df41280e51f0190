"""
Finite discretization of the compact index space T and the variograms defined on it.

Functions on T are represented as value vectors over the grid sites; a Grid is
immutable once built and can be shared read-only between workers.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.spatial.distance import cdist

from superextremal.errors import ArgumentError, SizingError

logger = logging.getLogger(__name__)

DEFAULT_SITE_CAP = 400


@dataclass(frozen=True, eq=False)
class Grid:
    sites: npt.NDArray[np.float64]
    metric: npt.NDArray[np.float64]
    origin_index: int = 0

    def __post_init__(self) -> None:
        sites = np.array(self.sites, dtype=float)
        if sites.ndim == 1:
            sites = sites[:, None]
        metric = np.array(self.metric, dtype=float)
        n = sites.shape[0]
        if metric.shape != (n, n):
            raise ArgumentError(f"metric shape {metric.shape} does not match {n} sites")
        if not 0 <= self.origin_index < n:
            raise ArgumentError(f"origin_index {self.origin_index} outside [0, {n})")
        if not np.array_equal(metric, metric.T):
            raise ArgumentError("metric must be symmetric")
        if np.any(np.diag(metric) != 0.0):
            raise ArgumentError("metric must vanish on the diagonal")
        off_diagonal = metric[~np.eye(n, dtype=bool)]
        if np.any(off_diagonal <= 0.0):
            raise ArgumentError("sites must be pairwise distinct (metric > 0 off the diagonal)")
        sites.setflags(write=False)
        metric.setflags(write=False)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "metric", metric)

    @property
    def size(self) -> int:
        return int(self.sites.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.sites.shape[1])

    def to_frame(self) -> pd.DataFrame:
        """Grid dump: one row per site with its coordinates."""
        frame = pd.DataFrame(self.sites, columns=[f"x{k}" for k in range(self.dimension)])
        frame.insert(0, "site", np.arange(self.size))
        frame["is_origin"] = frame["site"] == self.origin_index
        return frame


@dataclass(frozen=True)
class Variogram:
    """Fractional variogram Γ(t1, t2) = scale * dist(t1, t2) ** exponent."""

    scale: float = 1.0
    exponent: float = 1.0
    kind: str = field(default="fractional")

    def __post_init__(self) -> None:
        if self.kind != "fractional":
            raise ArgumentError(f"unsupported variogram kind {self.kind!r}")
        if not self.scale > 0:
            raise ArgumentError(f"variogram scale must be > 0, got {self.scale}")
        if not 0 < self.exponent <= 2:
            raise ArgumentError(f"variogram exponent must lie in (0, 2], got {self.exponent}")

    def __call__(self, distance: npt.ArrayLike) -> npt.NDArray[np.float64]:
        return self.scale * np.power(np.asarray(distance, dtype=float), self.exponent)


def build_grid(
    dimension: int = 1,
    extent: float = 1.0,
    resolution: int = 11,
    origin_index: int = 0,
    site_cap: int = DEFAULT_SITE_CAP,
) -> Grid:
    """Regular lattice over [0, extent]^dimension with Euclidean distances."""
    if dimension not in (1, 2):
        raise ArgumentError(f"dimension must be 1 or 2, got {dimension}")
    if resolution < 2:
        raise ArgumentError(f"resolution must be >= 2 per axis, got {resolution}")
    if not extent > 0:
        raise ArgumentError(f"extent must be > 0, got {extent}")
    total = resolution**dimension
    if total > site_cap:
        raise SizingError(f"{total} sites exceed the cap of {site_cap}")
    if not 0 <= origin_index < total:
        raise ArgumentError(f"origin_index {origin_index} outside [0, {total})")

    axis = np.linspace(0.0, extent, resolution)
    mesh = np.meshgrid(*([axis] * dimension), indexing="ij")
    sites = np.stack([m.ravel() for m in mesh], axis=1)
    metric = cdist(sites, sites)
    np.fill_diagonal(metric, 0.0)
    # cdist is symmetric up to rounding; force exact symmetry
    metric = np.triu(metric) + np.triu(metric, 1).T
    logger.debug(f"Built {dimension}-d grid with {total} sites, origin {origin_index}")
    return Grid(sites=sites, metric=metric, origin_index=origin_index)


def variogram_matrix(grid: Grid, v: Variogram) -> npt.NDArray[np.float64]:
    gamma = v(grid.metric)
    np.fill_diagonal(gamma, 0.0)
    return gamma


def increment_covariance(grid: Grid, v: Variogram) -> npt.NDArray[np.float64]:
    """Covariance of the anchored increment process: C_ij = (Γ_i0 + Γ_j0 - Γ_ij) / 2."""
    gamma = variogram_matrix(grid, v)
    to_origin = gamma[:, grid.origin_index]
    return 0.5 * (to_origin[:, None] + to_origin[None, :] - gamma)


def min_eigenvalue(matrix: npt.ArrayLike) -> float:
    return float(np.linalg.eigvalsh(np.asarray(matrix, dtype=float)).min())
