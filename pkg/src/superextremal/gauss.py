"""
Gaussian machinery behind the log-normal pre-limit processes.

Z_n is a centered unit-variance Gaussian process with correlation
r_n = exp(-Γ / (4 log n)); X_n = exp(b_n (Z_n - b_n)) is the log-normal
process whose rescaled law n P[X_n ∈ ·] approaches the Brown-Resnick
exponent measure.
"""

import logging
from dataclasses import dataclass
from math import exp, log, pi, sqrt
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import linalg
from scipy.stats import norm

from superextremal.domain import Grid, Variogram, increment_covariance, variogram_matrix
from superextremal.errors import ArgumentError, NumericalError
from superextremal.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-10
RIDGE_ESCALATION = 10.0
RIDGE_ATTEMPTS = 3
DRAW_CHUNK = 100_000

SampleFunction = npt.NDArray[np.float64]


def _check_n(n: float) -> None:
    if n < 2:
        raise ArgumentError(f"n must be >= 2, got {n}")


def scaling_bn(n: float) -> float:
    """b_n = (2 log n)^{1/2} - (2 log n)^{-1/2} (log log n / 2 + log(2 sqrt(pi)))."""
    _check_n(n)
    two_log_n = 2.0 * log(n)
    return sqrt(two_log_n) - (0.5 * log(log(n)) + log(2.0 * sqrt(pi))) / sqrt(two_log_n)


def scaling_ratio(n: float) -> float:
    """n / (sqrt(2 pi) b_n exp(b_n^2 / 2)); tends to 1 as n grows."""
    b = scaling_bn(n)
    return n / (sqrt(2.0 * pi) * b * exp(0.5 * b * b))


@dataclass(frozen=True)
class CovarianceFamily:
    variogram: Variogram
    n: float

    def __post_init__(self) -> None:
        _check_n(self.n)

    def __call__(self, gamma: npt.ArrayLike) -> npt.NDArray[np.float64]:
        return np.exp(-np.asarray(gamma, dtype=float) / (4.0 * log(self.n)))

    def matrix(self, grid: Grid) -> npt.NDArray[np.float64]:
        return self(variogram_matrix(grid, self.variogram))

    def origin_column(self, grid: Grid) -> npt.NDArray[np.float64]:
        """r_n(t, t0) for every site t."""
        return self.matrix(grid)[:, grid.origin_index]


def cholesky_psd(matrix: npt.ArrayLike, ridge: float = DEFAULT_RIDGE) -> npt.NDArray[np.float64]:
    """
    Lower-triangular L with L L^T = matrix + ridge * I.

    The ridge is multiplied by 10 after each failed factorization, for at most
    three attempts; a matrix that still fails raises NumericalError.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        raise ArgumentError("matrix must be symmetric")
    if ridge < 0:
        raise ArgumentError(f"ridge must be nonnegative, got {ridge}")
    if a.shape[0] == 0:
        return a.copy()

    eye = np.eye(a.shape[0])
    current = ridge
    for attempt in range(RIDGE_ATTEMPTS):
        try:
            return linalg.cholesky(a + current * eye, lower=True)
        except linalg.LinAlgError:
            next_ridge = max(current, DEFAULT_RIDGE) * RIDGE_ESCALATION
            logger.warning(
                f"Cholesky failed with ridge {current:.1e} (attempt {attempt + 1}/{RIDGE_ATTEMPTS})"
            )
            current = next_ridge
    raise NumericalError(f"matrix is not positive semidefinite after {RIDGE_ATTEMPTS} ridge escalations")


def _gaussian_draws(
    factor: npt.NDArray[np.float64], count: int, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    # Chunks keep peak memory flat; the stream of normals is the same as one big draw.
    dim = factor.shape[0]
    out = np.empty((count, dim))
    for start in range(0, count, DRAW_CHUNK):
        stop = min(start + DRAW_CHUNK, count)
        out[start:stop] = rng.standard_normal((stop - start, dim)) @ factor.T
    return out


def sample_gp(grid: Grid, cov: npt.ArrayLike, count: int, seed: SeedLike) -> npt.NDArray[np.float64]:
    """i.i.d. centered Gaussian vectors with covariance ``cov``, one row per draw."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (grid.size, grid.size):
        raise ArgumentError(f"covariance shape {cov.shape} does not match a grid of {grid.size} sites")
    if count < 1:
        raise ArgumentError(f"count must be >= 1, got {count}")
    return _gaussian_draws(cholesky_psd(cov), count, make_rng(seed))


def increment_factor(grid: Grid, v: Variogram) -> Tuple[npt.NDArray[np.intp], npt.NDArray[np.float64]]:
    """Non-origin site indices and the Cholesky factor of W's covariance on them."""
    free = np.flatnonzero(np.arange(grid.size) != grid.origin_index)
    cov = increment_covariance(grid, v)[np.ix_(free, free)]
    return free, cholesky_psd(cov)


def draw_increments(
    free: npt.NDArray[np.intp], factor: npt.NDArray[np.float64], size: int, count: int, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    out = np.zeros((count, size))
    if free.size:
        out[:, free] = _gaussian_draws(factor, count, rng)
    return out


def sample_W(grid: Grid, v: Variogram, seed: SeedLike, count: Optional[int] = None) -> npt.NDArray[np.float64]:
    """
    Draws of the centered Gaussian increment process W with W(t0) = 0 and
    Cov(W(ti), W(tj)) = (Γ(ti, t0) + Γ(tj, t0) - Γ(ti, tj)) / 2.

    Returns one SampleFunction, or a (count, sites) array when ``count`` is given.
    """
    free, factor = increment_factor(grid, v)
    draws = draw_increments(free, factor, grid.size, 1 if count is None else count, make_rng(seed))
    return draws[0] if count is None else draws


def lognormal_X(z: npt.ArrayLike, n: float) -> npt.NDArray[np.float64]:
    """X_n = exp(b_n (z - b_n)), site by site."""
    b = scaling_bn(n)
    with np.errstate(over="ignore"):
        x = np.exp(b * (np.asarray(z, dtype=float) - b))
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"log-normal transform overflowed for n={n}")
    return x


def lognormal_factor(grid: Grid, v: Variogram, n: float, sites: Optional[Sequence[int]] = None) -> npt.NDArray[np.float64]:
    """Cholesky factor of Z_n's correlation matrix, optionally restricted to ``sites``."""
    cov = CovarianceFamily(v, n).matrix(grid)
    if sites is not None:
        index = np.asarray(sites, dtype=int)
        cov = cov[np.ix_(index, index)]
    return cholesky_psd(cov)


def draw_lognormal(
    factor: npt.NDArray[np.float64], n: float, count: int, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    return lognormal_X(_gaussian_draws(factor, count, rng), n)


def sample_lognormal(
    grid: Grid,
    v: Variogram,
    n: float,
    count: int,
    seed: SeedLike,
    sites: Optional[Sequence[int]] = None,
) -> npt.NDArray[np.float64]:
    """
    ``count`` i.i.d. draws of X_n, optionally restricted to ``sites``.

    Restriction samples the marginal Gaussian vector on the chosen sites, so the
    cost does not depend on the full grid size.
    """
    if count < 1:
        raise ArgumentError(f"count must be >= 1, got {count}")
    return draw_lognormal(lognormal_factor(grid, v, n, sites), n, count, make_rng(seed))


def gaussian_tail_exceedance(n: float, z: float) -> float:
    """Exact n P[X_n(t) >= z] at a single site: n Ψ(b_n + log z / b_n)."""
    b = scaling_bn(n)
    return float(n * norm.sf(b + log(z) / b))


def conditional_mean(w: float, n: float, grid: Grid, v: Variogram) -> npt.NDArray[np.float64]:
    """Mean of Y_n given Y_n(t0) = w: w r_n(t, t0) + b_n^2 (r_n(t, t0) - 1)."""
    r0 = CovarianceFamily(v, n).origin_column(grid)
    b = scaling_bn(n)
    return w * r0 + b * b * (r0 - 1.0)


def conditional_cov(n: float, grid: Grid, v: Variogram) -> npt.NDArray[np.float64]:
    """Covariance of Y_n given Y_n(t0): b_n^2 (r_n(t1, t2) - r_n(t1, t0) r_n(t2, t0))."""
    family = CovarianceFamily(v, n)
    r = family.matrix(grid)
    r0 = r[:, grid.origin_index]
    b = scaling_bn(n)
    return b * b * (r - np.outer(r0, r0))


def gaussian_conditioning(
    mean: npt.ArrayLike, cov: npt.ArrayLike, index: int, value: float
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Mean and covariance of a Gaussian vector conditioned on coordinate ``index`` equal to ``value``."""
    mu = np.asarray(mean, dtype=float)
    sigma = np.asarray(cov, dtype=float)
    pivot = sigma[index, index]
    if not pivot > 0:
        raise NumericalError(f"cannot condition on a degenerate coordinate (variance {pivot})")
    column = sigma[:, index]
    return mu + column / pivot * (value - mu[index]), sigma - np.outer(column, column) / pivot


def sample_conditional_Y(
    w: float, n: float, grid: Grid, v: Variogram, count: int, seed: SeedLike
) -> npt.NDArray[np.float64]:
    """Diagnostic draws of Y_n conditioned on Y_n(t0) = w."""
    mean = conditional_mean(w, n, grid, v)
    free = np.flatnonzero(np.arange(grid.size) != grid.origin_index)
    cov = conditional_cov(n, grid, v)[np.ix_(free, free)]
    draws = np.tile(mean, (count, 1))
    if free.size:
        draws[:, free] += _gaussian_draws(cholesky_psd(cov), count, make_rng(seed))
    return draws
