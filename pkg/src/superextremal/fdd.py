"""
Finite-dimensional distributions of the superextremal limit process.

The exponent measure of an exceedance set A = {f: ∃i, f(t_i) >= z_i} is
evaluated through ν(A) = E[max_i (V(t_i) / z_i)^α], which follows from
integrating out the radial coordinate of the homogeneous representation.
"""

import json
import logging
from dataclasses import dataclass, field
from math import exp, log, sqrt
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import integrate
from scipy.stats import norm

from superextremal.empirical import CadlagMaxProcess
from superextremal.errors import ArgumentError, ConfigError, NumericalError
from superextremal.ppp import SpectralSampler
from superextremal.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

SPECTRAL_CHUNK = 100_000
RADIAL_RANGE = (1e-3, 1e3)
RADIAL_STRATA = 200


@dataclass(frozen=True, eq=False)
class FddQuery:
    """Times u_1 < ... < u_k, sites t_1..t_l and a k x l threshold matrix y."""

    times: npt.NDArray[np.float64]
    sites: Tuple[int, ...]
    thresholds: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float, ndmin=1)
        sites = tuple(int(s) for s in self.sites)
        thresholds = np.array(self.thresholds, dtype=float, ndmin=2)
        if times.ndim != 1 or times.size == 0:
            raise ArgumentError("a query needs at least one time")
        if times[0] <= 0 or np.any(np.diff(times) <= 0):
            raise ArgumentError("query times must be positive and strictly increasing")
        if not sites:
            raise ArgumentError("a query needs at least one site")
        if min(sites) < 0:
            raise ArgumentError(f"query sites must be nonnegative, got {list(sites)}")
        if thresholds.shape != (times.size, len(sites)):
            raise ArgumentError(f"thresholds shape {thresholds.shape} != ({times.size}, {len(sites)})")
        if np.any(~(thresholds > 0)):
            raise ArgumentError("thresholds must be strictly positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "thresholds", thresholds)

    @property
    def increments(self) -> npt.NDArray[np.float64]:
        """u_j - u_{j-1} with u_0 = 0."""
        return np.diff(self.times, prepend=0.0)

    def effective_thresholds(self) -> npt.NDArray[np.float64]:
        """z_{j,i} = min over rows k >= j of y_{k,i}."""
        return np.minimum.accumulate(self.thresholds[::-1], axis=0)[::-1]

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "FddQuery":
        try:
            return cls(
                times=np.asarray(payload["times"], dtype=float),
                sites=tuple(payload["sites"]),
                thresholds=np.asarray(payload["thresholds"], dtype=float),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid fdd query: {e}") from e

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "FddQuery":
        try:
            with open(path, "r") as f:
                payload = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read query file '{path}': {e}") from e
        return cls.from_dict(payload)


@dataclass(frozen=True)
class NuEstimate:
    estimate: float
    stderr: float
    n_draws: int


@dataclass(frozen=True)
class FddResult:
    probability: float
    stderr: float
    factors: List[NuEstimate] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "probability": self.probability,
            "stderr": self.stderr,
            "nu": [f.estimate for f in self.factors],
            "nu_stderr": [f.stderr for f in self.factors],
        }


@dataclass(frozen=True)
class EmpiricalFdd:
    probability: float
    stderr: float
    n_realizations: int


def _mean_and_stderr(terms: npt.NDArray[np.float64]) -> Tuple[float, float]:
    n = terms.shape[0]
    mean = float(terms.mean())
    stderr = float(terms.std(ddof=1) / sqrt(n)) if n > 1 else 0.0
    return mean, stderr


def check_sites(sites: Sequence[int], n_sites: int) -> None:
    bad = [int(s) for s in sites if not 0 <= int(s) < n_sites]
    if bad:
        raise ArgumentError(f"sites {bad} outside a {n_sites}-site grid")


def _exceedance_terms(
    sampler: SpectralSampler,
    sites: Sequence[int],
    z: npt.NDArray[np.float64],
    n_draws: int,
    rng: np.random.Generator,
) -> npt.NDArray[np.float64]:
    """Per-draw max_i (V(t_i) / z_{j,i})^α, shape (n_draws, rows of z)."""
    check_sites(sites, sampler.n_sites)
    z = np.atleast_2d(z)
    terms = np.empty((n_draws, z.shape[0]))
    for start in range(0, n_draws, SPECTRAL_CHUNK):
        stop = min(start + SPECTRAL_CHUNK, n_draws)
        v = sampler.draw(rng, stop - start, sites)
        ratios = (v[:, None, :] / z[None, :, :]) ** sampler.alpha
        terms[start:stop] = ratios.max(axis=2)
    if not np.all(np.isfinite(terms)):
        raise NumericalError("non-finite spectral draw while estimating the exponent measure")
    return terms


def _resolve_sites(sampler: SpectralSampler, z: npt.NDArray[np.float64], sites: Optional[Sequence[int]]) -> List[int]:
    chosen = list(range(sampler.n_sites)) if sites is None else [int(s) for s in sites]
    if len(chosen) != z.size:
        raise ArgumentError(f"{z.size} thresholds for {len(chosen)} sites")
    if np.any(~(z > 0)):
        raise ArgumentError("thresholds must be strictly positive")
    return chosen


def exponent_nu(
    z: npt.ArrayLike,
    sampler: SpectralSampler,
    n_draws: int,
    seed: SeedLike,
    sites: Optional[Sequence[int]] = None,
) -> NuEstimate:
    """Monte Carlo ν({f: ∃i, f(t_i) >= z_i}) = E[max_i (V(t_i) / z_i)^α] with its standard error."""
    if n_draws < 1:
        raise ArgumentError(f"n_draws must be >= 1, got {n_draws}")
    thresholds = np.array(z, dtype=float, ndmin=1)
    chosen = _resolve_sites(sampler, thresholds, sites)
    terms = _exceedance_terms(sampler, chosen, thresholds, n_draws, make_rng(seed))[:, 0]
    estimate, stderr = _mean_and_stderr(terms)
    return NuEstimate(estimate, stderr, n_draws)


def exponent_nu_radial(
    z: npt.ArrayLike,
    sampler: SpectralSampler,
    n_draws: int,
    seed: SeedLike,
    sites: Optional[Sequence[int]] = None,
    w_range: Tuple[float, float] = RADIAL_RANGE,
    strata: int = RADIAL_STRATA,
) -> NuEstimate:
    """
    Direct Monte Carlo of ∫ P[wV ∈ A] α w^{-α-1} dw over (w, V).

    log w is stratified on an even grid over ``w_range``; each stratum gets the
    same number of uniform draws. Mass outside ``w_range`` is dropped.
    """
    thresholds = np.array(z, dtype=float, ndmin=1)
    chosen = _resolve_sites(sampler, thresholds, sites)
    per_stratum = max(n_draws // strata, 2)
    rng = make_rng(seed)

    edges = np.linspace(log(w_range[0]), log(w_range[1]), strata + 1)
    width = edges[1] - edges[0]
    log_w = np.repeat(edges[:-1], per_stratum) + width * rng.uniform(size=strata * per_stratum)
    w = np.exp(log_w)
    v = sampler.draw(rng, w.size, chosen)
    hits = np.any(w[:, None] * v >= thresholds[None, :], axis=1)
    # dw = w d(log w), so the integrand in log w is α w^{-α} on the exceedance event
    integrand = (hits * sampler.alpha * w ** (-sampler.alpha)).reshape(strata, per_stratum)

    estimate = float(width * integrand.mean(axis=1).sum())
    variance = float((width**2 * integrand.var(axis=1, ddof=1) / per_stratum).sum())
    return NuEstimate(estimate, sqrt(variance), strata * per_stratum)


def pair_exponent_quadrature(gamma: float, z1: float, z2: float) -> float:
    """
    Two-site Brown-Resnick exponent E[max(V1 / z1, V2 / z2)] for α = 1.

    Tilting by V1 turns log(V2 / V1) into a N(-γ/2, γ) variable with γ = Γ(t1, t2),
    leaving a one-dimensional Gaussian integral. Above the crossing point the
    weight e^x N(-γ/2, γ) is the N(γ/2, γ) density.
    """
    if gamma < 0 or z1 <= 0 or z2 <= 0:
        raise ArgumentError("need gamma >= 0 and positive thresholds")
    if gamma == 0:
        return 1.0 / min(z1, z2)
    scale = sqrt(gamma)
    crossing = log(z2 / z1)
    lower = norm(loc=-0.5 * gamma, scale=scale).pdf
    upper = norm(loc=0.5 * gamma, scale=scale).pdf
    below, _ = integrate.quad(lambda x: lower(x) / z1, -np.inf, crossing)
    above, _ = integrate.quad(lambda x: upper(x) / z2, crossing, np.inf)
    return float(below + above)


def fdd_probability(query: FddQuery, sampler: SpectralSampler, n_draws: int, seed: SeedLike) -> FddResult:
    """
    P[M̃(u_j, t) <= y_j for all j] = ∏_j exp(-(u_j - u_{j-1}) ν(A_j)).

    All factors share the same spectral draws, and the reported standard error
    is the delta-method error of the combined exponent.
    """
    if n_draws < 1:
        raise ArgumentError(f"n_draws must be >= 1, got {n_draws}")
    z = query.effective_thresholds()
    terms = _exceedance_terms(sampler, query.sites, z, n_draws, make_rng(seed))
    factors = [NuEstimate(*_mean_and_stderr(terms[:, j]), n_draws) for j in range(z.shape[0])]
    exponent, exponent_se = _mean_and_stderr(terms @ query.increments)
    probability = exp(-exponent)
    logger.debug(f"fdd exponent {exponent:.6f} ± {exponent_se:.2e} over {n_draws:,} draws")
    return FddResult(probability=probability, stderr=probability * exponent_se, factors=factors)


def fdd_empirical(realizations: Sequence[CadlagMaxProcess], query: FddQuery) -> EmpiricalFdd:
    """Fraction of realizations with M̃(u_j, t_i) <= y_{j,i} at every (j, i)."""
    if not realizations:
        raise ArgumentError("no realizations to evaluate")
    sites = list(query.sites)
    inside = 0
    for process in realizations:
        if query.times[-1] > process.horizon or query.times[0] < process.time_grid[0]:
            raise ArgumentError(f"query times exceed the realization time grid [{process.time_grid[0]}, {process.horizon}]")
        if max(sites) >= process.n_sites:
            raise ArgumentError(f"query site {max(sites)} outside a {process.n_sites}-site realization")
        values = np.stack([process.at(u)[sites] for u in query.times])
        inside += bool(np.all(values <= query.thresholds))
    n = len(realizations)
    p = inside / n
    return EmpiricalFdd(probability=p, stderr=sqrt(p * (1.0 - p) / n), n_realizations=n)
