"""Flat JSON run configuration shared by every CLI command."""

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from superextremal.domain import DEFAULT_SITE_CAP, Grid, Variogram, build_grid
from superextremal.errors import ConfigError
from superextremal.ppp import DEFAULT_TRUNCATION, BrownResnickSampler, DegenerateSampler, SpectralSampler

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240611
RESOLVED_CONFIG = "resolved_config.json"
SAMPLER_KINDS = ("brown-resnick", "degenerate")
SIDES = ("limit", "prelimit", "both")


@dataclass(frozen=True)
class RunConfig:
    seed: int = DEFAULT_SEED
    output_dir: str = "results"
    workers: int = 1

    # grid and variogram
    dimension: int = 1
    extent: float = 1.0
    resolution: int = 11
    origin_index: int = 0
    site_cap: int = DEFAULT_SITE_CAP
    variogram_scale: float = 1.0
    variogram_exponent: float = 1.0

    # limit process
    sampler_kind: str = "brown-resnick"
    alpha: float = 1.0
    horizon: float = 1.0
    truncation: int = DEFAULT_TRUNCATION

    # simulate
    side: str = "both"
    realizations: int = 100
    time_grid: List[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    prelimit_n: int = 100

    # convergence
    n_list: List[int] = field(default_factory=lambda: [100, 1000, 10000])
    convergence_draws: int = 1_000_000
    convergence_sites: List[int] = field(default_factory=list)
    convergence_levels: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    diagnostic_draws: int = 100_000

    # Monte Carlo sizes for ν̂ and the test suite
    mc_size: int = 1_000_000
    test_samples: int = 10_000
    fdd_realizations: int = 10_000
    significance: float = 0.01
    stability_copies: List[int] = field(default_factory=lambda: [2, 3])
    similarity_scales: List[float] = field(default_factory=lambda: [0.5, 2.0])
    markov_u: float = 0.5
    markov_h: float = 0.5
    ranks: List[int] = field(default_factory=lambda: [2, 3])
    conditioning_n: List[float] = field(default_factory=lambda: [10.0, 1e3, 1e6])

    def __post_init__(self) -> None:
        positive = ("workers", "resolution", "site_cap", "truncation", "realizations", "convergence_draws",
                    "diagnostic_draws", "mc_size", "test_samples", "fdd_realizations")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.sampler_kind not in SAMPLER_KINDS:
            raise ConfigError(f"sampler_kind must be one of {SAMPLER_KINDS}, got {self.sampler_kind!r}")
        if self.side not in SIDES:
            raise ConfigError(f"side must be one of {SIDES}, got {self.side!r}")
        if not self.alpha > 0 or not self.horizon > 0:
            raise ConfigError("alpha and horizon must be > 0")
        if not 0 < self.significance < 1:
            raise ConfigError(f"significance must lie in (0, 1), got {self.significance}")
        if self.prelimit_n < 2 or any(n < 2 for n in self.n_list) or not self.n_list:
            raise ConfigError("pre-limit sample sizes must be >= 2")
        if any(m < 1 for m in self.stability_copies) or any(c <= 0 for c in self.similarity_scales):
            raise ConfigError("stability copies must be >= 1 and similarity scales > 0")
        if any(r < 1 for r in self.ranks):
            raise ConfigError("ranks must be >= 1")
        if not self.time_grid or sorted(self.time_grid) != list(self.time_grid):
            raise ConfigError("time_grid must be a nonempty sorted list")
        if self.time_grid[0] < 0 or self.time_grid[-1] > self.horizon:
            raise ConfigError(f"time_grid must lie in [0, horizon={self.horizon}]")
        if any(z <= 0 for z in self.convergence_levels):
            raise ConfigError("convergence levels must be > 0")

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**payload)
        except TypeError as e:
            raise ConfigError(f"invalid config: {e}") from e

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "RunConfig":
        try:
            with open(path, "r") as f:
                payload = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config '{path}': {e}") from e
        if not isinstance(payload, dict):
            raise ConfigError(f"config '{path}' must hold a JSON object")
        return cls.from_dict(payload)

    def with_overrides(
        self, seed: Optional[int] = None, output_dir: Optional[str] = None, workers: Optional[int] = None
    ) -> "RunConfig":
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if output_dir is not None:
            changes["output_dir"] = output_dir
        if workers is not None:
            changes["workers"] = workers
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write_resolved(self, directory: Union[str, Path]) -> Path:
        path = Path(directory) / RESOLVED_CONFIG
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")
        return path

    def grid(self) -> Grid:
        return build_grid(self.dimension, self.extent, self.resolution, self.origin_index, self.site_cap)

    def variogram(self) -> Variogram:
        return Variogram(scale=self.variogram_scale, exponent=self.variogram_exponent)

    def sampler(self, kind: Optional[str] = None, grid: Optional[Grid] = None) -> SpectralSampler:
        kind = kind or self.sampler_kind
        grid = grid or self.grid()
        if kind == "degenerate":
            return DegenerateSampler(grid.size, alpha=self.alpha)
        if kind == "brown-resnick":
            return BrownResnickSampler(grid, self.variogram(), alpha=self.alpha)
        raise ConfigError(f"unknown sampler kind {kind!r}")
