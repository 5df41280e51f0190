import pytest

from superextremal.domain import Grid, Variogram, build_grid
from superextremal.ppp import BrownResnickSampler, DegenerateSampler


@pytest.fixture
def grid() -> Grid:
    # sites 0.0, 0.1, ..., 1.0 with the origin at 0
    return build_grid(dimension=1, extent=1.0, resolution=11)


@pytest.fixture
def variogram() -> Variogram:
    return Variogram(scale=1.0, exponent=1.0)


@pytest.fixture
def brown_resnick(grid: Grid, variogram: Variogram) -> BrownResnickSampler:
    return BrownResnickSampler(grid, variogram, alpha=1.0)


@pytest.fixture
def degenerate(grid: Grid) -> DegenerateSampler:
    return DegenerateSampler(grid.size, alpha=1.0)
