import numpy as np
import pytest

from superextremal.rng import extend_seed, make_rng, substream
from superextremal.workers import map_replicates


def test_make_rng_is_reproducible():
    assert np.array_equal(make_rng(5).standard_normal(4), make_rng(5).standard_normal(4))
    assert np.array_equal(make_rng((5, 1, 2)).random(3), substream(5, 1, 2).random(3))
    assert not np.array_equal(make_rng((5, 1, 2)).random(3), make_rng((5, 1, 3)).random(3))


def test_generator_passes_through():
    rng = np.random.default_rng(0)
    assert make_rng(rng) is rng


def test_extend_seed():
    assert extend_seed(7, 2, 3) == (7, 2, 3)
    assert extend_seed((7, 1), 4) == (7, 1, 4)
    with pytest.raises(TypeError):
        extend_seed(np.random.default_rng(0), 1)


def _square(i: int) -> int:
    return i * i


def test_map_replicates_keeps_order():
    assert map_replicates(_square, range(5)) == [0, 1, 4, 9, 16]
    with pytest.raises(ValueError):
        map_replicates(_square, range(5), workers=0)
