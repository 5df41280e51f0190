"""Worker pool for per-replicate Monte Carlo work."""

import logging
from typing import Callable, List, Sequence, TypeVar

from tqdm import tqdm
from tqdm.contrib.concurrent import process_map

logger = logging.getLogger(__name__)

T = TypeVar("T")


def map_replicates(
    func: Callable[[int], T],
    replicates: Sequence[int],
    workers: int = 1,
    desc: str = "replicates",
    chunksize: int = 64,
) -> List[T]:
    """
    Applies ``func`` to every replicate index and returns results in replicate order.

    With ``workers > 1`` the calls are spread over a process pool, so ``func``
    must be picklable (a module-level function or a ``functools.partial`` of one).
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(replicates) <= 1:
        return [func(i) for i in tqdm(replicates, desc=desc, disable=None, leave=False)]

    logger.debug(f"Dispatching {len(replicates):,} {desc} to {workers} workers")
    return process_map(
        func, replicates, max_workers=workers, chunksize=chunksize, desc=desc, disable=None, leave=False
    )
