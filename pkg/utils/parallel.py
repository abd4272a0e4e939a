from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List
import logging

logger = logging.getLogger(__name__)


def map_ordered(func: Callable, items: Iterable, jobs: int = 1) -> List:
    """Apply ``func`` to every item, results returned in input order.

    :param func: a picklable top-level function
    :param items: the work items
    :param jobs: number of worker processes, 1 runs in-process
    :return: list of results, same order as ``items``
    """
    items = list(items)

    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    logger.debug(f"Running {len(items)} items on {jobs} processes")
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(func, items))
