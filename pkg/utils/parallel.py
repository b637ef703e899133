"""
Replication fan-out with a deterministic merge order.
"""
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List, Optional, Sequence

from tqdm import tqdm

from config.settings import MC_CONFIG
from utils.errors import LabError
from utils.logger import get_logger

logger = get_logger(__name__)


def map_replications(fn: Callable[[Any], Any],
                     seeds: Sequence[Any],
                     workers: int = 1,
                     desc: str = "replications",
                     show_progress: bool = None,
                     on_result: Optional[Callable[[int, Any], None]] = None) -> List[Any]:
    """
    Run ``fn(seed)`` for every seed and return results in seed order.

    Args:
        fn: Picklable callable (module-level function or functools.partial) when workers > 1.
        seeds: One entry per replication.
        workers: Process count; 1 runs inline.
        desc: Progress bar label.
        show_progress: Override for the tqdm bar; defaults to MC_CONFIG.
        on_result: Called as on_result(i, result) once replication i is in, in index order.

    Returns:
        List of results, index i belonging to seeds[i].
    """
    if show_progress is None:
        show_progress = MC_CONFIG["show_progress"]
    total = len(seeds)
    results: List[Any] = [None] * total

    if workers <= 1 or total <= 1:
        with tqdm(total=total, desc=desc, unit="rep", disable=not show_progress) as pbar:
            for i, seed in enumerate(seeds):
                try:
                    results[i] = fn(seed)
                except LabError as e:
                    raise e.with_replication(i)
                if on_result is not None:
                    on_result(i, results[i])
                pbar.update(1)
        return results

    logger.debug(f"Dispatching {total} {desc} to {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, seed) for seed in seeds]
        with tqdm(total=total, desc=desc, unit="rep", disable=not show_progress) as pbar:
            for i, future in enumerate(futures):
                try:
                    results[i] = future.result()
                except LabError as e:
                    raise e.with_replication(i)
                if on_result is not None:
                    on_result(i, results[i])
                pbar.update(1)
    return results
