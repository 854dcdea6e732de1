"""Ensemble orchestration: fan realizations out, reduce in canonical order.

Only this layer spawns workers. Results are consumed in realization-index
order whatever the completion order, so outputs are byte-identical for any
worker count; reducers must be plain folds of per-realization records.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def map_indexed(fn, args_list, workers: int = 1):
    """Apply fn over args_list, yielding results in submission order."""
    if workers <= 1:
        for args in args_list:
            yield fn(args)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(args_list) // (workers * 4))
        yield from pool.map(fn, args_list, chunksize=chunk)


def fold_indexed(fn, args_list, reduce_fn, state, workers: int = 1):
    """Sequential in-order fold of the mapped results (deterministic)."""
    for result in map_indexed(fn, args_list, workers):
        state = reduce_fn(state, result)
    return state
