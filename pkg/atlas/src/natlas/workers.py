"""Bounded producer/consumer pool for independent experiment cells.

Each cell is a blocking callable run on a worker thread. Results are
returned keyed and ordered by cell key regardless of completion order.
"""

from __future__ import annotations

import asyncio
from collections.abc import Callable, Hashable, Sequence
from typing import Any, TypeVar

from .errors import ValidationError
from .logging import jlog

K = TypeVar("K", bound=Hashable)
T = TypeVar("T")


async def _producer(queue: asyncio.Queue, cells: Sequence[tuple[Any, Callable[[], Any]]], concurrency: int) -> None:
    for cell in cells:
        await queue.put(cell)
    for _ in range(concurrency):
        await queue.put(None)


async def _consumer(queue: asyncio.Queue, results: dict[Any, Any], errors: dict[Any, BaseException]) -> None:
    while True:
        item = await queue.get()
        if item is None:
            queue.task_done()
            break
        key, fn = item
        try:
            results[key] = await asyncio.to_thread(fn)
        except Exception as exc:  # re-raised once every worker has stopped
            errors[key] = exc
            jlog("error", event="cell_failed", cell=str(key), error=repr(exc))
        queue.task_done()


async def _run(cells: Sequence[tuple[Any, Callable[[], Any]]], concurrency: int) -> tuple[dict[Any, Any], dict[Any, BaseException]]:
    queue: asyncio.Queue = asyncio.Queue()
    results: dict[Any, Any] = {}
    errors: dict[Any, BaseException] = {}
    prod = asyncio.create_task(_producer(queue, cells, concurrency))
    workers = [asyncio.create_task(_consumer(queue, results, errors)) for _ in range(concurrency)]
    await prod
    await queue.join()
    await asyncio.gather(*workers)
    return results, errors


def run_cells(cells: Sequence[tuple[K, Callable[[], T]]], concurrency: int = 1) -> dict[K, T]:
    """Run every cell and return ``{key: result}`` in sorted key order.

    If any cell raised, the exception of the smallest failing key is re-raised.
    """

    if concurrency < 1:
        raise ValidationError(f"concurrency must be >= 1, got {concurrency}")
    keys = [key for key, _ in cells]
    if len(set(keys)) != len(keys):
        raise ValidationError("duplicate cell keys")
    if not cells:
        return {}
    results, errors = asyncio.run(_run(list(cells), min(concurrency, len(cells))))
    if errors:
        raise errors[min(errors)]
    return {key: results[key] for key in sorted(results)}


__all__ = ["run_cells"]
