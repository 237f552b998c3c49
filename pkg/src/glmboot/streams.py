"""Seeded random substreams and an order-preserving parallel map.

Every random quantity is drawn from a stream addressed by a tuple of
integers (master seed, purpose tag, indices...), so results never depend on
which worker computed what, or in which order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# purpose tags keep independent uses of one master seed apart
DESIGN = 1
RESPONSE = 2
BOOTSTRAP = 3
CV_FOLDS = 4


def seed_sequence(seed, *key: int) -> np.random.SeedSequence:
    """SeedSequence for ``seed`` extended by ``key`` (stateless, unlike ``spawn``)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def generator(seed, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *key))


def resolve_workers(workers: int | None = None) -> int:
    """Explicit argument, else ``GLMBOOT_THREADS``, else 1."""
    if workers is None:
        env = os.environ.get("GLMBOOT_THREADS")
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError(f"parallelism must be >= 1, got {workers}")
    return workers


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """``[fn(x) for x in items]``, optionally across processes; order is preserved."""
    items: Sequence[T] = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
