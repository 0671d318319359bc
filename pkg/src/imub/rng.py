"""Counter-style random streams and worker-count invariant fan-out.

Every stream is a PCG64 generator keyed by ``(master seed, *key)`` through
``numpy.random.SeedSequence``.  Batched samplers split their sample index
range into fixed-size chunks, one stream per chunk, so the numbers drawn
depend only on the seed and the chunk layout, never on how many workers
run the chunks.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

CHUNK = 8192
WORKERS_ENV = "IMUB_WORKERS"


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def chunk_sizes(n: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(int(n), chunk)
    return [chunk] * full + ([rest] if rest else [])


def _run_chunk(args):
    fn, seed, key, index, size = args
    return fn(stream(seed, *key, index), size)


def map_chunks(fn: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
               key: Sequence[int] = (), workers: int | None = None, chunk: int = CHUNK) -> np.ndarray:
    """Run ``fn(rng, size)`` over chunks covering ``n`` samples, concatenated in order.

    ``fn`` must be picklable when ``workers > 1``.
    """
    sizes = chunk_sizes(n, chunk)
    jobs = [(fn, seed, tuple(key), i, s) for i, s in enumerate(sizes)]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        parts = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    if not parts:
        return np.empty((0,))
    return np.concatenate(parts, axis=0)
