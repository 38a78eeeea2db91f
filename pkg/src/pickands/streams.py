"""Counter-based random streams and deterministic block map-reduce.

Replications are cut into fixed-size blocks. Block ``b`` of purpose ``tag`` always
draws from ``derive(seed, tag, b)``, so the output does not depend on how many
workers ran the blocks or in which order they finished.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

DEFAULT_BLOCK = 1000

# purpose tags keep unrelated consumers of the same seed on disjoint streams
TAG_MAIN = 0
TAG_PILOT = 1
TAG_ORACLE = 2
TAG_MAXSTABLE = 3


def derive(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = os.environ.get("PICKANDS_WORKERS", "1")
    if workers == "auto":
        return os.cpu_count() or 1
    w = int(workers)
    if w < 1:
        raise ValueError("workers must be >= 1")
    return w


def block_sizes(reps: int, block: int = DEFAULT_BLOCK) -> list[int]:
    full, rest = divmod(reps, block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(
    fn: Callable[[np.random.Generator, int], object],
    reps: int,
    seed: int,
    *,
    tag: int = TAG_MAIN,
    block: int = DEFAULT_BLOCK,
    workers=None,
    progress: Callable[[int], None] | None = None,
):
    """Run ``fn(rng, n)`` over blocks and return the per-block results in block order.

    ``fn`` must return either an array whose first axis has length ``n`` or a tuple
    of such arrays; results are concatenated along axis 0.
    """
    sizes = block_sizes(reps, block)
    jobs = [(derive(seed, tag, b), n) for b, n in enumerate(sizes)]
    w = resolve_workers(workers)
    done = 0
    if w == 1 or len(jobs) == 1:
        out = []
        for rng, n in jobs:
            out.append(fn(rng, n))
            done += n
            if progress:
                progress(done)
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            futures = [pool.submit(fn, rng, n) for rng, n in jobs]
            out = []
            for f, (_, n) in zip(futures, jobs):
                out.append(f.result())
                done += n
                if progress:
                    progress(done)
    if not out:
        raise ValueError("reps must be positive")
    if isinstance(out[0], tuple):
        return tuple(np.concatenate(parts, axis=0) for parts in zip(*out))
    return np.concatenate(out, axis=0)


def mean_stderr(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    m = float(x.mean())
    if n < 2:
        return m, float("nan")
    return m, float(x.std(ddof=1) / np.sqrt(n))
