"""Counter-style random streams keyed by (seed, purpose, index).

Every path, replicate and bridge batch draws from its own stream so that
results never depend on execution order or on the number of worker threads.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# stream purposes; appear as the first element of the spawn key
SAMPLE = 0
EVAL = 1
BRIDGE = 2
REPLICATE = 3
HYPOTHESIS = 4
CODEBOOK = 5
GRAM = 6


def stream(seed, *key):
    """Return a Generator for the stream identified by ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *key):
    """Derive a 64-bit child seed; used to hand a sub-experiment its own seed."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def ordered_map(fn, items, threads=1):
    """Map ``fn`` over ``items`` and return results in input order.

    ``threads`` only caps concurrency; the output does not depend on it.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))
