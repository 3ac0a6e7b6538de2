"""Reproducible random substreams and a deterministic block runner.

Streams are counter-based: ``derive_stream(seed, index, purpose)`` keys a
Philox generator with ``SeedSequence(seed, spawn_key=(purpose, index))``.
Identical keys give identical draws no matter which process asks or in what
order. Monte Carlo work is cut into blocks of consecutive paths of a fixed
size, block ``j`` drawing from stream ``(seed, j, purpose)``, so results do not
depend on the number of workers. Partial results are merged in block order.
"""

import numpy as np
from joblib import Parallel, delayed

DEFAULT_BLOCK = 8192

# purpose tags keep estimators on disjoint streams under one master seed
PURPOSE = {
    "primal": 1,
    "storage": 2,
    "p_hat": 3,
    "ladder": 4,
    "harvest": 5,
    "sigma_bd": 6,
    "identity_primal": 7,
    "identity_storage": 8,
    "corpus": 9,
    "path": 10,
    "oracle": 11,
    "trend": 12,
    "limdist": 13,
    "recurrence": 14,
    "limdist_return": 15,
}


def derive_stream(master_seed, path_index, purpose=0):
    """Independent generator for ``(master_seed, path_index, purpose)``.

    Parameters
    ----------
    master_seed : int
        Nonnegative seed of the run (up to 64 bits is typical).
    path_index : int
        Index of the path, or of the block of paths, the stream serves.
    purpose : int or str, default 0
        Separates streams of different estimators; strings are looked up in
        ``PURPOSE``.

    Returns
    -------
    numpy.random.Generator
    """
    if isinstance(purpose, str):
        purpose = PURPOSE[purpose]
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(purpose), int(path_index)))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(n_paths, block_size=DEFAULT_BLOCK):
    full, rest = divmod(int(n_paths), int(block_size))
    return [block_size] * full + ([rest] if rest else [])


def run_blocks(func, n_paths, seed, purpose, n_jobs=1, block_size=DEFAULT_BLOCK, **kwargs):
    """Call ``func(rng, size, **kwargs)`` once per block and return results in block order."""
    sizes = block_sizes(n_paths, block_size)
    tasks = [(derive_stream(seed, j, purpose), size) for j, size in enumerate(sizes)]
    if n_jobs == 1 or len(tasks) <= 1:
        return [func(rng, size, **kwargs) for rng, size in tasks]
    return Parallel(n_jobs=n_jobs)(delayed(func)(rng, size, **kwargs) for rng, size in tasks)
