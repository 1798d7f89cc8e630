import numpy as np


def make_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent random stream for (seed, key...).

    Streams for different keys never overlap, so replicate i gets the same
    numbers no matter which worker runs it or in which order.
    """
    spawn_key = tuple(int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))


def chunk_indices(n: int, n_chunks: int) -> list:
    """Split range(n) into at most n_chunks contiguous ranges."""
    n_chunks = max(1, min(n_chunks, n))
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(n_chunks) if bounds[i] < bounds[i + 1]]
