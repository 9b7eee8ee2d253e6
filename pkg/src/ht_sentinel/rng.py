"""Counter-based random streams.

A stream is a Philox4x64-10 generator keyed by ``(seed, len(ids))`` whose
256-bit counter starts at ``[0, id0, id1, id2]`` (missing ids are 0). Keying
on the id count keeps ``(a,)`` and ``(a, 0)`` apart. Word 0 is the
block counter that advances with every four 64-bit outputs, so streams with
different ids never overlap. Uniform doubles are ``(u64 >> 11) * 2**-53`` as
produced by ``numpy.random.Generator.random``.

Because the stream for a replicate depends only on ``(seed, ids)``, work can
be spread over any number of threads without changing results.
"""

import os

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed, *ids):
    """Return the generator for stream ``ids`` (at most three non-negative ints)."""
    if len(ids) > 3:
        raise ValueError("at most three stream ids are supported")
    if any(int(i) < 0 for i in ids):
        raise ValueError("stream ids must be non-negative")
    counter = np.zeros(4, dtype=np.uint64)
    for pos, value in enumerate(ids, start=1):
        counter[pos] = int(value) & _MASK64
    key = np.array([int(seed) & _MASK64, len(ids)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def thread_count(requested=None):
    """Worker count: explicit request, else ``HT_SENTINEL_THREADS``, else all cores."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("HT_SENTINEL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1
