"""Counter-based RNG streams.

Every stochastic routine in the package takes a ``stream`` argument that is
either a ready ``numpy.random.Generator`` or an integer seed.  Streams for
parallel tasks are derived from ``(seed, *path)`` through a SeedSequence
spawn key, so the draw order of one task can never affect another and a run
is reproducible bit for bit from its seed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _path_key(path) -> tuple[int, ...]:
    key = []
    for part in path:
        if isinstance(part, str):
            key.append(zlib.crc32(part.encode("utf-8")))
        elif isinstance(part, (int, np.integer)):
            key.append(int(part) & 0xFFFFFFFF)
        else:
            raise TypeError(f"stream path entries must be int or str, got {type(part)!r}")
    return tuple(key)


def stream(seed: int, *path) -> np.random.Generator:
    """Generator for the sub-stream addressed by (seed, *path).

    Distinct paths yield statistically independent Philox streams; the same
    (seed, path) always yields the same sequence.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=_path_key(path))
    return np.random.Generator(np.random.Philox(seq))


def ensure_generator(stream_or_seed, *path) -> np.random.Generator:
    """Accept a Generator as-is, or derive one from an integer seed."""
    if isinstance(stream_or_seed, np.random.Generator):
        return stream_or_seed
    if stream_or_seed is None:
        raise ValueError("a stream (Generator or integer seed) is required; no entropy default")
    return stream(int(stream_or_seed), *path)
