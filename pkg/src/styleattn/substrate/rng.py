"""Seeded, labeled random streams.

All randomness in the package flows through RngStream. A stream is keyed by
a 64-bit seed plus a path of stream ids; the same key yields the same draw
sequence on every run and platform (PCG64 is platform-independent). Labels
are turned into stream ids with crc32 so that e.g. the "noise" stream of a
given seed never depends on how many parameters were allocated before it.
"""

import zlib

import numpy as np


def stream_id(label):
    """Stable 32-bit stream id for a string label."""
    return zlib.crc32(label.encode("utf-8"))


class RngStream:
    """Deterministic random stream for a (seed, path-of-ids) key."""

    def __init__(self, seed, path=()):
        if isinstance(path, (int, str)):
            path = (path,)
        self.seed = int(seed)
        self.path = tuple(stream_id(p) if isinstance(p, str) else int(p) for p in path)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, label):
        """Independent stream derived by label; order of creation is irrelevant."""
        return RngStream(self.seed, self.path + (stream_id(str(label)),))

    def normal(self, shape=(), dtype=np.float64):
        return self._gen.standard_normal(size=shape, dtype=np.float64).astype(dtype, copy=False)

    def uniform(self, low, high, shape=(), dtype=np.float64):
        return self._gen.uniform(low, high, size=shape).astype(dtype, copy=False)

    def integers(self, low, high, shape=()):
        return self._gen.integers(low, high, size=shape)

    def state(self):
        """JSON-serializable generator state (for checkpoints)."""
        return self._gen.bit_generator.state

    def set_state(self, state):
        self._gen.bit_generator.state = state
