"""Counter-based standard normal streams.

Deviate number ``position`` of stream ``(seed, stream_id)`` is a pure
function of the triple: a SplitMix64 finalizer is applied to
``key(seed, stream_id) + (position + 1) * GOLDEN`` and the top 53 bits are
mapped through the normal quantile function.  Random access is what lets the
simulator assign each path a fixed block of positions, so results do not
depend on batching, early stopping or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = ["NoiseStream", "gaussian_at", "uniform_at", "stream_key"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0xD1B54A32D192ED03)
_MASK64 = (1 << 64) - 1


def _mix64(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def stream_key(seed: int, stream_id: int) -> np.uint64:
    s = np.array([int(seed) & _MASK64], dtype=np.uint64)
    t = np.array([int(stream_id) & _MASK64], dtype=np.uint64)
    with np.errstate(over="ignore"):
        k = _mix64(_mix64(s) ^ (t * _STREAM_SALT + _GOLDEN))
    return k[0]


def uniform_at(seed, stream_id, positions):
    """Uniforms in the open interval (0, 1) at the given stream positions."""
    pos = np.asarray(positions, dtype=np.uint64)
    key = stream_key(seed, stream_id)
    with np.errstate(over="ignore"):
        z = _mix64(key + (pos + np.uint64(1)) * _GOLDEN)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gaussian_at(seed, stream_id, positions):
    """Standard normal deviates at the given stream positions."""
    return ndtri(uniform_at(seed, stream_id, positions))


@dataclass
class NoiseStream:
    """Sequential view on a counter-based normal stream.

    Parameters
    ----------
    seed : int
        64-bit seed shared by all streams of an experiment.
    stream_id : int
        Identifies an independent stream, e.g. a simulation series.
    position : int
        Index of the next deviate.
    """

    seed: int
    stream_id: int = 0
    position: int = 0

    def normals(self, n) -> np.ndarray:
        out = gaussian_at(self.seed, self.stream_id, np.arange(self.position, self.position + n))
        self.position += int(n)
        return out

    def next_gaussian(self) -> float:
        return float(self.normals(1)[0])

    def peek(self, n, offset=0) -> np.ndarray:
        start = self.position + offset
        return gaussian_at(self.seed, self.stream_id, np.arange(start, start + n))

    def skip(self, n):
        self.position += int(n)
        return self

    def copy(self) -> "NoiseStream":
        return NoiseStream(self.seed, self.stream_id, self.position)
