"""Counter-based uniform draws.

Every random quantity in the package is a pure function of an integer key
tuple, so cells can be addressed directly without keeping generator state.
"""
import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# stream domains
TAPE = 0x7A9E
AGENT = 0xA6E7
TIEBREAK = 0x71EB


def _mix(x):
    # splitmix64 finalizer; x must be a uint64 ndarray (array ops wrap silently)
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _key(*parts):
    h = np.array([0], dtype=np.uint64)
    for p in parts:
        h = _mix(h ^ np.array([int(p) & _MASK], dtype=np.uint64))
    return h


def uniforms(counters, *key):
    """Uniform [0, 1) draws for an integer array of counters under `key`."""
    c = np.asarray(counters, dtype=np.int64).astype(np.uint64)
    base = _key(*key)
    h = _mix(base ^ _mix(c))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def uniform(counter, *key):
    return float(uniforms(np.array([counter]), *key)[0])
