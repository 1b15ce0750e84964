"""Counter-free, per-replica random streams usable from numba kernels.

Each replica gets its own xoshiro256** state derived with splitmix64 from
``(master_seed, replica_index)``, so results do not depend on how replicas
are spread across workers. States are plain ``uint64[4]`` arrays; the
``@njit`` draw functions below mutate them in place.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_U = np.uint64
_GOLDEN = _U(0x9E3779B97F4A7C15)
_MIX1 = _U(0xBF58476D1CE4E5B9)
_MIX2 = _U(0x94D049BB133111EB)
_REPLICA_SALT = _U(0xD1B54A32D192ED03)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> _U(30))) * _MIX1
    z = (z ^ (z >> _U(27))) * _MIX2
    return z ^ (z >> _U(31))


@njit(cache=True)
def seed_state(master_seed, replica, out):
    """Fill ``out`` (uint64[4]) with the stream state of one replica."""
    x = _U(master_seed) ^ (_U(replica) * _REPLICA_SALT)
    x = _splitmix64(x)
    for i in range(4):
        x = x + _GOLDEN
        out[i] = _splitmix64(x)
    if out[0] == 0 and out[1] == 0 and out[2] == 0 and out[3] == 0:
        out[0] = _U(1)


@njit(cache=True)
def _rotl(x, k):
    return (x << _U(k)) | (x >> _U(64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * _U(5), 7) * _U(9)
    t = s[1] << _U(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def uniform(s):
    """Uniform double in ``[0, 1)`` with 53 random bits."""
    return float(next_u64(s) >> _U(11)) * _INV_2_53


@njit(cache=True)
def uniform_open(s):
    """Uniform double in ``(0, 1)``, safe for logarithms."""
    return (float(next_u64(s) >> _U(11)) + 0.5) * _INV_2_53


@njit(cache=True)
def exponential(s):
    return -np.log(uniform_open(s))


@njit(cache=True)
def normal_pair(s):
    """Two independent standard normals by the Box-Muller transform."""
    r = np.sqrt(-2.0 * np.log(uniform_open(s)))
    th = 2.0 * np.pi * uniform(s)
    return r * np.cos(th), r * np.sin(th)


@njit(cache=True)
def fill_normal(s, out):
    n = out.size
    i = 0
    while i + 1 < n:
        a, b = normal_pair(s)
        out[i] = a
        out[i + 1] = b
        i += 2
    if i < n:
        a, _ = normal_pair(s)
        out[i] = a


@njit(cache=True)
def below(s, n):
    """Uniform integer in ``[0, n)``."""
    return min(int(uniform(s) * n), n - 1)


def replica_states(master_seed: int, first: int, count: int) -> np.ndarray:
    """Stacked states ``(count, 4)`` for replicas ``first .. first+count-1``."""
    out = np.empty((count, 4), dtype=np.uint64)
    for r in range(count):
        seed_state(np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), np.uint64(first + r), out[r])
    return out


class RngStream:
    """Python-side handle on one replica's stream.

    Shares its state layout with the compiled simulators, so a replica
    stepped in Python and the same replica run in bulk agree draw for draw.
    """

    def __init__(self, master_seed: int, replica: int = 0):
        self.master_seed = int(master_seed)
        self.replica = int(replica)
        self.state = replica_states(self.master_seed, self.replica, 1)[0]

    def uniform(self) -> float:
        return uniform(self.state)

    def exponential(self) -> float:
        return exponential(self.state)

    def normal(self, size: int) -> np.ndarray:
        out = np.empty(size)
        fill_normal(self.state, out)
        return out

    def below(self, n: int) -> int:
        return below(self.state, n)

    def u64(self) -> int:
        return int(next_u64(self.state))
