"""Continuous-time block/push particle system on discrete Gelfand-Tsetlin patterns.

Particles live in a flat, level-major ``int64`` array: particle ``(k, n)``
(1-based) sits at index ``n(n-1)/2 + k - 1``. Every particle on level ``n``
rings at rate ``v_n``; the scheduler is the Gillespie direct method over the
whole pattern, so blocked attempts still consume an event.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .kernel_dt import RateSpec
from .rng import RngStream, exponential, replica_states, uniform


def flat_index(n: int, k: int) -> int:
    return n * (n - 1) // 2 + k - 1


@dataclass
class DiscreteGTPattern:
    """Integer pattern ``x_k^n`` with ``x_k^{n+1} < x_k^n <= x_{k+1}^{n+1}`` and its clock."""

    N: int
    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if self.positions.shape != (self.N * (self.N + 1) // 2,):
            raise ValueError("positions must hold N(N+1)/2 entries")

    def level(self, n: int) -> np.ndarray:
        return self.positions[flat_index(n, 1):flat_index(n, 1) + n]

    @property
    def levels(self) -> tuple[np.ndarray, ...]:
        return tuple(self.level(n) for n in range(1, self.N + 1))

    def get(self, n: int, k: int) -> int:
        return int(self.positions[flat_index(n, k)])

    def is_interlaced(self) -> bool:
        return bool(_interlaced(self.positions, self.N))

    def copy(self) -> "DiscreteGTPattern":
        return DiscreteGTPattern(self.N, self.positions.copy(), self.time)

    @classmethod
    def from_levels(cls, levels, time: float = 0.0) -> "DiscreteGTPattern":
        return cls(len(levels), np.concatenate([np.asarray(l, dtype=np.int64) for l in levels]), time)


class EventRecord(NamedTuple):
    """What one Gillespie event did: the clock that rang and how many particles moved (0 = blocked)."""

    time: float
    n: int
    k: int
    moved: int


class InterlacingError(AssertionError):
    pass


def init_packed(N: int) -> DiscreteGTPattern:
    """Packed start ``x_k^n = k - n - 1``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    pos = np.concatenate([np.arange(1, n + 1) - n - 1 for n in range(1, N + 1)])
    return DiscreteGTPattern(N, pos.astype(np.int64), 0.0)


@njit(cache=True, nogil=True)
def _interlaced(x, N):
    for n in range(1, N):
        lo = n * (n - 1) // 2
        hi = n * (n + 1) // 2
        for k in range(n):
            # x_k^{n+1} < x_k^n <= x_{k+1}^{n+1}
            if not (x[hi + k] < x[lo + k] <= x[hi + k + 1]):
                return False
    return True


@njit(cache=True, nogil=True)
def _pick(v, total, s):
    # level with probability n v_n / total, then a uniform particle on it
    u = uniform(s) * total
    N = v.size
    for n in range(1, N + 1):
        w = n * v[n - 1]
        if u < w or n == N:
            k = int(u / v[n - 1]) + 1
            if k > n:
                k = n
            return n, k
        u -= w
    return N, N


@njit(cache=True, nogil=True)
def _apply(x, N, n, k):
    """Attempt the jump of particle (k, n); return how many particles moved."""
    i = n * (n - 1) // 2 + k - 1
    if k <= n - 1 and x[i] + 1 == x[(n - 1) * (n - 2) // 2 + k - 1]:
        return 0
    old = x[i]
    x[i] = old + 1
    moved = 1
    kk, nn = k + 1, n + 1
    while nn <= N:
        j = nn * (nn - 1) // 2 + kk - 1
        if x[j] != old:
            break
        x[j] = old + 1
        moved += 1
        kk += 1
        nn += 1
    return moved


@njit(cache=True, nogil=True)
def _run_to(x, N, v, time, t_end, s):
    total = 0.0
    for n in range(1, N + 1):
        total += n * v[n - 1]
    events = 0
    while True:
        dt = exponential(s) / total
        if time + dt > t_end:
            break
        time += dt
        n, k = _pick(v, total, s)
        _apply(x, N, n, k)
        events += 1
    return events


@njit(cache=True, nogil=True)
def _simulate_block(N, v, t_end, states, out):
    for r in range(states.shape[0]):
        x = out[r]
        i = 0
        for n in range(1, N + 1):
            for k in range(1, n + 1):
                x[i] = k - n - 1
                i += 1
        _run_to(x, N, v, 0.0, t_end, states[r])


@njit(cache=True, nogil=True)
def _run_events(x, N, v, time, events, s, check):
    """Run ``events`` Gillespie events; returns (time, moves) or (-1.0, index) on an interlacing failure."""
    total = 0.0
    for n in range(1, N + 1):
        total += n * v[n - 1]
    moves = 0
    for e in range(events):
        time += exponential(s) / total
        n, k = _pick(v, total, s)
        moves += _apply(x, N, n, k)
        if check and not _interlaced(x, N):
            return -1.0, e
    return time, moves


def apply_jump(state: DiscreteGTPattern, n: int, k: int) -> int:
    """Ring the clock of particle ``(k, n)`` in place; returns how many particles moved (0 = blocked)."""
    if not 1 <= k <= n <= state.N:
        raise ValueError("particle index outside the pattern")
    return int(_apply(state.positions, state.N, n, k))


def run_events(state: DiscreteGTPattern, events: int, r: RateSpec, rng: RngStream,
               check: bool = True) -> int:
    """Run a fixed number of events in place, verifying interlacing after each one if ``check``.

    Returns the total number of particle moves.
    """
    time, info = _run_events(state.positions, state.N, r.v, state.time, int(events), rng.state, check)
    if time < 0:
        raise InterlacingError(f"interlacing broken at event {info}")
    state.time = float(time)
    return int(info)


def step(state: DiscreteGTPattern, r: RateSpec, rng: RngStream,
         check: bool = False) -> tuple[DiscreteGTPattern, EventRecord]:
    """Advance by one Gillespie event (in place) and report it."""
    v = r.v
    total = float(np.sum(np.arange(1, r.N + 1) * v))
    state.time += exponential(rng.state) / total
    n, k = _pick(v, total, rng.state)
    moved = _apply(state.positions, state.N, n, k)
    if check and not _interlaced(state.positions, state.N):
        raise InterlacingError(f"interlacing broken after event at level {n}, index {k}")
    return state, EventRecord(state.time, int(n), int(k), int(moved))


def run_to(state: DiscreteGTPattern, t_end: float, r: RateSpec, rng: RngStream) -> DiscreteGTPattern:
    """Run events until the next one would pass ``t_end``; the clock ends at ``t_end``.

    Consumes the same random draws as the bulk simulator, so a replica run
    here matches the corresponding row of :func:`simulate`.
    """
    if t_end < state.time:
        raise ValueError("t_end precedes the current time")
    if r.N != state.N:
        raise ValueError("rate vector and pattern depth differ")
    _run_to(state.positions, state.N, r.v, state.time, t_end, rng.state)
    state.time = float(t_end)
    return state


def simulate(N: int, t_end: float, r: RateSpec, master_seed: int, first: int = 0,
             count: int = 1) -> np.ndarray:
    """Final flat patterns ``(count, N(N+1)/2)`` for replicas ``first .. first+count-1``."""
    if r.N != N:
        raise ValueError("rate vector and pattern depth differ")
    states = replica_states(master_seed, first, count)
    out = np.empty((count, N * (N + 1) // 2), dtype=np.int64)
    _simulate_block(N, r.v, float(t_end), states, out)
    return out


def rescale(flat, tau: float, T: float) -> np.ndarray:
    """Map particle positions to eigenvalue coordinates ``(tau*T - x)/sqrt(T)``."""
    return (tau * T - np.asarray(flat, dtype=float)) / np.sqrt(T)
