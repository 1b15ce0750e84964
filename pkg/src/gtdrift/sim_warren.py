"""Euler scheme for interlaced Brownian motions with drifts, reflected level by level.

Every level-``n`` motion carries drift ``mu_n``; after the free step, entries
of level ``n`` are clamped into ``[B_{k-1}^{n-1}, B_k^{n-1}]`` using the
already updated level below (lower barrier first, then upper). This is the
one-step form of the Skorokhod reflection. All motions start at 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .kernel_ct import DriftSpec, GTPattern
from .rng import RngStream, fill_normal, replica_states


def step_count(t_end: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("step size must be positive")
    return max(1, int(round(t_end / dt)))


@njit(cache=True, nogil=True)
def _evolve(N, steps, dt, mu, s, b, z):
    """Advance flat state ``b`` by ``steps``; returns the number of clamp activations."""
    sd = math.sqrt(dt)
    clamps = 0
    for _ in range(steps):
        fill_normal(s, z)
        for n in range(1, N + 1):
            base = n * (n - 1) // 2
            below = (n - 1) * (n - 2) // 2
            drift = mu[n - 1] * dt
            for k in range(n):
                val = b[base + k] + drift + sd * z[base + k]
                if k >= 1:
                    lo = b[below + k - 1]
                    if val < lo:
                        val = lo
                        clamps += 1
                if k <= n - 2:
                    hi = b[below + k]
                    if val > hi:
                        val = hi
                        clamps += 1
                b[base + k] = val
    return clamps


@njit(cache=True, nogil=True)
def _simulate_block(N, steps, dt, mu, states, out):
    z = np.empty(N * (N + 1) // 2)
    clamps = 0
    for r in range(states.shape[0]):
        b = out[r]
        b[:] = 0.0
        clamps += _evolve(N, steps, dt, mu, states[r], b, z)
    return clamps


def simulate(N: int, t_end: float, dt: float, d: DriftSpec, rng: RngStream) -> GTPattern:
    """One replica at time ``t_end`` (rounded to a whole number of steps)."""
    if d.N != N:
        raise ValueError("drift vector length differs from N")
    b = np.zeros(N * (N + 1) // 2)
    _evolve(N, step_count(t_end, dt), float(dt), d.mu, rng.state, b, np.empty_like(b))
    return GTPattern.from_flat(b, N)


def evolve(flat: np.ndarray, steps: int, dt: float, d: DriftSpec, rng: RngStream) -> int:
    """Advance a flat pattern in place by ``steps`` Euler steps; returns the clamp count."""
    N = d.N
    if flat.shape != (N * (N + 1) // 2,) or flat.dtype != np.float64:
        raise ValueError("expected a float64 flat pattern of N(N+1)/2 entries")
    return int(_evolve(N, int(steps), float(dt), d.mu, rng.state, flat, np.empty_like(flat)))


@dataclass
class WarrenBlock:
    patterns: np.ndarray
    clamps: int
    steps: int


def simulate_block(N: int, t_end: float, dt: float, d: DriftSpec, master_seed: int,
                   first: int = 0, count: int = 1) -> WarrenBlock:
    """Flat patterns ``(count, N(N+1)/2)`` plus clamp statistics for a block of replicas."""
    if d.N != N:
        raise ValueError("drift vector length differs from N")
    steps = step_count(t_end, dt)
    states = replica_states(master_seed, first, count)
    out = np.empty((count, N * (N + 1) // 2))
    clamps = _simulate_block(N, steps, float(dt), d.mu, states, out)
    return WarrenBlock(out, int(clamps), steps)


def reflected_slots(N: int) -> int:
    """Number of one-sided clamp checks per step (two per interior entry, one per edge entry)."""
    return sum(max(0, 2 * (n - 1)) for n in range(1, N + 1))
