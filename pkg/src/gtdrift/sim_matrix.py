"""Fixed-time samples of the drifted Hermitian Brownian matrix and its minors."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .kernel_ct import DriftSpec, GTPattern
from .numerics import EigenError, HermitianMatrix, eigh, eigvalsh_inplace
from .rng import RngStream, fill_normal, replica_states

INTERLACING_SLACK = 1e-9


class InterlacingViolation(AssertionError):
    pass


@njit(cache=True, nogil=True)
def _fill_matrix(N, t, mu, s, z, h):
    # draw order: diagonal entries, then (re, im) for each k < l in row-major order
    fill_normal(s, z)
    st = math.sqrt(t)
    off = math.sqrt(t / 2.0)
    for k in range(N):
        h[k, k] = mu[k] * t + st * z[k]
    i = N
    for k in range(N):
        for l in range(k + 1, N):
            val = off * complex(z[i], z[i + 1])
            h[k, l] = val
            h[l, k] = val.conjugate()
            i += 2


def sample_matrix(N: int, t: float, d: DriftSpec, rng: RngStream) -> HermitianMatrix:
    """``H = t*diag(mu) + sqrt(t) * GUE``: diagonal ``N(mu_k t, t)``, off-diagonal ``(g1 + i g2)/sqrt(2)``, ``g ~ N(0, t)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    if d.N != N:
        raise ValueError("drift vector length differs from N")
    h = np.empty((N, N), dtype=np.complex128)
    _fill_matrix(N, float(t), d.mu, rng.state, np.empty(N * N), h)
    return HermitianMatrix(h)


@njit(cache=True, nogil=True)
def _fill_block(N, t, mu, states, out):
    z = np.empty(N * N)
    for r in range(states.shape[0]):
        _fill_matrix(N, t, mu, states[r], z, out[r])


def sample_matrices(N: int, t: float, d: DriftSpec, master_seed: int, first: int = 0,
                    count: int = 1) -> np.ndarray:
    """Raw matrices ``(count, N, N)`` drawn exactly as :func:`simulate` draws them."""
    if d.N != N:
        raise ValueError("drift vector length differs from N")
    out = np.empty((count, N, N), dtype=np.complex128)
    _fill_block(N, float(t), d.mu, replica_states(master_seed, first, count), out)
    return out


def minor_eigenvalues(h: HermitianMatrix) -> GTPattern:
    """Eigenvalues of the leading ``n x n`` blocks, ``n = 1..N``, as a Gelfand-Tsetlin pattern."""
    a = h.entries
    levels = tuple(eigh(a[:n, :n])[0] for n in range(1, h.order + 1))
    pattern = GTPattern(levels)
    if pattern.interlacing_violation() > INTERLACING_SLACK:
        raise InterlacingViolation("minor eigenvalues fail to interlace")
    return pattern


@njit(cache=True, nogil=True)
def _sample_block(N, t, mu, states, out):
    h = np.empty((N, N), dtype=np.complex128)
    z = np.empty(N * N)
    failures = 0
    for r in range(states.shape[0]):
        _fill_matrix(N, t, mu, states[r], z, h)
        col = 0
        for n in range(1, N + 1):
            a = h[:n, :n].copy()
            if eigvalsh_inplace(a, out[r, col:col + n]) < 0:
                failures += 1
            col += n
    return failures


def simulate(N: int, t: float, d: DriftSpec, master_seed: int, first: int = 0,
             count: int = 1) -> np.ndarray:
    """Flat minor-eigenvalue patterns ``(count, N(N+1)/2)`` for a block of replicas."""
    if d.N != N:
        raise ValueError("drift vector length differs from N")
    states = replica_states(master_seed, first, count)
    out = np.empty((count, N * (N + 1) // 2))
    if _sample_block(N, float(t), d.mu, states, out):
        raise EigenError("Jacobi sweeps did not converge")
    return out
