"""Finite-difference checks of the forward equation and the level-wise log-derivative identity."""
from __future__ import annotations

import numpy as np

from ..kernel_ct import DriftSpec, density_full_pattern_batch, interlacing_violation, level_slices


def _coordinate_levels(N: int) -> np.ndarray:
    lv = np.empty(N * (N + 1) // 2, dtype=int)
    for n, sl in enumerate(level_slices(N), start=1):
        lv[sl] = n
    return lv


def interior_distance(flat, N: int) -> np.ndarray:
    """Distance of each flat pattern to the boundary of the Gelfand-Tsetlin cone."""
    return -interlacing_violation(flat, N)


def fokker_planck_residual(t: float, grid, h: float, d: DriftSpec,
                           operator_drifts=None) -> float:
    """``max |dp/dt - sum_{n,k} (1/2 d^2/dx^2 - mu_n d/dx) p|`` over the grid, by central differences.

    ``operator_drifts`` replaces the drifts used in the spatial operator
    (the density itself always uses ``d``); a wrong choice should leave a
    visible residual.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    N = d.N
    if np.any(interior_distance(grid, N) <= 3 * h):
        raise ValueError("grid points must stay more than 3h inside the cone")
    mu_op = d.mu if operator_drifts is None else np.asarray(operator_drifts, dtype=float)
    lv = _coordinate_levels(N)
    p0 = density_full_pattern_batch(t, grid, d)
    dt = (density_full_pattern_batch(t + h, grid, d) - density_full_pattern_batch(t - h, grid, d)) / (2 * h)
    rhs = np.zeros_like(p0)
    for j in range(grid.shape[1]):
        e = np.zeros(grid.shape[1])
        e[j] = h
        pp = density_full_pattern_batch(t, grid + e, d)
        pm = density_full_pattern_batch(t, grid - e, d)
        rhs += 0.5 * (pp - 2 * p0 + pm) / h ** 2 - mu_op[lv[j] - 1] * (pp - pm) / (2 * h)
    return float(np.max(np.abs(dt - rhs)))


def boundary_condition_check(t: float, configs, d: DriftSpec, h: float = 1e-4) -> float:
    """Max over configurations and levels ``n < N`` of ``|d log p / dx_k^n - (mu_n - mu_{n+1})|``.

    Configurations may sit on the cone boundary, where the density can
    vanish. Since ``log p`` is affine in ``x_k^n`` inside each cell, the
    quotient is taken from whichever side has two interior points
    (central if both neighbours are interior). Coordinates without such a
    stencil (all neighbours on a zero-density face) are skipped, but every
    configuration must yield at least one checked coordinate.
    """
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    N = d.N
    lv = _coordinate_levels(N)
    worst = 0.0
    checked = np.zeros(configs.shape[0], dtype=int)
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in np.flatnonzero(lv < N):
            target = d.drifts[lv[j] - 1] - d.drifts[lv[j]]
            e = np.zeros(configs.shape[1])
            e[j] = h
            lp = {s: np.log(density_full_pattern_batch(t, configs + s * e, d)) for s in (-2, -1, 1, 2)}
            central = (lp[1] - lp[-1]) / (2 * h)
            forward = (lp[2] - lp[1]) / h
            backward = (lp[-1] - lp[-2]) / h
            deriv = np.where(np.isfinite(central), central,
                             np.where(np.isfinite(forward), forward, backward))
            ok = np.isfinite(deriv)
            checked += ok
            if np.any(ok):
                worst = max(worst, float(np.max(np.abs(deriv[ok] - target))))
    if np.any(checked == 0):
        raise ValueError("some configuration has no coordinate with an interior stencil")
    return worst


def boundary_configurations(N: int, t: float, d: DriftSpec, rng: np.random.Generator, count: int = 10):
    """Valid patterns with one entry of a level ``n < N`` moved onto an interlacing bound."""
    from .identities import random_pattern

    sl = level_slices(N)
    out = []
    while len(out) < count:
        i = len(out)
        flat = random_pattern(N, t, d, rng, margin=0.05).flat()
        n = 1 + i % (N - 1)
        k = int(rng.integers(n))
        above = flat[sl[n]]
        flat[sl[n - 1].start + k] = above[k] if i % 2 == 0 else above[k + 1]
        if interlacing_violation(flat, N)[0] <= 0:
            out.append(flat)
    return np.array(out)
