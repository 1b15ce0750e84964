"""Monte Carlo studies tying the three simulators to the kernels."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp

from .. import parallel, sim_matrix, sim_particles, sim_warren
from ..kernel_ct import DriftSpec, level_slices
from ..kernel_dt import RateSpec
from .statistics import (
    DistanceReport,
    bin_edges,
    compare_to_kernel,
    default_edges,
    estimate_one_point,
    kernel_bin_average,
)

log = logging.getLogger(__name__)

MODELS = ("matrix", "warren", "particles")


def sample_matrix_patterns(N, t, d: DriftSpec, replicas, seed, workers=None) -> np.ndarray:
    return parallel.run_stacked(lambda f, c: sim_matrix.simulate(N, t, d, seed, f, c),
                                replicas, N * (N + 1) // 2, workers=workers)


def sample_warren_patterns(N, t, dt, d: DriftSpec, replicas, seed, workers=None):
    """Patterns plus the fraction of clamp checks that fired."""
    blocks = parallel.run_replicas(
        lambda f, c: sim_warren.simulate_block(N, t, dt, d, seed, f, c), replicas, workers)
    if not blocks:
        return np.empty((0, N * (N + 1) // 2)), 0.0
    pats = np.concatenate([b.patterns for b in blocks])
    slots = sim_warren.reflected_slots(N) * blocks[0].steps * replicas
    frac = sum(b.clamps for b in blocks) / slots if slots else 0.0
    return pats, frac


def sample_particle_patterns(N, t_end, r: RateSpec, replicas, seed, workers=None) -> np.ndarray:
    return parallel.run_stacked(lambda f, c: sim_particles.simulate(N, t_end, r, seed, f, c),
                                replicas, N * (N + 1) // 2, dtype=np.int64, workers=workers)


def one_point_reports(samples, t, d: DriftSpec, edges=None, threshold=None, label="",
                      expected=None) -> list[DistanceReport]:
    """One report per level comparing the histogram of ``samples`` with the kernel diagonal."""
    edges = default_edges(t, d) if edges is None else edges
    reports = []
    for n in range(1, d.N + 1):
        est = estimate_one_point(samples, n, edges, d.N)
        exp_n = None if expected is None else expected[n - 1]
        reports.append(compare_to_kernel(est, t, d, threshold, expected=exp_n,
                                         test=f"{label} level {n}".strip()))
    return reports


def mc_vs_kernel(model: str, N: int, t: float, d: DriftSpec, replicas: int, seed: int,
                 dt: float = 1e-4, threshold: float | None = None, width: float | None = None,
                 workers=None) -> list[DistanceReport]:
    """One-point functions of the matrix minors or the reflected system against the kernel."""
    if model == "matrix":
        samples = sample_matrix_patterns(N, t, d, replicas, seed, workers)
    elif model == "warren":
        samples, frac = sample_warren_patterns(N, t, dt, d, replicas, seed, workers)
        log.info("warren dt=%g clamp fraction %.4g", dt, frac)
    else:
        raise ValueError(f"model must be one of matrix, warren; got {model!r}")
    return one_point_reports(samples, t, d, default_edges(t, d, width), threshold,
                             label=f"{model} N={N} t={t:g}")


@dataclass
class LadderRow:
    dt: float
    level: int
    distance: float
    clamp_fraction: float


def convergence_ladder(N: int, t_end: float, dts, d: DriftSpec, seed: int, replicas: int,
                       width: float | None = None, workers=None) -> list[LadderRow]:
    """Per-level L1 distance of the reflected-system histograms to the kernel for each step size."""
    dts = list(dts)
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("step sizes must be decreasing")
    if replicas == 0:
        return []
    edges = default_edges(t_end, d, width)
    expected = [kernel_bin_average(t_end, edges, n, d) for n in range(1, N + 1)]
    rows = []
    for dt in dts:
        samples, frac = sample_warren_patterns(N, t_end, dt, d, replicas, seed, workers)
        log.info("warren dt=%g clamp fraction %.4g", dt, frac)
        for rep in one_point_reports(samples, t_end, d, edges, 1.0, expected=expected):
            rows.append(LadderRow(dt, rep.details["level"], rep.value, frac))
    return rows


def worst_per_step(rows: list[LadderRow]) -> list[tuple[float, float]]:
    """``(dt, largest per-level distance)`` in ladder order."""
    out: dict[float, float] = {}
    for row in rows:
        out[row.dt] = max(out.get(row.dt, 0.0), row.distance)
    return list(out.items())


def non_increasing(values, slack: float = 0.1) -> bool:
    """Each value at most ``(1 + slack)`` times its predecessor."""
    return all(b <= (1.0 + slack) * a for a, b in zip(values, values[1:]))


def lattice_edges(t: float, d: DriftSpec, T: float, width: float) -> np.ndarray:
    """Bins whose edges sit halfway between rescaled lattice sites, ``width`` rounded to whole cells."""
    cell = 1.0 / math.sqrt(T)
    cells = max(1, int(round(width / cell)))
    ref = default_edges(t, d, width)
    return bin_edges(ref[0], ref[-1], cells * cell, origin=0.5 * cell)


def scaling_study(tau: float, Ts, d: DriftSpec, replicas: int, seed: int, width: float = 0.1,
                  threshold: float = 0.05, workers=None) -> list[DistanceReport]:
    """Rescaled particle positions against the continuous kernel, one report per ``T``.

    Each report's value is the largest per-level L1 distance; per-level
    values are kept in ``details``.
    """
    N = d.N
    out = []
    for T in Ts:
        r = RateSpec.from_drifts(d, T)
        raw = sample_particle_patterns(N, tau * T, r, replicas, seed, workers)
        lam = sim_particles.rescale(raw, tau, T)
        edges = lattice_edges(tau, d, T, width)
        reps = one_point_reports(lam, tau, d, edges, threshold, label=f"T={T:g}")
        worst = max(rep.value for rep in reps)
        out.append(DistanceReport(f"scaling T={T:g}", "L1", worst, threshold,
                                  {"T": T, "per_level": [rep.value for rep in reps]}))
    return out


def restriction_pvalues(samples_a: np.ndarray, samples_b: np.ndarray, keep_levels: int) -> list[float]:
    """Two-sample KS p-values for every coordinate of levels ``1..keep_levels``.

    The samples come from two parameter sets that agree on those levels;
    small p-values mean the lower levels did react to the upper ones.
    """
    width = keep_levels * (keep_levels + 1) // 2
    return [float(ks_2samp(samples_a[:, j], samples_b[:, j]).pvalue) for j in range(width)]


def clamp_fractions(N: int, t: float, dts, d: DriftSpec, replicas: int, seed: int) -> list[float]:
    """Fraction of one-sided clamp checks that fire, per step size."""
    return [sample_warren_patterns(N, t, dt, d, replicas, seed)[1] for dt in dts]


def level_slice(N: int, n: int) -> slice:
    return level_slices(N)[n - 1]
