"""Named batteries of checks, each returning a list of :class:`DistanceReport`."""
from __future__ import annotations

import math
import time

import numpy as np

from ..kernel_ct import DriftSpec, KernelPoint, kernel
from ..kernel_dt import RateSpec, rescaled_kernel
from . import identities as I
from . import studies
from .pde import boundary_condition_check, boundary_configurations, fokker_planck_residual
from .statistics import DistanceReport

SUITES = ("identities", "mc-vs-kernel", "scaling", "pde")


def random_drifts(rng: np.random.Generator, N: int, lo: float = -2.0, hi: float = 2.0,
                  separation: float = 0.1) -> DriftSpec:
    """Uniform drifts in ``[lo, hi]`` redrawn until pairwise gaps are at least ``separation``."""
    while True:
        mu = rng.uniform(lo, hi, size=N)
        if N == 1 or np.diff(np.sort(mu)).min() >= separation:
            return DriftSpec(tuple(float(m) for m in mu))


def drift_ensemble(seed: int, count: int = 20, max_N: int = 6) -> list[DriftSpec]:
    """``count`` drift vectors with ``N`` cycling through ``1..max_N``."""
    rng = np.random.default_rng(seed)
    return [random_drifts(rng, 1 + i % max_N) for i in range(count)]


def _timed(fn):
    start = time.perf_counter()
    value = fn()
    return value, {"seconds": round(time.perf_counter() - start, 3)}


def identity_reports(ensemble, times, thresholds: dict, density_N: int = 2,
                     density_trials: int = 50, seed: int = 0) -> list[DistanceReport]:
    """Biorthogonality, convolution, semigroup, triangularity and density identities."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(-2.0, 2.0, 5)
    bio, conv, semi, below, diag = [], [], [], [], []
    start = time.perf_counter()
    for d in ensemble:
        N = d.N
        for t in times:
            bio.append(max(I.biorthogonality_error(n, t, d) for n in range(1, N + 1)))
            below_t, diag_t = _m_errors(t, d)
            below.append(below_t)
            diag.append(diag_t)
        t = times[len(conv) % len(times)]
        conv.append(max([I.convolution_error(n, k, t, d, t * np.mean(d.drifts) + math.sqrt(t) * xs)
                         for n in range(2, N + 1) for k in range(1, n)], default=0.0))
        lo = float(np.min(d.drifts))
        semi.append(max([I.semigroup_error(n, n2, d, [1.0 + lo, 2.5], [-0.5 + lo, 0.3])
                         for n in range(1, N) for n2 in range(n + 1, min(N, n + 3) + 1)], default=0.0))
    elapsed = round(time.perf_counter() - start, 3)
    meta = {"drift_vectors": len(ensemble), "times": list(times), "seconds": elapsed}

    dd = DriftSpec((-1.0, 1.0)) if density_N == 2 else DriftSpec(tuple(np.linspace(-1, 1, density_N)))
    pats = [I.random_pattern(dd.N, 1.0, dd, rng) for _ in range(density_trials)]
    dens, dmeta = _timed(lambda: I.full_pattern_identity(1.0, dd, pats))
    return [
        DistanceReport("biorthogonality", "sup", max(bio), thresholds["biorthogonality"], meta),
        DistanceReport("convolution", "sup", max(conv), thresholds["convolution"], meta),
        DistanceReport("semigroup", "sup", max(semi), thresholds["convolution"], meta),
        DistanceReport("normalisation below diagonal", "sup", max(below), thresholds["m_below_diagonal"], meta),
        DistanceReport("normalisation diagonal", "sup", max(diag), thresholds["m_diagonal"], meta),
        DistanceReport("density identity", "sup", dens, thresholds["density_identity"],
                       {"N": dd.N, "patterns": density_trials, **dmeta}),
    ]


def _m_errors(t, d):
    rep = I.m_matrix_report(t, d)
    return rep["max_below_diagonal"], rep["max_diagonal_error"]


def discrete_reports(thresholds: dict, seed: int = 0, max_N: int = 4,
                     times=(0.5, 2.0, 8.0)) -> list[DistanceReport]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N in range(1, max_N + 1):
        while True:
            v = rng.uniform(0.3, 2.0, size=N)
            if N == 1 or np.diff(np.sort(v)).min() >= 0.1:
                break
        r = RateSpec(tuple(float(x) for x in v))
        for t in times:
            worst = max(worst, max(I.discrete_biorthogonality_error(n, t, r) for n in range(1, N + 1)))
    return [DistanceReport("discrete biorthogonality", "sup", worst,
                           thresholds["discrete_biorthogonality"], {"max_N": max_N})]


def pde_reports(d: DriftSpec, t: float, thresholds: dict, seed: int = 0,
                grid_size: int = 6, hs=(1e-2, 1e-3)) -> list[DistanceReport]:
    """Forward-equation residual scaling and the log-derivative identity."""
    rng = np.random.default_rng(seed)
    grid = np.array([I.random_pattern(d.N, t, d, rng, margin=0.05).flat() for _ in range(grid_size)])
    res = [fokker_planck_residual(t, grid, h, d) for h in hs]
    ratio = res[0] / res[1] if res[1] > 0 else math.inf
    lo, hi = thresholds["fp_ratio_low"], thresholds["fp_ratio_high"]
    reports = [DistanceReport("forward equation residual ratio", "sup", max(lo / ratio, ratio / hi), 1.0,
                              {"residuals": res, "h": list(hs), "ratio": ratio, "bounds": [lo, hi]})]
    if d.N >= 2:
        configs = boundary_configurations(d.N, t, d, rng, count=10)
        viol = boundary_condition_check(t, configs, d)
        reports.append(DistanceReport("log-derivative boundary identity", "sup", viol,
                                      thresholds["boundary"], {"configurations": len(configs)}))
    return reports


def rescaled_kernel_errors(tau: float, Ts, d: DriftSpec, points) -> np.ndarray:
    """``|rescaled_kernel - kernel|`` for every ordered pair of points, one row per ``T``."""
    pairs = [(a, b) for a in points for b in points]
    exact = np.array([float(kernel(tau, a, b, d)) for a, b in pairs])
    return np.array([[abs(float(rescaled_kernel(tau, T, a, b, d)) - e) for (a, b), e in zip(pairs, exact)]
                     for T in Ts])


def default_scaling_points(levels=(1, 2, 3, 1, 2)) -> list[KernelPoint]:
    """Five ``(xi, level)`` points spread over ``[-1, 1]``."""
    return [KernelPoint(float(x), n) for x, n in zip(np.linspace(-1.0, 1.0, 5), levels)]


def scaling_reports(tau, Ts, d: DriftSpec, replicas, seed, thresholds, width=0.1,
                    workers=None) -> list[DistanceReport]:
    reports = studies.scaling_study(tau, Ts, d, replicas, seed, width, thresholds["scaling"], workers)
    values = [r.value for r in reports]
    slack = thresholds["slack"]
    mono = studies.non_increasing(values, slack)
    reports.append(DistanceReport("scaling ladder monotone", "sup", 0.0 if mono else 1.0, 0.5,
                                  {"values": values, "slack": slack}))
    return reports


def ladder_reports(N, t, dts, d, replicas, seed, thresholds, width=None, workers=None) -> list[DistanceReport]:
    rows = studies.convergence_ladder(N, t, dts, d, seed, replicas, width, workers)
    worst = studies.worst_per_step(rows)
    mono = studies.non_increasing([w for _, w in worst], thresholds["slack"])
    return [DistanceReport("warren step ladder monotone", "sup", 0.0 if mono else 1.0, 0.5,
                           {"rows": [r.__dict__ for r in rows], "worst": worst})]
