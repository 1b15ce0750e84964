"""Binned one- and two-point estimates and their distances to kernel predictions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..kernel_ct import DriftSpec, KernelPoint, kernel, kernel_matrix, level_slices

GL_NODES = 8
STATISTICS = ("L1", "sup", "chi2")


@dataclass
class CorrelationEstimate:
    """Histogram of all level-``n`` points, scaled to estimate the one-point density.

    ``density_estimate = counts / (replicas * width)``, so it integrates to
    ``n`` when no point falls outside the bins.
    """

    level: int
    bin_edges: np.ndarray
    counts: np.ndarray
    replicas: int
    density_estimate: np.ndarray = field(init=False)
    std_error: np.ndarray = field(init=False)

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.replicas < 1:
            raise ValueError("need at least one replica")
        if self.counts.sum() > self.replicas * self.level:
            raise ValueError("more counts than points")
        w = np.diff(self.bin_edges)
        scale = self.replicas * w
        self.density_estimate = self.counts / scale
        # per-bin counts are sums of n indicator variables per replica; Poisson-type error
        self.std_error = np.sqrt(self.counts) / scale

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def mass(self) -> float:
        return float(np.sum(self.density_estimate * self.widths))


@dataclass
class DistanceReport:
    test: str
    statistic: str
    value: float
    threshold: float
    details: dict = field(default_factory=dict)
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")
        self.value = float(self.value)
        self.threshold = float(self.threshold)
        self.passed = bool(self.value <= self.threshold)

    def to_dict(self) -> dict:
        out = {"test": self.test, "statistic": self.statistic, "value": self.value,
               "threshold": self.threshold, "pass": self.passed}
        if self.details:
            out["details"] = self.details
        return out


def level_values(samples, level: int, N: int | None = None) -> tuple[np.ndarray, int]:
    """All level-``n`` entries of a sample stream and the number of replicas.

    ``samples`` is a flat array ``(B, N(N+1)/2)`` or an iterable of GT patterns.
    """
    if isinstance(samples, np.ndarray):
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError("empty sample stream")
        if N is None:
            N = int(round((math.sqrt(8 * samples.shape[1] + 1) - 1) / 2))
        return samples[:, level_slices(N)[level - 1]].ravel(), samples.shape[0]
    pats = list(samples)
    if not pats:
        raise ValueError("empty sample stream")
    vals = np.concatenate([np.asarray(p.levels[level - 1], dtype=float) for p in pats])
    return vals, len(pats)


def bin_edges(lo: float, hi: float, width: float, origin: float = 0.0) -> np.ndarray:
    """Edges ``origin + j*width`` covering ``[lo, hi]``."""
    j0 = math.floor((lo - origin) / width)
    j1 = math.ceil((hi - origin) / width)
    return origin + width * np.arange(j0, j1 + 1)


def default_edges(t: float, d: DriftSpec, width: float | None = None, origin: float = 0.0):
    """Bins of width ``0.1*sqrt(t)`` spanning the bulk of every level with a wide margin."""
    st = math.sqrt(t)
    width = 0.1 * st if width is None else width
    spread = 2.0 * math.sqrt(d.N * t) + 6.0 * st
    return bin_edges(t * min(d.drifts) - spread, t * max(d.drifts) + spread, width, origin)


def estimate_one_point(samples, level: int, bins, N: int | None = None) -> CorrelationEstimate:
    """Histogram estimate of the level-``n`` one-point density."""
    vals, reps = level_values(samples, level, N)
    edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(vals, edges)
    return CorrelationEstimate(level, edges, counts, reps)


def _gl(edges, nodes=GL_NODES):
    g, w = np.polynomial.legendre.leggauss(nodes)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    return (mid[:, None] + half[:, None] * g[None, :]), 0.5 * w


def kernel_bin_average(t: float, edges, level: int, d: DriftSpec) -> np.ndarray:
    """Average of ``K_t((x,n),(x,n))`` over each bin (Gauss-Legendre per bin)."""
    x, w = _gl(np.asarray(edges, dtype=float))
    vals = kernel(t, KernelPoint(x.ravel(), level), KernelPoint(x.ravel(), level), d)
    return vals.reshape(x.shape) @ w


def distance(est: CorrelationEstimate, expected, statistic: str = "L1",
             per_particle: bool = True) -> float:
    """Distance between the estimate and bin-averaged predictions.

    With ``per_particle`` both densities are divided by the level index, so
    the L1 value is the total-variation-type distance between the law of a
    uniformly chosen level-``n`` particle and its prediction.
    """
    expected = np.asarray(expected, dtype=float)
    scale = est.level if per_particle else 1
    diff = (est.density_estimate - expected) / scale
    if statistic == "L1":
        return float(np.sum(np.abs(diff) * est.widths))
    if statistic == "sup":
        return float(np.max(np.abs(diff)))
    if statistic == "chi2":
        e = expected * est.replicas * est.widths
        keep = e > 5
        return float(np.sum((est.counts[keep] - e[keep]) ** 2 / e[keep]) / max(1, keep.sum() - 1))
    raise ValueError(f"unknown statistic {statistic!r}")


def binomial_threshold(est: CorrelationEstimate, expected, sigmas: float = 3.0,
                       per_particle: bool = True) -> float:
    """``sigmas`` binomial standard errors summed over bins, in L1 units."""
    expected = np.asarray(expected, dtype=float)
    p = np.clip(expected * est.widths / est.level, 0.0, 1.0)
    sd_counts = np.sqrt(est.level * est.replicas * p * (1 - p))
    sd_l1 = sd_counts / est.replicas
    scale = est.level if per_particle else 1
    return float(sigmas * np.sum(sd_l1) / scale)


def compare_to_kernel(est: CorrelationEstimate, t: float, d: DriftSpec,
                      threshold: float | None = None, statistic: str = "L1",
                      per_particle: bool = True, expected=None, test: str = "") -> DistanceReport:
    """Distance of an estimate to the kernel diagonal (or to supplied bin averages)."""
    if expected is None:
        expected = kernel_bin_average(t, est.bin_edges, est.level, d)
    value = distance(est, expected, statistic, per_particle)
    if threshold is None:
        threshold = binomial_threshold(est, expected, per_particle=per_particle)
    raw = distance(est, expected, "L1", per_particle=False)
    return DistanceReport(test or f"one-point level {est.level}", statistic, value, threshold,
                          {"level": est.level, "replicas": est.replicas, "raw_l1": raw,
                           "mass": est.mass()})


# --- two-point functions (small N only) -------------------------------------

def estimate_two_point(samples: np.ndarray, levels: tuple[int, int], edges, N: int):
    """Binned pair density of distinct points at levels ``(n1, n2)``; returns ``(density, counts)``."""
    if N > 3:
        raise ValueError("two-point estimation is limited to N <= 3")
    sl = level_slices(N)
    a = samples[:, sl[levels[0] - 1]]
    b = samples[:, sl[levels[1] - 1]]
    edges = np.asarray(edges, dtype=float)
    counts = np.zeros((edges.size - 1, edges.size - 1))
    for i in range(a.shape[1]):
        for j in range(b.shape[1]):
            if levels[0] == levels[1] and i == j:
                continue
            c, _, _ = np.histogram2d(a[:, i], b[:, j], [edges, edges])
            counts += c
    w = np.diff(edges)
    return counts / (samples.shape[0] * np.outer(w, w)), counts


def two_point_bin_average(t: float, edges, levels: tuple[int, int], d: DriftSpec,
                          nodes: int = 4) -> np.ndarray:
    """Bin averages of ``det[[K(a,a), K(a,b)], [K(b,a), K(b,b)]]``.

    Across levels the pair density jumps on the line ``x = y``, so the
    tensor Gauss rule is only accurate off the diagonal bins.
    """
    x, w = _gl(np.asarray(edges, dtype=float), nodes)
    n1, n2 = levels
    xa = x.ravel()[:, None] * np.ones((1, x.size))
    xb = np.ones((x.size, 1)) * x.ravel()[None, :]
    kaa = kernel(t, KernelPoint(xa, n1), KernelPoint(xa, n1), d)
    kbb = kernel(t, KernelPoint(xb, n2), KernelPoint(xb, n2), d)
    kab = kernel(t, KernelPoint(xa, n1), KernelPoint(xb, n2), d)
    kba = kernel(t, KernelPoint(xb, n2), KernelPoint(xa, n1), d)
    rho = (kaa * kbb - kab * kba).reshape(x.shape[0], nodes, x.shape[0], nodes)
    return np.einsum("injm,n,m->ij", rho, w, w)


def two_point_distance(density, expected, edges, normaliser: float) -> float:
    w = np.diff(np.asarray(edges, dtype=float))
    return float(np.sum(np.abs(density - expected) * np.outer(w, w)) / normaliser)


def correlation_at(t: float, points: Sequence[KernelPoint], d: DriftSpec) -> float:
    return float(np.linalg.det(kernel_matrix(t, points, d)))


__all__ = [
    "CorrelationEstimate", "DistanceReport", "estimate_one_point", "compare_to_kernel",
    "kernel_bin_average", "distance", "binomial_threshold", "bin_edges", "default_edges",
    "estimate_two_point", "two_point_bin_average", "two_point_distance", "level_values",
]
