"""Fixed-time correlation kernel of the drifted GUE minor process.

Levels are 1-based throughout (``n = 1..N``), matching the usual indexing
of Gelfand-Tsetlin patterns. Every evaluator is vectorised over positions;
levels are plain integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .numerics import (
    DEFAULT_TOL,
    circle_trapezoid,
    det_real,
    gaussian_half_extent,
    sym_poly_p,
    vertical_trapezoid,
)

CONFLUENCE_THRESHOLD = 1e-6
PERTURBATION_EPS = 1e-4

SQRT_2PI = math.sqrt(2.0 * math.pi)


class ConfluenceError(ValueError):
    """Drifts (or rates) are too close for the closed residue formulas."""


@dataclass(frozen=True)
class DriftSpec:
    """Drift vector ``mu_1..mu_N`` with the derived contour abscissa.

    ``contour_abscissa`` defaults to ``min(mu) - 1`` and must lie strictly to
    the left of every drift.
    """

    drifts: tuple[float, ...]
    contour_abscissa: float | None = None
    separation: float = field(init=False)

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(self.drifts))
        if not mu:
            raise ValueError("need at least one drift")
        if not all(math.isfinite(m) for m in mu):
            raise ValueError("drifts must be finite")
        object.__setattr__(self, "drifts", mu)
        a = min(mu) - 1.0 if self.contour_abscissa is None else float(self.contour_abscissa)
        if not a < min(mu):
            raise ValueError("contour abscissa must be < min(drifts)")
        object.__setattr__(self, "contour_abscissa", a)
        object.__setattr__(self, "separation", _min_gap(mu))

    @property
    def N(self) -> int:
        return len(self.drifts)

    @property
    def mu(self) -> np.ndarray:
        return np.array(self.drifts)

    @property
    def confluent(self) -> bool:
        return self.separation < CONFLUENCE_THRESHOLD

    def perturbed(self, eps: float) -> "DriftSpec":
        """Drifts ``mu_j + j*eps`` (j 1-based)."""
        return DriftSpec(tuple(m + (j + 1) * eps for j, m in enumerate(self.drifts)))


def _min_gap(values) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    return float(np.diff(v).min()) if v.size > 1 else math.inf


def _require_distinct(values, what="drifts"):
    if _min_gap(values) < CONFLUENCE_THRESHOLD:
        raise ConfluenceError(f"{what} closer than {CONFLUENCE_THRESHOLD:g}; "
                              "use the perturbed evaluation")


class KernelPoint(NamedTuple):
    x: float
    n: int


@dataclass(frozen=True)
class GTPattern:
    """Triangular array; ``levels[n-1]`` holds the ``n`` ascending entries of level n."""

    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        lv = tuple(np.asarray(l, dtype=float) for l in self.levels)
        for n, l in enumerate(lv, start=1):
            if l.shape != (n,):
                raise ValueError(f"level {n} must hold {n} entries")
        object.__setattr__(self, "levels", lv)

    @property
    def N(self) -> int:
        return len(self.levels)

    @classmethod
    def from_flat(cls, flat, N: int | None = None) -> "GTPattern":
        flat = np.asarray(flat, dtype=float)
        if N is None:
            N = int(round((math.sqrt(8 * flat.size + 1) - 1) / 2))
        out, i = [], 0
        for n in range(1, N + 1):
            out.append(flat[i:i + n])
            i += n
        return cls(tuple(out))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    def interlacing_violation(self) -> float:
        """Largest amount by which ``x_k^{n+1} <= x_k^n <= x_{k+1}^{n+1}`` fails (<= 0 if valid)."""
        return interlacing_violation(self.flat()[None, :], self.N)[0]

    def is_interlaced(self, slack: float = 0.0) -> bool:
        return self.interlacing_violation() <= slack

    def points(self) -> list[KernelPoint]:
        return [KernelPoint(float(x), n) for n, l in enumerate(self.levels, start=1) for x in l]


def level_slices(N: int) -> list[slice]:
    """Slices of the flat (level-major) layout of an N-level pattern."""
    return [slice(n * (n - 1) // 2, n * (n + 1) // 2) for n in range(1, N + 1)]


def interlacing_violation(flat, N: int) -> np.ndarray:
    """Batched interlacing check on flat patterns of shape ``(B, N(N+1)/2)``."""
    flat = np.atleast_2d(np.asarray(flat, dtype=float))
    sl = level_slices(N)
    worst = np.full(flat.shape[0], -np.inf)
    for n in range(1, N):
        lo, hi = flat[:, sl[n - 1]], flat[:, sl[n]]
        worst = np.maximum(worst, (hi[:, :-1] - lo).max(axis=1))
        worst = np.maximum(worst, (lo - hi[:, 1:]).max(axis=1))
    return worst


# --- building blocks ---------------------------------------------------------

def _mu_range(d: DriftSpec, lo: int, hi: int) -> np.ndarray:
    """``mu_lo..mu_hi`` inclusive (1-based); empty if ``hi < lo``."""
    return d.mu[lo - 1:hi] if hi >= lo else np.empty(0)


def _psi_factors(n: int, k: int, d: DriftSpec):
    if not 1 <= k <= d.N:
        raise ValueError(f"k={k} outside 1..{d.N}")
    if not 1 <= n <= d.N:
        raise ValueError(f"n={n} outside 1..{d.N}")
    if k <= n:
        return _mu_range(d, k + 1, n), np.empty(0)
    return np.empty(0), _mu_range(d, n + 1, k)


def psi(n: int, k: int, t: float, x, d: DriftSpec, tol: float = DEFAULT_TOL):
    """``Psi^{n,t}_{n-k}(x)`` by trapezoid quadrature of its vertical-line integral.

    The integrand is ``e^{t z^2/2 - x z}`` times ``prod_{j=k+1..n}(z-mu_j)``
    (``k <= n``) or ``1/prod_{j=n+1..k}(z-mu_j)`` (``k > n``), with the
    contour to the left of all poles. Each ``x`` is integrated along the line
    through the saddle point ``z = x/t``, nudged away from poles; poles lying
    left of the chosen line are compensated by their residues. This is the
    same integral as on the nominal contour ``Re z = mu_-`` but without the
    cancellation that contour suffers for large ``|x|``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    zeros, poles = _psi_factors(n, k, d)
    c = x / t
    residue = np.zeros_like(x)
    if poles.size:
        _require_distinct(poles)
        poles = np.sort(poles)
        rho = 0.5 if poles.size == 1 else min(0.5, 0.5 * np.diff(poles).min())
        for p in poles:
            near = np.abs(c - p) < rho
            c = np.where(near, np.where(c < p, p - rho, p + rho), c)
        for i, p in enumerate(poles):
            others = np.delete(poles, i)
            left = p < c
            if np.any(left):
                res = np.exp(t * p * p / 2.0 - x[left] * p) / np.prod(p - others)
                residue[left] += res

    # divide out the modulus at the line's real point so the tolerance is relative
    lead = t * c * c / 2.0 - x * c

    def integrand(z):
        val = np.exp(t * z * z / 2.0 - x[:, None] * z - lead[:, None])
        for m in zeros:
            val = val * (z - m)
        for m in poles:
            val = val / (z - m)
        return val

    offset = np.abs(c) + np.abs(d.mu).max()
    S = gaussian_half_extent(t, offset, zeros.size, 1.0, tol)
    line = vertical_trapezoid(integrand, c, S, tol=tol).real * np.exp(lead)
    sign = -1.0 if (n - k) % 2 else 1.0
    return (sign * (line - residue)).reshape(shape)


def psi_hermite(n: int, k: int, t: float, x, d: DriftSpec):
    """Closed form of ``Psi^{n,t}_{n-k}`` for ``k <= n`` through ``p_{n-k}``.

    ``e^{-x^2/2t}/sqrt(2 pi t) * t^{-(n-k)/2} * p_{n-k}((mu_j t - x)/sqrt(t), j=k+1..n)``.
    """
    if not 1 <= k <= n <= d.N:
        raise ValueError("Hermite form needs 1 <= k <= n <= N")
    x = np.asarray(x, dtype=float)
    mus = _mu_range(d, k + 1, n)
    st = math.sqrt(t)
    args = (mus[None, :] * t - x.reshape(-1, 1)) / st
    p = sym_poly_p(args) if mus.size else np.ones(x.size)
    gauss = np.exp(-x.ravel() ** 2 / (2.0 * t)) / (SQRT_2PI * st)
    return (gauss * t ** (-(n - k) / 2.0) * p).reshape(x.shape)


def phi_cap_coefficients(n: int, l: int, t: float, d: DriftSpec) -> np.ndarray:
    """Coefficients ``b_i`` (i = l..n) with ``Phi^{n,t}_{n-l}(x) = sum b_i e^{mu_i x}``.

    ``b_i = e^{-t mu_i^2/2} / prod_{j=l..n, j != i} (mu_j - mu_i)``; the
    ``(-1)^{n-l}`` of the contour representation is absorbed in the
    orientation of the differences.
    """
    if not 1 <= l <= n <= d.N:
        raise ValueError("need 1 <= l <= n <= N")
    mus = _mu_range(d, l, n)
    _require_distinct(mus)
    b = np.empty(mus.size)
    for i, m in enumerate(mus):
        b[i] = math.exp(-t * m * m / 2.0) / np.prod(np.delete(mus, i) - m)
    return b


def phi_cap(n: int, l: int, t: float, x, d: DriftSpec):
    """``Phi^{n,t}_{n-l}(x)`` as the finite residue sum over ``mu_l..mu_n``."""
    x = np.asarray(x, dtype=float)
    mus = _mu_range(d, l, n)
    b = phi_cap_coefficients(n, l, t, d)
    out = np.zeros(x.shape)
    for bi, m in zip(b, mus):
        out = out + bi * np.exp(m * x)
    return out


def phi_cap_contour(n: int, l: int, t: float, x, d: DriftSpec, tol: float = DEFAULT_TOL):
    """Quadrature oracle for :func:`phi_cap`: circle around ``mu_l..mu_n``."""
    x = np.asarray(x, dtype=float)
    mus = _mu_range(d, l, n)
    center = 0.5 * (mus.min() + mus.max())
    radius = 0.5 * (mus.max() - mus.min()) + 1.0
    xx = x.ravel()

    def f(w):
        val = np.exp(-t * w * w / 2.0 + xx[:, None] * w)
        for m in mus:
            val = val / (w - m)
        return val

    sign = -1.0 if (n - l) % 2 else 1.0
    val = circle_trapezoid(f, center, radius, tol=tol)
    return (sign * val.real).reshape(x.shape)


def phi_step(n: int, x, y, d: DriftSpec):
    """``phi_n(x, y) = e^{mu_n (y - x)} 1[x > y]``."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    m = d.drifts[n - 1]
    return np.where(x > y, np.exp(m * np.minimum(y - x, 0.0)), 0.0)


def phi_transition(n: int, n2: int, x, y, d: DriftSpec):
    """``phi^{(n,n2)}(x, y)``: composed level transitions from ``n`` to ``n2``.

    Zero for ``n2 <= n``; ``phi_step`` for ``n2 = n + 1``; otherwise
    ``sum_{i=n+1..n2} e^{mu_i (y-x)} prod_{j != i} 1/(mu_j - mu_i) * 1[x > y]``.
    ``n = 0`` is allowed (transition from the virtual level).
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if n2 <= n:
        return np.zeros(x.shape)
    if n2 == n + 1:
        return phi_step(n2, x, y, d)
    mus = _mu_range(d, n + 1, n2)
    _require_distinct(mus)
    gap = np.minimum(y - x, 0.0)
    out = np.zeros(x.shape)
    for i, m in enumerate(mus):
        out = out + np.exp(m * gap) / np.prod(np.delete(mus, i) - m)
    return np.where(x > y, out, 0.0)


def phi_transition_contour(n: int, n2: int, x, y, d: DriftSpec, tol: float = DEFAULT_TOL):
    """Quadrature oracle for :func:`phi_transition` with ``n2 - n >= 2``.

    For ``x > y`` the vertical line can be closed to the right, which turns
    the integral into minus a circle integral around ``mu_{n+1..n2}``; for
    ``x < y`` it closes to the left onto an empty region.
    """
    if n2 - n < 2:
        raise ValueError("contour form needs n2 - n >= 2")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    mus = _mu_range(d, n + 1, n2)
    center = 0.5 * (mus.min() + mus.max())
    radius = 0.5 * (mus.max() - mus.min()) + 1.0
    u = (y - x).ravel()

    def f(z):
        val = np.exp(z * u[:, None])
        for m in mus:
            val = val / (z - m)
        return val

    sign = (-1.0) ** (n2 - n)
    closed = circle_trapezoid(f, center, radius, tol=tol).real
    out = np.where(u < 0, -sign * closed, 0.0)
    return out.reshape(x.shape)


# --- kernel and correlations -------------------------------------------------

def _kernel_distinct(t, x, n, x2, n2, d: DriftSpec, tol):
    x, x2 = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(x2, dtype=float))
    out = -phi_transition(n, n2, x, x2, d)
    for k in range(1, n2 + 1):
        out = out + psi(n, k, t, x, d, tol) * phi_cap(n2, k, t, x2, d)
    return out


def _richardson(fn, d: DriftSpec):
    f1 = fn(d.perturbed(PERTURBATION_EPS))
    f2 = fn(d.perturbed(PERTURBATION_EPS / 2.0))
    return 2.0 * f2 - f1


def kernel(t: float, a: KernelPoint, b: KernelPoint, d: DriftSpec, tol: float = DEFAULT_TOL):
    """``K_t((x,n),(x',n')) = -phi^{(n,n')}(x,x') + sum_{k<=n'} Psi^{n}_{n-k}(x) Phi^{n'}_{n'-k}(x')``.

    Positions may be arrays (broadcast together). Confluent drifts are
    handled by perturbing to ``mu_j + j*eps`` and extrapolating in ``eps``.
    """
    (x, n), (x2, n2) = a, b
    if t <= 0:
        raise ValueError("t must be positive")
    for lvl in (n, n2):
        if not 1 <= lvl <= d.N:
            raise ValueError(f"level {lvl} outside 1..{d.N}")
    if d.confluent:
        return _richardson(lambda dd: _kernel_distinct(t, x, n, x2, n2, dd, tol), d)
    return _kernel_distinct(t, x, n, x2, n2, d, tol)


def one_point(t: float, x, n: int, d: DriftSpec, tol: float = DEFAULT_TOL):
    """One-point density ``rho^1_t(x, n) = K_t((x,n),(x,n))``."""
    return kernel(t, KernelPoint(x, n), KernelPoint(x, n), d, tol)


def kernel_matrix(t: float, points: Sequence[KernelPoint], d: DriftSpec,
                  tol: float = DEFAULT_TOL) -> np.ndarray:
    """``[K_t(p_i, p_j)]_{ij}`` for a list of points."""
    if d.confluent:
        return _richardson(lambda dd: kernel_matrix(t, points, dd, tol), d)
    xs = np.array([p.x for p in points], dtype=float)
    ns = np.array([p.n for p in points], dtype=int)
    m = len(points)
    psi_tab = np.zeros((m, d.N + 1))
    phi_tab = np.zeros((m, d.N + 1))
    for n in np.unique(ns):
        sel = ns == n
        for k in range(1, d.N + 1):
            psi_tab[sel, k] = psi(int(n), k, t, xs[sel], d, tol)
        for k in range(1, n + 1):
            phi_tab[sel, k] = phi_cap(int(n), k, t, xs[sel], d)
    K = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            nj = ns[j]
            K[i, j] = (psi_tab[i, 1:nj + 1] @ phi_tab[j, 1:nj + 1]
                       - float(phi_transition(int(ns[i]), int(nj), xs[i], xs[j], d)))
    return K


def correlation(t: float, points: Sequence[KernelPoint], d: DriftSpec,
                tol: float = DEFAULT_TOL) -> float:
    """m-point correlation ``det[K_t(p_i, p_j)]``."""
    if len(points) < 1:
        raise ValueError("need at least one point")
    return det_real(kernel_matrix(t, points, d, tol))


# --- joint densities ---------------------------------------------------------

def density_full_pattern_batch(t: float, flat, d: DriftSpec) -> np.ndarray:
    """Normalised joint density of all minor eigenvalues on ``GT_N``.

    ``flat`` has shape ``(B, N(N+1)/2)`` in level-major order. Outside the
    (closed) Gelfand-Tsetlin cone the density is zero.
    """
    N = d.N
    flat = np.atleast_2d(np.asarray(flat, dtype=float))
    B = flat.shape[0]
    sl = level_slices(N)
    top = flat[:, sl[N - 1]]
    psi_mat = np.empty((B, N, N))
    for k in range(1, N + 1):
        psi_mat[:, k - 1, :] = psi_hermite(N, k, t, top, d)
    dens = np.linalg.det(psi_mat) * math.exp(-t * float(np.sum(d.mu ** 2)) / 2.0)
    for n in range(1, N + 1):
        cur = flat[:, sl[n - 1]]
        mat = np.empty((B, n, n))
        if n > 1:
            prev = flat[:, sl[n - 2]]
            mat[:, :n - 1, :] = phi_step(n, prev[:, :, None], cur[:, None, :], d)
        mat[:, n - 1, :] = np.exp(d.drifts[n - 1] * cur)
        dens = dens * np.linalg.det(mat)
    return np.where(interlacing_violation(flat, N) <= 0.0, dens, 0.0)


def density_full_pattern(t: float, lam: GTPattern, d: DriftSpec) -> float:
    """Normalised joint density of one Gelfand-Tsetlin pattern."""
    if lam.N != d.N:
        raise ValueError("pattern depth must equal the number of drifts")
    if not lam.is_interlaced():
        return 0.0
    return float(density_full_pattern_batch(t, lam.flat()[None, :], d)[0])


def _top_unnormalised(t, lam, mu):
    # det[e^{-(lam_i - t mu_j)^2/(2t)}] * Delta(lam) / Delta(mu), batched over lam rows
    lam = np.atleast_2d(lam)
    diff = lam[:, :, None] - t * mu[None, None, :]
    det = np.linalg.det(np.exp(-diff ** 2 / (2.0 * t)))
    N = mu.size
    van_l = np.ones(lam.shape[0])
    van_m = 1.0
    for i in range(N):
        for j in range(i + 1, N):
            van_l = van_l * (lam[:, j] - lam[:, i])
            van_m *= mu[j] - mu[i]
    return det * van_l / van_m


def top_level_constant_closed(N: int, t: float) -> float:
    """Normalisation of the top-level density, ``((2 pi t)^{N/2} t^{N(N-1)/2})^{-1}``."""
    return 1.0 / ((2.0 * math.pi * t) ** (N / 2.0) * t ** (N * (N - 1) / 2.0))


@lru_cache(maxsize=64)
def _top_level_constant(drifts: tuple, t: float) -> float:
    mu = np.array(drifts)
    N = mu.size
    if N > 3:
        return top_level_constant_closed(N, t)
    # the unnormalised density is symmetric in lam; integrate over R^N and divide by N!
    st = math.sqrt(t)
    lo = t * mu.min() - 10.0 * st - (N - 1) * 2.0 * st
    hi = t * mu.max() + 10.0 * st + (N - 1) * 2.0 * st
    m = {1: 2001, 2: 601, 3: 161}[N]
    g = np.linspace(lo, hi, m)
    h = g[1] - g[0]
    mesh = np.stack(np.meshgrid(*([g] * N), indexing="ij"), axis=-1).reshape(-1, N)
    total = 0.0
    for chunk in np.array_split(mesh, max(1, mesh.shape[0] // 200000)):
        total += _top_unnormalised(t, chunk, mu).sum()
    return math.factorial(N) / (total * h ** N)


def density_top_level(t: float, lam, d: DriftSpec) -> np.ndarray | float:
    """Density of the ordered eigenvalues of the full ``N x N`` matrix.

    Accepts one ascending vector or a batch ``(B, N)``. The normalisation
    is computed once per ``(mu, t)`` by quadrature for ``N <= 3``.
    """
    _require_distinct(d.mu)
    lam = np.asarray(lam, dtype=float)
    single = lam.ndim == 1
    vals = _top_unnormalised(t, np.atleast_2d(lam), d.mu) * _top_level_constant(d.drifts, float(t))
    return float(vals[0]) if single else vals
