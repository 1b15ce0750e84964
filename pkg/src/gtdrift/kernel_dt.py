"""Fixed-time kernel of the 2+1 block/push particle system and its rescaling.

Levels are 1-based, positions are integers. Values of ``psi_d`` grow like
``e^{t}`` and values of ``phi_cap_d`` shrink like ``e^{-t v}``; both accept a
``shift`` so that ``psi_d * e^{-shift}`` and ``phi_cap_d * e^{shift}`` stay
representable for large times. Kernel entries use ``shift = t`` and are
therefore exact products.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .kernel_ct import (
    CONFLUENCE_THRESHOLD,
    PERTURBATION_EPS,
    ConfluenceError,
    DriftSpec,
    KernelPoint,
)
from .numerics import DEFAULT_TOL, circle_trapezoid, det_real


@dataclass(frozen=True)
class RateSpec:
    """Positive jump rates ``v_1..v_N`` (one per level).

    Built directly or through :meth:`from_drifts`, which applies
    ``v_n = 1 - mu_n / sqrt(T)``.
    """

    rates: tuple[float, ...]
    drifts: DriftSpec | None = None
    scale: float | None = None

    def __post_init__(self):
        v = tuple(float(r) for r in np.atleast_1d(self.rates))
        if not v:
            raise ValueError("need at least one rate")
        if not all(r > 0 and math.isfinite(r) for r in v):
            raise ValueError("rates must be positive and finite")
        object.__setattr__(self, "rates", v)

    @classmethod
    def from_drifts(cls, d: DriftSpec, T: float) -> "RateSpec":
        sT = math.sqrt(T)
        v = tuple(1.0 - m / sT for m in d.drifts)
        if min(v) <= 0:
            raise ValueError(f"T={T} too small: some rate 1 - mu/sqrt(T) is not positive")
        return cls(v, d, float(T))

    @property
    def N(self) -> int:
        return len(self.rates)

    @property
    def v(self) -> np.ndarray:
        return np.array(self.rates)

    @property
    def separation(self) -> float:
        v = np.sort(self.v)
        return float(np.diff(v).min()) if v.size > 1 else math.inf

    @property
    def confluent(self) -> bool:
        return self.separation < CONFLUENCE_THRESHOLD

    def perturbed(self, eps: float) -> "RateSpec":
        return RateSpec(tuple(r + (j + 1) * eps for j, r in enumerate(self.rates)))


class DiscretePoint(NamedTuple):
    x: int
    n: int


def _v_range(r: RateSpec, lo: int, hi: int) -> np.ndarray:
    return r.v[lo - 1:hi] if hi >= lo else np.empty(0)


def _require_distinct(v):
    v = np.sort(np.asarray(v))
    if v.size > 1 and np.diff(v).min() < CONFLUENCE_THRESHOLD:
        raise ConfluenceError("rates too close for residue sums; use the perturbed evaluation")


def _as_int_array(x):
    x = np.asarray(x)
    if x.dtype.kind == "f":
        if not np.all(x == np.round(x)):
            raise ValueError("discrete positions must be integers")
    return x.astype(np.int64)


def _residue_weights(poles: np.ndarray) -> np.ndarray:
    return np.array([1.0 / np.prod(p - np.delete(poles, i)) for i, p in enumerate(poles)])


def psi_d(n: int, k: int, t: float, x, r: RateSpec, shift: float = 0.0,
          tol: float = DEFAULT_TOL):
    """``e^{-shift} * Psi~^{n,t}_{n-k}(x)`` by trapezoid quadrature on circles.

    The integrand is ``e^{tz} z^{-(x+n+1)}`` times ``prod_{j=k+1..n}(z-v_j)``
    (``k <= n``) or ``1/prod_{j=n+1..k}(z-v_j)`` (``k > n``), integrated over
    a contour around 0 and every rate. Each ``x`` uses the circle through the
    saddle point ``|z| = (x+n+1)/t``; rate poles outside it contribute their
    residues explicitly.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if not (1 <= n <= r.N and 1 <= k <= r.N):
        raise ValueError("levels outside 1..N")
    x = _as_int_array(x)
    shape = x.shape
    x = x.ravel()
    p = (x + n + 1).astype(float)
    if k <= n:
        zeros, poles = _v_range(r, k + 1, n), np.empty(0)
    else:
        zeros, poles = np.empty(0), np.sort(_v_range(r, n + 1, k))
        _require_distinct(poles)
    out = np.zeros(x.shape)

    # residues at rate poles lying outside the circle (or all of them if there is no pole at 0)
    radius = np.where(p > 0, p / t, 0.0)
    if poles.size:
        # keep the nudge inside the saddle's width so the modulus stays O(1) on the circle
        gap = np.diff(poles).min() if poles.size > 1 else poles.min()
        rho = np.minimum(0.25 * min(poles.min(), gap), radius / np.sqrt(np.maximum(p, 1.0)))
        for q in poles:
            near = np.abs(radius - q) < rho
            radius = np.where(near & (p > 0), np.where(radius < q, q - rho, q + rho), radius)
        w = _residue_weights(poles)
        for q, wq in zip(poles, w):
            outside = q > radius
            out = out + np.where(outside, wq * np.exp(t * q - p * math.log(q) - shift), 0.0)

    rows = np.flatnonzero(p > 0)
    if rows.size:
        pr, rr = p[rows], radius[rows]
        # modulus at the saddle times the width of the saddle region, which sets the size of the answer
        width = rr / np.sqrt(pr)
        log_mod = t * rr - pr * np.log(rr) + (zeros.size - poles.size + 1) * np.log(width)
        rescale = (zeros.size - poles.size + 1) * np.log(width)

        def integrand(z):
            val = np.exp(t * (z - rr[:, None]) - pr[:, None] * (np.log(z) - np.log(rr)[:, None])
                         - rescale[:, None])
            for m in zeros:
                val = val * (z - m)
            for m in poles:
                val = val / (z - m)
            return val

        line = circle_trapezoid(integrand, 0.0, rr, tol=tol).real
        out[rows] += line * np.exp(log_mod - shift)
    return out.reshape(shape)


def psi_d_series(n: int, k: int, t: float, x: int, r: RateSpec) -> float:
    """Series-coefficient oracle for ``psi_d`` (single ``x``).

    Expands ``e^{tz}`` and the rational factor about ``z = 0`` and reads off
    the residue at 0, then adds the residues at the rate poles. Suitable for
    moderate ``t`` and ``|x|``.
    """
    p = int(x) + n + 1
    if k <= n:
        if p <= 0:
            return 0.0
        poly = np.array([1.0])
        for m in _v_range(r, k + 1, n):
            poly = np.convolve(poly, [-m, 1.0])
        # coefficient of z^{p-1} in e^{tz} * poly
        total = 0.0
        for j, c in enumerate(poly):
            e = p - 1 - j
            if e >= 0:
                total += c * math.exp(e * math.log(t) - gammaln(e + 1)) if t > 0 else 0.0
        return total
    poles = _v_range(r, n + 1, k)
    total = 0.0
    w = _residue_weights(poles)
    for q, wq in zip(poles, w):
        total += wq * math.exp(t * q) * q ** (-p)
    if p > 0:
        # residue at 0: coefficient of z^{p-1} in e^{tz} * prod_q 1/(z - q)
        series = np.array([1.0])
        for q in poles:
            geo = -q ** -(np.arange(p) + 1.0)
            series = np.convolve(series, geo)[:p]
        ex = np.exp(np.arange(p) * math.log(t) - gammaln(np.arange(p) + 1.0))
        total += float(np.convolve(series, ex)[p - 1])
    return total


def phi_cap_d(n: int, l: int, t: float, x, r: RateSpec, shift: float = 0.0):
    """``e^{shift} * Phi~^{n,t}_{n-l}(x) = sum_{i=l..n} v_i^{x+n} e^{-t v_i} / prod_{j != i}(v_i - v_j)``."""
    if not 1 <= l <= n <= r.N:
        raise ValueError("need 1 <= l <= n <= N")
    x = _as_int_array(x)
    vs = _v_range(r, l, n)
    _require_distinct(vs)
    w = _residue_weights(vs)
    out = np.zeros(x.shape)
    for q, wq in zip(vs, w):
        out = out + wq * np.exp((x + n) * math.log(q) - t * q + shift)
    return out


def phi_cap_d_contour(n: int, l: int, t: float, x, r: RateSpec, tol: float = DEFAULT_TOL):
    """Quadrature oracle for :func:`phi_cap_d`: circle around ``v_l..v_n`` avoiding 0."""
    x = _as_int_array(x)
    vs = _v_range(r, l, n)
    center = 0.5 * (vs.min() + vs.max())
    radius = 0.5 * (vs.max() - vs.min()) + 0.5 * vs.min()
    xx = x.ravel().astype(float)

    def f(w):
        val = np.exp((xx[:, None] + n) * np.log(w) - t * w)
        for q in vs:
            val = val / (w - q)
        return val

    return circle_trapezoid(f, center, radius, tol=tol).real.reshape(x.shape)


def phi_transition_d(n: int, n2: int, x, y, r: RateSpec):
    """``phi~^{(n,n2)}(x, y)``: zero unless ``n < n2`` and ``y >= x``.

    For ``m = n2 - n >= 1`` the value is
    ``sum_{i=n+1..n2} v_i^{y-x+m-1} / prod_{j != i}(v_i - v_j)``; ``m = 1``
    reduces to ``v_{n+1}^{y-x}``. ``n = 0`` is allowed.
    """
    x, y = np.broadcast_arrays(_as_int_array(x), _as_int_array(y))
    if n2 <= n:
        return np.zeros(x.shape)
    vs = _v_range(r, n + 1, n2)
    _require_distinct(vs)
    m = n2 - n
    e = np.maximum(y - x, 0) + m - 1
    w = _residue_weights(vs)
    out = np.zeros(x.shape)
    for q, wq in zip(vs, w):
        out = out + wq * np.power(q, e.astype(float))
    return np.where(y >= x, out, 0.0)


def phi_transition_d_contour(n: int, n2: int, x, y, r: RateSpec, tol: float = DEFAULT_TOL):
    """Quadrature oracle for :func:`phi_transition_d` on a circle around 0 and the rates."""
    x, y = np.broadcast_arrays(_as_int_array(x), _as_int_array(y))
    if n2 <= n:
        return np.zeros(x.shape)
    vs = _v_range(r, n + 1, n2)
    radius = vs.max() + 0.5
    e = (y - x).ravel().astype(float) + (n2 - n) - 1

    def f(z):
        val = np.exp(e[:, None] * np.log(z))
        for q in vs:
            val = val / (z - q)
        return val

    return circle_trapezoid(f, 0.0, radius, tol=tol).real.reshape(x.shape)


def _kernel_d_distinct(t, x, n, x2, n2, r, tol):
    x, x2 = np.broadcast_arrays(_as_int_array(x), _as_int_array(x2))
    out = -phi_transition_d(n, n2, x, x2, r)
    for k in range(1, n2 + 1):
        out = out + psi_d(n, k, t, x, r, shift=t, tol=tol) * phi_cap_d(n2, k, t, x2, r, shift=t)
    return out


def kernel_d(t: float, a: DiscretePoint, b: DiscretePoint, r: RateSpec,
             tol: float = DEFAULT_TOL):
    """``K~_t((x,n),(x',n')) = -phi~^{(n,n')}(x,x') + sum_{k<=n'} Psi~^n_{n-k}(x) Phi~^{n'}_{n'-k}(x')``."""
    (x, n), (x2, n2) = a, b
    if t <= 0:
        raise ValueError("t must be positive")
    for lvl in (n, n2):
        if not 1 <= lvl <= r.N:
            raise ValueError(f"level {lvl} outside 1..{r.N}")
    if r.confluent:
        f1 = _kernel_d_distinct(t, x, n, x2, n2, r.perturbed(PERTURBATION_EPS), tol)
        f2 = _kernel_d_distinct(t, x, n, x2, n2, r.perturbed(PERTURBATION_EPS / 2), tol)
        return 2.0 * f2 - f1
    return _kernel_d_distinct(t, x, n, x2, n2, r, tol)


def correlation_d(t: float, points, r: RateSpec, tol: float = DEFAULT_TOL) -> float:
    """``det[K~_t(p_i, p_j)]`` for a list of :class:`DiscretePoint`."""
    m = len(points)
    K = np.empty((m, m))
    for i, a in enumerate(points):
        for j, b in enumerate(points):
            K[i, j] = float(kernel_d(t, a, b, r, tol))
    return det_real(K)


def lattice_position(tau: float, T: float, xi) -> np.ndarray:
    """Integer site ``floor(tau*T - xi*sqrt(T))`` probed by the rescaled kernel."""
    # guard so that exact lattice points are not pushed down by rounding
    raw = tau * T - np.asarray(xi, dtype=float) * math.sqrt(T)
    return np.floor(raw + 1e-9 * max(1.0, tau * T)).astype(np.int64)


def rescaled_kernel(tau: float, T: float, a: KernelPoint, b: KernelPoint, d: DriftSpec,
                    tol: float = DEFAULT_TOL):
    """Discrete kernel under diffusive scaling, comparable with :func:`kernel_ct.kernel`.

    Rates are ``v_n = 1 - mu_n/sqrt(T)``, time ``tau*T`` and the eigenvalue
    coordinate ``xi`` maps to the site ``floor(tau*T - xi*sqrt(T))``. The
    result ``T^{(n-n')/2} * sqrt(T) * K~`` tends to ``K_tau((xi,n),(xi',n'))``.
    """
    (xi, n), (xi2, n2) = a, b
    r = RateSpec.from_drifts(d, T)
    x = lattice_position(tau, T, xi)
    x2 = lattice_position(tau, T, xi2)
    val = kernel_d(tau * T, DiscretePoint(x, n), DiscretePoint(x2, n2), r, tol)
    return T ** ((n - n2) / 2.0) * math.sqrt(T) * val
