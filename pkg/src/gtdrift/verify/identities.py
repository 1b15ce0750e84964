"""Exact identities of the kernel building blocks, checked by independent quadrature."""
from __future__ import annotations

import math

import numpy as np

from ..kernel_ct import (
    DriftSpec,
    GTPattern,
    correlation,
    density_full_pattern,
    phi_cap,
    phi_cap_coefficients,
    phi_step,
    phi_transition,
    psi,
)
from ..kernel_dt import RateSpec, phi_cap_d, psi_d
from ..numerics import DEFAULT_TOL, QuadratureError

GL_ORDER = 16


class GramConditionError(ValueError):
    pass


def truncation_halfwidth(t: float, d: DriftSpec) -> float:
    """Half-width of the real-line window for integrals against Gaussian-type tails."""
    return max(t * float(np.abs(d.mu).max()), 1.0) + 12.0 * math.sqrt(t)


def _gl_nodes(a, b, panels, order=GL_ORDER):
    """Composite Gauss-Legendre nodes/weights on ``[a, b]``; ``a``, ``b`` may be arrays (rows)."""
    g, w = np.polynomial.legendre.leggauss(order)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    s = np.linspace(0.0, 1.0, panels + 1)
    lo = a[:, None] + (b - a)[:, None] * s[None, :-1]
    half = 0.5 * (b - a)[:, None] / panels
    x = (lo + half)[:, :, None] + half[:, :, None] * g[None, None, :]
    wt = np.broadcast_to(half[:, :, None] * w[None, None, :], x.shape)
    return x.reshape(a.size, -1), wt.reshape(a.size, -1)


def _converged(fn, panels=32, tol=1e-10, max_doublings=8):
    prev = fn(panels)
    for _ in range(max_doublings):
        panels *= 2
        cur = fn(panels)
        if np.max(np.abs(cur - prev)) <= tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur
        prev = cur
    raise QuadratureError("composite Gauss-Legendre did not settle", estimates=(cur, prev))


# --- biorthogonality -----------------------------------------------------------

def gram_matrix(n: int, t: float, d: DriftSpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``G[k, l] = int Psi^{n,t}_{n-k}(x) Phi^{n,t}_{n-l}(x) dx`` for ``k, l = 1..n``."""
    L = truncation_halfwidth(t, d)

    def at(panels):
        x, w = _gl_nodes(-L, L, panels)
        x, w = x[0], w[0]
        ps = np.array([psi(n, k, t, x, d, tol) for k in range(1, n + 1)])
        ph = np.array([phi_cap(n, l, t, x, d) for l in range(1, n + 1)])
        return (ps * w) @ ph.T

    return _converged(at)


def biorthogonality_error(n: int, t: float, d: DriftSpec) -> float:
    return float(np.max(np.abs(gram_matrix(n, t, d) - np.eye(n))))


# --- convolution identities ----------------------------------------------------

def convolution_error(n: int, k: int, t: float, d: DriftSpec, xs) -> float:
    """``max_x |int phi_n(x, y) Psi^n_{n-k}(y) dy - Psi^{n-1}_{n-1-k}(x)|`` (``n >= 2``)."""
    if n < 2:
        raise ValueError("needs n >= 2")
    xs = np.asarray(xs, dtype=float)
    L = truncation_halfwidth(t, d)

    def at(panels):
        y, w = _gl_nodes(-L, xs, panels)
        f = phi_step(n, xs[:, None], y, d) * psi(n, k, t, y, d)
        return np.sum(f * w, axis=1)

    lhs = _converged(at, panels=16, tol=1e-9)
    rhs = psi(n - 1, k, t, xs, d)
    return float(np.max(np.abs(lhs - rhs)))


def _nested(level, last, upper, lower, d, g, w):
    """``int_{lower}^{upper} phi_level(upper, z) (phi_{level+1} * ... * phi_last)(z, lower) dz``."""
    if level == last:
        return float(phi_step(level, upper, lower, d))
    half = 0.5 * (upper - lower)
    total = 0.0
    for gi, wi in zip(g, w):
        z = lower + half * (gi + 1.0)
        total += wi * half * float(phi_step(level, upper, z, d)) * _nested(level + 1, last, z, lower, d, g, w)
    return total


def semigroup_error(n: int, n2: int, d: DriftSpec, xs, ys) -> float:
    """``max |iterated convolution of phi_step - phi_transition|`` over the point pairs."""
    xs, ys = np.broadcast_arrays(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    lhs = np.array([iterated_steps(n, n2, a, b, d) for a, b in zip(xs.ravel(), ys.ravel())])
    rhs = phi_transition(n, n2, xs.ravel(), ys.ravel(), d)
    return float(np.max(np.abs(lhs - rhs)))


def iterated_steps(n: int, n2: int, x: float, y: float, d: DriftSpec, order: int = 24) -> float:
    """``(phi_{n+1} * ... * phi_{n2})(x, y)`` by nested Gauss-Legendre over ordered intermediates.

    The intermediates satisfy ``x > z_1 > ... > y``; each is integrated over
    its own sub-interval so the integrand stays smooth.
    """
    if n2 <= n or not x > y:
        return 0.0
    g, w = np.polynomial.legendre.leggauss(order)
    return _nested(n + 1, n2, float(x), float(y), d, g, w)


# --- normalisation matrix ------------------------------------------------------

def m_matrix(t: float, d: DriftSpec) -> np.ndarray:
    """``M[k, l] = int e^{mu_k y} Psi^{k,t}_{k-l}(y) dy`` for ``k >= l``; NaN above the diagonal.

    This is the chain ``phi_k * ... * phi_N * Psi^N_{N-l}`` evaluated at the
    virtual variable, reduced level by level with the convolution identity.
    Entries with ``k < l`` are not needed for the determinant (and the
    integral need not converge there).
    """
    N = d.N
    L = truncation_halfwidth(t, d)
    M = np.full((N, N), np.nan)
    for k in range(1, N + 1):
        mk = d.drifts[k - 1]

        def at(panels, k=k, mk=mk):
            # centre the window on the tilted Gaussian's mean
            x, w = _gl_nodes(t * mk - L, t * mk + L, panels)
            x, w = x[0], w[0]
            return np.array([np.sum(w * np.exp(mk * x) * psi(k, l, t, x, d)) for l in range(1, k + 1)])

        M[k - 1, :k] = _converged(at)
    return M


def m_matrix_report(t: float, d: DriftSpec) -> dict:
    """Triangularity, diagonal and determinant of :func:`m_matrix` against ``e^{+t mu^2/2}``."""
    M = m_matrix(t, d)
    lower = M[np.tril_indices(d.N, -1)]
    diag = np.diag(M)
    expected = np.exp(t * d.mu ** 2 / 2.0)
    det = float(np.prod(diag))
    return {
        "max_below_diagonal": float(np.max(np.abs(lower))) if lower.size else 0.0,
        "max_diagonal_error": float(np.max(np.abs(diag - expected))),
        "normalisation": 1.0 / det,
        "normalisation_relative_error": abs(det * float(np.prod(np.exp(-t * d.mu ** 2 / 2.0))) - 1.0),
    }


# --- density as correlation ----------------------------------------------------

def random_pattern(N: int, t: float, d: DriftSpec, rng: np.random.Generator,
                   margin: float = 0.0) -> GTPattern:
    """Interlacing pattern: Gaussian top level, lower levels uniform in their interlacing cells.

    ``margin`` keeps every entry at least that far from its interlacing
    bounds; the top level is spread so that the cells stay wide enough.
    """
    st = math.sqrt(t)
    top = np.sort(t * np.asarray(d.drifts) + 1.5 * st * rng.normal(size=N))
    top = top + np.arange(N) * (2.0 * N * margin + 0.05 * st)
    levels = [top]
    for n in range(N - 1, 0, -1):
        above = levels[0]
        # entry k lives in [above_k, above_{k+1}]; the cells are disjoint, so the level is sorted
        lo, hi = above[:-1] + margin, above[1:] - margin
        levels.insert(0, lo + (hi - lo) * rng.uniform(size=n))
    return GTPattern(tuple(levels))


def symmetrised_joint_density(t: float, pattern: GTPattern, d: DriftSpec) -> float:
    """Joint density of the ``m`` labelled points, symmetrised over their ``m!`` orderings.

    Equals ``det[K]/m!`` with ``m = N(N+1)/2``.
    """
    m = len(pattern.points())
    return correlation(t, pattern.points(), d) / math.factorial(m)


def full_pattern_identity(t: float, d: DriftSpec, patterns) -> float:
    """Max relative error of ``m! * symmetrised density`` against the Gelfand-Tsetlin density."""
    worst = 0.0
    for lam in patterns:
        m = len(lam.points())
        lhs = math.factorial(m) * symmetrised_joint_density(t, lam, d)
        rhs = density_full_pattern(t, lam, d)
        if rhs == 0.0:
            worst = max(worst, abs(lhs))
            continue
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return worst


# --- numerical biorthogonalisation ---------------------------------------------

def biorthogonalize_numerically(n: int, t: float, d: DriftSpec, max_condition: float = 1e12):
    """Coefficients ``C[l, i]`` with ``Phi_{n-l} = sum_i C[l, i] e^{mu_i x}`` from a Gram solve.

    ``G[k, i] = int e^{mu_i x} Psi^{n,t}_{n-k}(x) dx`` over the exponential
    basis; biorthogonality ``C G^T = I`` fixes ``C``.
    """
    mus = d.mu[:n]
    L = truncation_halfwidth(t, d)
    c = t * float(np.mean(mus))

    def at(panels):
        x, w = _gl_nodes(c - L, c + L, panels)
        x, w = x[0], w[0]
        ps = np.array([psi(n, k, t, x, d) for k in range(1, n + 1)])
        basis = np.exp(np.outer(mus, x))
        return (ps * w) @ basis.T

    G = _converged(at)
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > max_condition:
        raise GramConditionError(f"Gram matrix condition number {cond:.3g} exceeds {max_condition:g}")
    return np.linalg.inv(G).T


def closed_form_coefficients(n: int, t: float, d: DriftSpec) -> np.ndarray:
    """Closed-form counterpart of :func:`biorthogonalize_numerically` (zeros for ``i < l``)."""
    C = np.zeros((n, n))
    for l in range(1, n + 1):
        C[l - 1, l - 1:] = phi_cap_coefficients(n, l, t, d)
    return C


# --- discrete biorthogonality --------------------------------------------------

def discrete_gram(n: int, t: float, r: RateSpec, tol: float = 1e-13) -> np.ndarray:
    """``sum_x Psi~_{n-k}(x) Phi~_{n-l}(x)`` over a window around the mode ``t``, widened until stable."""
    half = 12.0 * math.sqrt(max(t, 1.0) * r.N)
    prev = None
    for _ in range(8):
        xs = np.arange(min(-n - 2, int(math.floor(t - half))), int(math.ceil(t + half)) + 1)
        ps = np.array([psi_d(n, k, t, xs, r, shift=t) for k in range(1, n + 1)])
        ph = np.array([phi_cap_d(n, l, t, xs, r, shift=t) for l in range(1, n + 1)])
        G = ps @ ph.T
        if prev is not None and np.max(np.abs(G - prev)) <= tol:
            return G
        prev = G
        half *= 2.0
    raise QuadratureError("discrete sum window did not stabilise", estimates=(G, prev))


def discrete_biorthogonality_error(n: int, t: float, r: RateSpec) -> float:
    return float(np.max(np.abs(discrete_gram(n, t, r) - np.eye(n))))
