"""Shared numerical kernels.

Contour quadrature (vertical lines and circles, trapezoid rule with node
doubling), Gaussian-moment symmetric polynomials, a self-contained Jacobi
eigensolver for small Hermitian matrices, determinants and a composite
Gauss-Legendre rule for real-line integrals.

All routines are pure functions of their inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

DEFAULT_TOL = 1e-10
MAX_DOUBLINGS = 14

__all__ = [
    "DEFAULT_TOL",
    "QuadratureError",
    "EigenError",
    "VerticalLineContour",
    "CircleContour",
    "HermitianMatrix",
    "EighReport",
    "gaussian_half_extent",
    "vertical_trapezoid",
    "circle_trapezoid",
    "integrate_vertical",
    "integrate_circle",
    "integrate_real",
    "elementary_coefficients",
    "sym_poly_p",
    "eigh",
    "eigvalsh_batch",
    "det_real",
]


class QuadratureError(RuntimeError):
    """Node doubling did not reach the requested tolerance."""

    def __init__(self, message: str, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class EigenError(RuntimeError):
    """Jacobi sweeps did not converge."""


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite input")


@dataclass(frozen=True)
class VerticalLineContour:
    """The line ``abscissa + i*s`` for ``s`` in ``[-half_extent, half_extent]``."""

    abscissa: float
    half_extent: float
    node_count: int = 64

    def __post_init__(self):
        _check_finite(self.abscissa, self.half_extent)
        if self.half_extent <= 0:
            raise ValueError("half_extent must be positive")
        if self.node_count < 2:
            raise ValueError("node_count must be at least 2")

    @classmethod
    def gaussian(cls, t: float, abscissa: float = 0.0, degree: int = 0,
                 scale: float = 1.0, tol: float = DEFAULT_TOL,
                 node_count: int = 64) -> "VerticalLineContour":
        """Truncate where ``scale * exp(-t s^2/2) * (1+|a|+s)^degree < tol/100``."""
        s = gaussian_half_extent(t, abs(abscissa), degree, scale, tol)
        return cls(float(abscissa), float(s), node_count)


@dataclass(frozen=True)
class CircleContour:
    """Positively oriented circle; ``node_count`` must be a power of two."""

    center: complex
    radius: float
    node_count: int = 64

    def __post_init__(self):
        _check_finite(self.center, self.radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        n = self.node_count
        if n < 1 or n & (n - 1):
            raise ValueError("node_count must be a power of two")


def gaussian_half_extent(t, offset=0.0, degree=0, scale=1.0, tol=DEFAULT_TOL):
    """Smallest practical ``S`` with ``scale*exp(-t S^2/2)*(1+offset+S)^degree < tol/100``.

    Works elementwise on array inputs.
    """
    t = np.asarray(t, dtype=float)
    offset = np.asarray(offset, dtype=float)
    scale = np.maximum(np.asarray(scale, dtype=float), 1e-300)
    target = math.log(100.0 / tol)
    s = np.sqrt(2.0 * (target + np.log(np.maximum(scale, 1.0))) / t)
    for _ in range(4):
        grow = degree * np.log1p(offset + s) + np.log(scale)
        s = np.sqrt(2.0 * np.maximum(target + grow, 1.0) / t)
    return s + 1.0 / np.sqrt(t)


def vertical_trapezoid(f: Callable, abscissa, half_extent, tol=DEFAULT_TOL,
                       node_count=64, max_doublings=MAX_DOUBLINGS):
    """Batched ``(1/2 pi i) int f(z) dz`` along vertical lines.

    ``abscissa`` and ``half_extent`` broadcast to a common shape ``(m,)``;
    ``f`` receives ``z`` of shape ``(m, nodes)`` and must return the same
    shape. Returns an array of shape ``(m,)``.
    """
    a = np.atleast_1d(np.asarray(abscissa, dtype=float))
    S = np.atleast_1d(np.asarray(half_extent, dtype=float))
    a, S = np.broadcast_arrays(a, S)
    n = int(node_count)
    h = 2.0 * S / n
    j = np.arange(n + 1)
    z = a[:, None] + 1j * (-S[:, None] + h[:, None] * j[None, :])
    fz = f(z)
    total = fz.sum(axis=1) - 0.5 * (fz[:, 0] + fz[:, -1])
    est = h * total
    for _ in range(max_doublings):
        n *= 2
        h = h / 2.0
        jn = np.arange(1, n, 2)
        z = a[:, None] + 1j * (-S[:, None] + h[:, None] * jn[None, :])
        total = total + f(z).sum(axis=1)
        new = h * total
        diff = np.abs(new - est)
        est = new
        if np.all(diff <= tol * np.maximum(1.0, np.abs(new))):
            return est / (2.0 * np.pi)
    raise QuadratureError("vertical-line quadrature did not converge",
                          estimates=(est / (2.0 * np.pi), (est - diff) / (2.0 * np.pi)))


def circle_trapezoid(f: Callable, center, radius, tol=DEFAULT_TOL,
                     node_count=64, max_doublings=MAX_DOUBLINGS):
    """Batched ``(1/2 pi i) oint f(w) dw`` over circles.

    Same broadcasting convention as :func:`vertical_trapezoid`. The
    trapezoid rule is spectrally accurate for integrands analytic on an
    annulus around the circle.
    """
    c = np.atleast_1d(np.asarray(center, dtype=complex))
    r = np.atleast_1d(np.asarray(radius, dtype=float))
    c, r = np.broadcast_arrays(c, r)
    n = int(node_count)

    def mean_at(theta):
        dz = r[:, None] * np.exp(1j * theta)[None, :]
        return (f(c[:, None] + dz) * dz).mean(axis=1)

    est = mean_at(2.0 * np.pi * np.arange(n) / n)
    for _ in range(max_doublings):
        n *= 2
        new = 0.5 * (est + mean_at(2.0 * np.pi * np.arange(1, n, 2) / n))
        diff = np.abs(new - est)
        prev, est = est, new
        if np.all(diff <= tol * np.maximum(1.0, np.abs(new))):
            return est
    raise QuadratureError("circle quadrature did not converge", estimates=(est, prev))


def integrate_vertical(f: Callable, contour: VerticalLineContour, tol=DEFAULT_TOL,
                       max_doublings=MAX_DOUBLINGS) -> complex:
    """``(1/2 pi i) int f(z) dz`` along a truncated vertical line.

    >>> c = VerticalLineContour.gaussian(1.0)
    >>> round(integrate_vertical(lambda z: np.exp(z * z / 2), c).real, 6)
    0.398942
    """
    out = vertical_trapezoid(f, contour.abscissa, contour.half_extent, tol,
                             contour.node_count, max_doublings)
    return complex(out[0])


def integrate_circle(f: Callable, contour: CircleContour, tol=DEFAULT_TOL,
                     max_doublings=MAX_DOUBLINGS) -> complex:
    """``(1/2 pi i) oint f(w) dw`` over a positively oriented circle."""
    out = circle_trapezoid(f, contour.center, contour.radius, tol,
                           contour.node_count, max_doublings)
    return complex(out[0])


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def integrate_real(f: Callable, a: float, b: float, tol=1e-12, panels=8, order=16,
                   max_doublings=10) -> float:
    """Composite Gauss-Legendre on ``[a, b]`` with panel doubling.

    ``f`` must be vectorised over a 1-D array of abscissae.
    """
    if b <= a:
        return 0.0
    x0, w0 = _gauss_legendre(order)

    def rule(m):
        edges = np.linspace(a, b, m + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
        w = (half[:, None] * w0[None, :]).ravel()
        return float(np.dot(w, f(x)))

    est = rule(panels)
    for _ in range(max_doublings):
        panels *= 2
        new = rule(panels)
        if abs(new - est) <= tol * max(1.0, abs(new)):
            return new
        est = new
    raise QuadratureError("real-line quadrature did not converge", estimates=(new, est))


def elementary_coefficients(points) -> np.ndarray:
    """Coefficients of ``prod_j (w - x_j)`` in ascending powers of ``w``.

    ``points`` has shape ``(..., n)``; the result has shape ``(..., n+1)``.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[-1]
    coef = np.zeros(pts.shape[:-1] + (n + 1,))
    coef[..., 0] = 1.0
    for j in range(n):
        xj = pts[..., j:j + 1]
        shifted = np.zeros_like(coef)
        shifted[..., 1:] = coef[..., :-1]
        coef = shifted - xj * coef
    return coef


def _gaussian_moments(n):
    # E[(iS)^m] for S ~ N(0,1): (-1)^(m/2) (m-1)!! for even m, 0 for odd m
    m = np.zeros(n + 1)
    acc = 1.0
    for k in range(0, n + 1, 2):
        if k > 0:
            acc *= -(k - 1)
        m[k] = acc
    return m


def sym_poly_p(points) -> np.ndarray | float:
    """``p_n(x_1..x_n) = (-1)^n/(i sqrt(2 pi)) int_{iR} e^{w^2/2} prod(w - x_j) dw``.

    Evaluated exactly by contracting the elementary-symmetric expansion of
    the product with the Gaussian moments of ``w = i s``. Vectorised over
    leading axes; the last axis holds the ``n`` variables.
    """
    pts = np.asarray(points, dtype=float)
    _check_finite(pts)
    n = pts.shape[-1]
    if n == 0:
        return np.ones(pts.shape[:-1]) if pts.ndim > 1 else 1.0
    out = (-1.0) ** n * (elementary_coefficients(pts) @ _gaussian_moments(n))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HermitianMatrix:
    """Validated dense Hermitian matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("expected a non-empty square matrix")
        _check_finite(a)
        if not np.allclose(a, a.conj().T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(a).max())):
            raise ValueError("matrix is not Hermitian")
        a = 0.5 * (a + a.conj().T)
        a[np.diag_indices_from(a)] = a.diagonal().real
        object.__setattr__(self, "entries", a)

    @property
    def order(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EighReport:
    sweeps: int
    max_residual: float
    norm: float


@numba.njit(cache=True, nogil=True)
def _jacobi(a, v, want_vectors, rtol, max_sweeps):
    # In place cyclic Jacobi on a complex Hermitian matrix. Returns sweeps used or -1.
    n = a.shape[0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j].real ** 2 + a[i, j].imag ** 2
    fro = math.sqrt(fro)
    if fro == 0.0:
        return 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q].real ** 2 + a[p, q].imag ** 2
        if math.sqrt(2.0 * off) <= rtol * fro:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                e = apq / mag
                ec = e.conjugate()
                # unitary phase on index q makes a[p, q] real and positive
                for i in range(n):
                    a[i, q] = a[i, q] * ec
                for i in range(n):
                    a[q, i] = a[q, i] * e
                if want_vectors:
                    for i in range(n):
                        v[i, q] = v[i, q] * ec
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                for i in range(n):
                    api = a[p, i]
                    aqi = a[q, i]
                    a[p, i] = c * api - s * aqi
                    a[q, i] = s * api + c * aqi
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                if want_vectors:
                    for i in range(n):
                        vip = v[i, p]
                        viq = v[i, q]
                        v[i, p] = c * vip - s * viq
                        v[i, q] = s * vip + c * viq
    return -1


@numba.njit(cache=True, nogil=True)
def eigvalsh_inplace(a, out, rtol=1e-15, max_sweeps=64):
    """Eigenvalues (ascending) of Hermitian ``a`` written to ``out``; ``a`` is destroyed."""
    dummy = np.zeros((1, 1), dtype=np.complex128)
    sweeps = _jacobi(a, dummy, False, rtol, max_sweeps)
    n = a.shape[0]
    for i in range(n):
        out[i] = a[i, i].real
    out.sort()
    return sweeps


@numba.njit(cache=True, nogil=True)
def _eigvalsh_batch(mats, out):
    bad = 0
    for b in range(mats.shape[0]):
        a = mats[b].copy()
        if eigvalsh_inplace(a, out[b]) < 0:
            bad += 1
    return bad


def eigvalsh_batch(mats) -> np.ndarray:
    """Ascending eigenvalues for a stack ``(B, n, n)`` of Hermitian matrices."""
    mats = np.ascontiguousarray(mats, dtype=np.complex128)
    out = np.empty(mats.shape[:2])
    if _eigvalsh_batch(mats, out):
        raise EigenError("Jacobi sweeps did not converge for some matrices")
    return out


def eigh(h, vectors: bool = False, max_sweeps: int = 64):
    """Eigen-decomposition of a small Hermitian matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    h : HermitianMatrix or array_like
        Matrix of order at most 64.
    vectors : bool
        Also return the unitary matrix of eigenvectors (columns).

    Returns
    -------
    eigenvalues : ndarray
        Ascending.
    report : EighReport
        Sweeps used and ``max_k ||H v_k - lambda_k v_k||``.
    vecs : ndarray, only if ``vectors``
    """
    if not isinstance(h, HermitianMatrix):
        h = HermitianMatrix(np.asarray(h))
    if h.order > 64:
        raise ValueError("eigh is meant for orders up to 64")
    a = h.entries.copy()
    v = np.eye(h.order, dtype=complex)
    sweeps = _jacobi(a, v, True, 1e-15, max_sweeps)
    if sweeps < 0:
        raise EigenError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = a.diagonal().real.copy()
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    resid = np.linalg.norm(h.entries @ v - v * w[None, :], axis=0).max()
    report = EighReport(sweeps, float(resid), float(np.linalg.norm(h.entries, 2)))
    if vectors:
        return w, report, v
    return w, report


def det_real(m) -> float:
    """Determinant of a square real matrix (LU with partial pivoting)."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    _check_finite(a)
    if a.shape[0] == 0:
        return 1.0
    return float(np.linalg.det(a))
