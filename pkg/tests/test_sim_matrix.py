import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gtdrift.kernel_ct import DriftSpec, GTPattern, density_top_level
from gtdrift.numerics import HermitianMatrix
from gtdrift.rng import RngStream
from gtdrift.sim_matrix import (
    InterlacingViolation,
    minor_eigenvalues,
    sample_matrices,
    sample_matrix,
    simulate,
)
from gtdrift.verify.studies import one_point_reports


def test_small_time_concentrates_on_drifts():
    d = DriftSpec((-1.0, 0.5, 2.0))
    flat = simulate(3, 1e-8, d, 3, 0, 10)
    # the top level sits near t*mu, all within a few sqrt(t)
    assert np.max(np.abs(flat)) < 1e-3


def test_entry_moments():
    d = DriftSpec((-0.5, 1.5))
    t, n = 2.0, 100_000
    h = sample_matrices(2, t, d, 17, 0, n)
    band = lambda var: 4.0 * np.sqrt(var / n)  # noqa: E731
    assert abs(h[:, 0, 0].real.mean() - t * -0.5) < band(t)
    assert abs(h[:, 1, 1].real.mean() - t * 1.5) < band(t)
    assert abs(h[:, 0, 0].real.var() - t) < 4.0 * t * np.sqrt(2.0 / n)
    assert abs(h[:, 0, 1].real.var() - t / 2) < 4.0 * (t / 2) * np.sqrt(2.0 / n)
    assert abs(h[:, 0, 1].imag.var() - t / 2) < 4.0 * (t / 2) * np.sqrt(2.0 / n)
    np.testing.assert_allclose(h[:, 1, 0], np.conj(h[:, 0, 1]))
    assert np.all(h[:, 0, 0].imag == 0)


def test_minor_eigenvalue_examples():
    p = minor_eigenvalues(HermitianMatrix(np.diag([3.0, 1.0])))
    np.testing.assert_allclose(p.levels[0], [3.0])
    np.testing.assert_allclose(p.levels[1], [1.0, 3.0])
    p = minor_eigenvalues(HermitianMatrix(np.array([[0, 1], [1, 0]], dtype=complex)))
    np.testing.assert_allclose(p.levels[0], [0.0])
    np.testing.assert_allclose(p.levels[1], [-1.0, 1.0], atol=1e-14)


@given(st.integers(0, 10 ** 9))
def test_random_five_by_five_interlaces(seed):
    d = DriftSpec((-2.0, -1.0, 0.0, 1.0, 2.0))
    p = minor_eigenvalues(sample_matrix(5, 1.0, d, RngStream(seed)))
    assert p.interlacing_violation() <= 1e-10


def test_interlacing_violation_is_raised(monkeypatch):
    import gtdrift.sim_matrix as sm

    def bad_eigh(a):
        return (np.full(a.shape[0], 0.0) if a.shape[0] == 1 else np.array([1.0, 2.0]), None)

    monkeypatch.setattr(sm, "eigh", bad_eigh)
    with pytest.raises(InterlacingViolation):
        minor_eigenvalues(HermitianMatrix(np.eye(2)))


def test_python_path_matches_bulk():
    d = DriftSpec((-1.0, 0.0, 1.0))
    bulk = simulate(3, 1.3, d, 8, 20, 4)
    for i in range(4):
        p = minor_eigenvalues(sample_matrix(3, 1.3, d, RngStream(8, 20 + i)))
        np.testing.assert_allclose(bulk[i], p.flat(), atol=1e-10)


def test_bulk_patterns_interlace():
    d = DriftSpec((-1.0, 0.0, 1.0, 2.0))
    flat = simulate(4, 1.0, d, 1, 0, 2000)
    for row in flat[:200]:
        assert GTPattern.from_flat(row, 4).interlacing_violation() <= 1e-10


def test_drift_length_checked():
    with pytest.raises(ValueError):
        simulate(3, 1.0, DriftSpec((0.0, 1.0)), 0, 0, 1)


def test_top_level_joint_law():
    d = DriftSpec((-1.0, 1.0))
    flat = simulate(2, 1.0, d, 5, 0, 200_000)
    top = flat[:, 1:]
    edges = np.arange(-5.5, 5.5 + 1e-9, 0.5)
    hist, _, _ = np.histogram2d(top[:, 0], top[:, 1], bins=[edges, edges])
    hist /= top.shape[0]
    g, w = np.polynomial.legendre.leggauss(4)
    expected = np.zeros_like(hist)
    for i in range(len(edges) - 1):
        for j in range(i, len(edges) - 1):
            xa = edges[i] + 0.25 * (g + 1)
            ya = edges[j] + 0.25 * (g + 1)
            X, Y = np.meshgrid(xa, ya, indexing="ij")
            W = np.outer(w, w) * 0.0625
            mask = X < Y
            pts = np.stack([X[mask], Y[mask]], axis=1)
            if pts.size:
                expected[i, j] = np.sum(W[mask] * density_top_level(1.0, pts, d))
    assert np.abs(hist - expected).sum() < 0.05


def test_one_point_functions_match_kernel():
    d = DriftSpec((-1.0, 1.0))
    flat = simulate(2, 1.0, d, 6, 0, 100_000)
    for rep in one_point_reports(flat, 1.0, d, threshold=0.03):
        assert rep.passed, rep.to_dict()


def test_top_level_one_point_oracle():
    # frozen quadrature of the 2x2 eigenvalue density, mu = (-1, 1), t = 1
    from gtdrift.kernel_ct import one_point

    d = DriftSpec((-1.0, 1.0))
    xs = np.array([-1.5, 0.0, 0.7, 2.0])
    ref = [0.4356995833319821, 0.24197072451914342, 0.33828700474797846, 0.36074016257274605]
    flat = simulate(2, 1.0, d, 77, 0, 200_000)
    top = flat[:, 1:].ravel()
    h = 0.1
    counts = np.array([np.sum(np.abs(top - x) < h / 2) for x in xs])
    est = counts / (flat.shape[0] * h)
    np.testing.assert_allclose(one_point(1.0, xs, 2, d), ref, rtol=1e-8)
    assert np.all(np.abs(est - ref) < 5 * np.sqrt(np.array(ref) / (flat.shape[0] * h)) + 2e-3)
