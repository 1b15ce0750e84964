import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gtdrift.kernel_ct import (
    ConfluenceError,
    DriftSpec,
    GTPattern,
    KernelPoint,
    correlation,
    density_full_pattern,
    density_full_pattern_batch,
    density_top_level,
    interlacing_violation,
    kernel,
    kernel_matrix,
    one_point,
    phi_cap,
    phi_cap_coefficients,
    phi_cap_contour,
    phi_step,
    phi_transition,
    phi_transition_contour,
    psi,
    psi_hermite,
    top_level_constant_closed,
)
from gtdrift.numerics import integrate_real

SQ2PI = math.sqrt(2 * math.pi)


def normal_pdf(x, m, v):
    return np.exp(-(np.asarray(x) - m) ** 2 / (2 * v)) / math.sqrt(2 * math.pi * v)


def distinct_drifts(N, lo=-2.0, hi=2.0, gap=0.1):
    return st.lists(st.floats(lo, hi), min_size=N, max_size=N).filter(
        lambda m: N == 1 or np.diff(np.sort(m)).min() >= gap).map(lambda m: DriftSpec(tuple(m)))


class TestDriftSpec:
    def test_defaults(self):
        d = DriftSpec((0.5, -1.0))
        assert d.N == 2 and d.contour_abscissa == -2.0
        assert d.separation == pytest.approx(1.5)
        assert not d.confluent

    def test_invalid(self):
        with pytest.raises(ValueError):
            DriftSpec(())
        with pytest.raises(ValueError):
            DriftSpec((0.0,), contour_abscissa=0.5)
        with pytest.raises(ValueError):
            DriftSpec((float("inf"),))

    def test_confluent_flag(self):
        assert DriftSpec((0.0, 0.0)).confluent
        assert DriftSpec((0.0, 1e-7)).confluent


class TestGTPattern:
    def test_roundtrip_and_points(self):
        p = GTPattern.from_flat([0.0, -1.0, 1.0])
        assert p.N == 2
        np.testing.assert_array_equal(p.flat(), [0.0, -1.0, 1.0])
        assert p.points() == [KernelPoint(0.0, 1), KernelPoint(-1.0, 2), KernelPoint(1.0, 2)]
        assert p.is_interlaced()

    def test_violation(self):
        p = GTPattern.from_flat([2.0, -1.0, 1.0])
        assert p.interlacing_violation() == pytest.approx(1.0)
        assert not p.is_interlaced()

    def test_shape_check(self):
        with pytest.raises(ValueError):
            GTPattern((np.array([0.0, 1.0]),))

    def test_batched_violation(self):
        flat = np.array([[0.0, -1.0, 1.0], [2.0, -1.0, 1.0]])
        np.testing.assert_allclose(interlacing_violation(flat, 2), [-1.0, 1.0])


class TestPsi:
    def test_single_level_values(self):
        d = DriftSpec((0.7,))
        assert psi(1, 1, 1.0, 0.0, d) == pytest.approx(1 / SQ2PI, abs=1e-12)
        assert psi(1, 1, 1.0, 1.0, d) == pytest.approx(math.exp(-0.5) / SQ2PI, abs=1e-12)

    def test_quadrature_matches_hermite_at_confluent_zero(self):
        d = DriftSpec((0.0, 0.0))
        assert psi(2, 1, 1.0, 0.0, d) == pytest.approx(float(psi_hermite(2, 1, 1.0, 0.0, d)), abs=1e-10)
        # (-1) * (1/2pi) int e^{-s^2/2} (is) ds has zero real part
        assert abs(psi(2, 1, 1.0, 0.0, d)) < 1e-12

    @given(distinct_drifts(4), st.floats(0.3, 3.0), st.floats(-6, 6))
    def test_quadrature_matches_hermite(self, d, t, x):
        for k in range(1, 5):
            a = float(psi(4, k, t, x, d))
            b = float(psi_hermite(4, k, t, x, d))
            assert a == pytest.approx(b, abs=1e-10 * max(1.0, abs(b)))

    def test_pole_branch_against_erfc(self):
        # k = n + 1: -(1/2 pi i) int e^{t z^2/2 - x z}/(z - m) dz on Re z < m
        d = DriftSpec((0.3, -0.4))
        t, m = 1.5, -0.4
        for x in (-3.0, 0.0, 2.0, 5.0):
            oracle = 0.5 * math.exp(t * m * m / 2 - x * m) * math.erfc((t * m - x) / math.sqrt(2 * t))
            assert float(psi(1, 2, t, x, d)) == pytest.approx(oracle, rel=1e-10, abs=1e-14)

    def test_rejects_bad_args(self):
        d = DriftSpec((0.0,))
        with pytest.raises(ValueError):
            psi(1, 1, 0.0, 0.0, d)
        with pytest.raises(ValueError):
            psi(1, 2, 1.0, 0.0, d)

    def test_confluent_poles_raise(self):
        with pytest.raises(ConfluenceError):
            psi(1, 3, 1.0, 0.0, DriftSpec((0.0, 1.0, 1.0)))


class TestPhiCap:
    def test_single_residue(self):
        d = DriftSpec((0.8,))
        x = np.linspace(-2, 2, 5)
        np.testing.assert_allclose(phi_cap(1, 1, 1.3, x, d), np.exp(-1.3 * 0.32 + 0.8 * x))
        assert phi_cap(1, 1, 2.0, 1.5, DriftSpec((0.0,))) == pytest.approx(1.0)

    def test_two_residues_at_time_zero_cancel(self):
        assert float(phi_cap(2, 1, 0.0, 0.0, DriftSpec((0.0, 1.0)))) == pytest.approx(0.0, abs=1e-15)

    def test_against_contour_oracle(self):
        d = DriftSpec((-1.0, 0.0, 1.0))
        assert float(phi_cap(3, 2, 1.0, 0.5, d)) == pytest.approx(float(phi_cap_contour(3, 2, 1.0, 0.5, d)), abs=1e-9)

    @given(distinct_drifts(4), st.floats(0.2, 2.0), st.floats(-3, 3), st.integers(1, 4))
    def test_property_contour_oracle(self, d, t, x, l):
        a = float(phi_cap(4, l, t, x, d))
        b = float(phi_cap_contour(4, l, t, x, d))
        assert a == pytest.approx(b, abs=1e-9 * max(1.0, abs(b)))

    def test_confluence_error(self):
        with pytest.raises(ConfluenceError):
            phi_cap_coefficients(2, 1, 1.0, DriftSpec((0.5, 0.5)))


class TestTransitions:
    def test_step_examples(self):
        assert float(phi_step(1, 1.0, 0.0, DriftSpec((0.0,)))) == 1.0
        assert float(phi_step(1, 0.0, 1.0, DriftSpec((0.0,)))) == 0.0
        assert float(phi_step(1, 1.0, 0.0, DriftSpec((2.0,)))) == pytest.approx(math.exp(-2))

    def test_zero_when_not_increasing(self):
        d = DriftSpec((0.1, 0.5, 0.9))
        assert float(phi_transition(2, 2, 1.0, 0.0, d)) == 0.0
        assert float(phi_transition(3, 1, 1.0, 0.0, d)) == 0.0

    def test_two_pole_example(self):
        # residue sum e^{-1}/(2-1) + e^{-2}/(1-2); equals the convolution of two positive steps
        d = DriftSpec((1.0, 2.0))
        val = float(phi_transition(0, 2, 1.0, 0.0, d))
        assert val == pytest.approx(math.exp(-1) - math.exp(-2), abs=1e-15)
        conv = integrate_real(lambda z: np.exp(1.0 * (z - 1.0)) * np.exp(2.0 * (0.0 - z)), 0.0, 1.0)
        assert val == pytest.approx(conv, abs=1e-13)

    def test_no_transition_below_target(self):
        assert float(phi_transition(1, 3, 0.0, 1.0, DriftSpec((0.0, 1.0, 2.0)))) == 0.0

    def test_single_step_delegates(self):
        d = DriftSpec((0.3, -0.6))
        assert float(phi_transition(1, 2, 2.0, 0.5, d)) == float(phi_step(2, 2.0, 0.5, d))

    @given(distinct_drifts(5), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 3), st.integers(2, 4))
    def test_residue_form_matches_contour(self, d, x, y, n, gap):
        n2 = min(5, n + gap)
        if n2 - n < 2:
            return
        a = float(phi_transition(n, n2, x, y, d))
        b = float(phi_transition_contour(n, n2, x, y, d))
        assert a == pytest.approx(b, abs=1e-9 * max(1.0, abs(b)))


class TestKernel:
    def test_single_level_is_gaussian(self):
        d = DriftSpec((0.4,))
        x = np.linspace(-4, 4, 161)
        np.testing.assert_allclose(one_point(1.5, x, 1, d), normal_pdf(x, 0.6, 1.5), atol=1e-13)
        assert float(one_point(1.0, 0.0, 1, DriftSpec((0.0,)))) == pytest.approx(0.398942, abs=1e-6)

    def test_level_one_is_gaussian_for_any_depth(self):
        d = DriftSpec((-0.5, 1.0, 0.2))
        x = np.linspace(-4, 3, 30)
        np.testing.assert_allclose(one_point(2.0, x, 1, d), normal_pdf(x, -1.0, 2.0), atol=1e-12)

    def test_top_level_against_quadrature_oracle(self):
        # one-point function of the 2x2 top level, obtained by integrating the eigenvalue density
        d = DriftSpec((-1.0, 1.0))
        expected = {-1.5: 0.4356995833319821, 0.0: 0.24197072451914342,
                    0.7: 0.33828700474797846, 2.0: 0.36074016257274605}
        for x, v in expected.items():
            assert float(one_point(1.0, x, 2, d)) == pytest.approx(v, abs=1e-10)

    def test_confluent_zero_drift_closed_form(self):
        # driftless 2x2 top level: e^{-x^2/2t}(x^2 + t)/(t sqrt(2 pi t))
        t = 0.8
        x = np.linspace(-3, 3, 13)
        exact = np.exp(-x ** 2 / (2 * t)) * (x ** 2 + t) / (t * math.sqrt(2 * math.pi * t))
        np.testing.assert_allclose(one_point(t, x, 2, DriftSpec((0.0, 0.0))), exact, atol=1e-7)

    def test_confluence_stability(self):
        pts = (KernelPoint(0.3, 2), KernelPoint(-0.4, 3))
        vals = [float(kernel(1.0, *pts, DriftSpec((0.0, e, 2 * e)))) for e in (1e-2, 1e-3, 1e-4)]
        steps = np.abs(np.diff(vals))
        assert steps[1] < steps[0]

    def test_downward_pair_has_no_transition(self):
        d = DriftSpec((-0.5, 0.5))
        x, y = 0.3, -0.2
        pure = sum(float(psi(2, k, 1.0, x, d)) * float(phi_cap(1, k, 1.0, y, d)) for k in (1,))
        assert float(kernel(1.0, KernelPoint(x, 2), KernelPoint(y, 1), d)) == pytest.approx(pure, abs=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_level_mass(self, n):
        d = DriftSpec((-1.0, 0.0, 1.0))
        mass = integrate_real(lambda x: one_point(1.0, x, n, d), -15, 15, tol=1e-10)
        assert mass == pytest.approx(n, abs=1e-6)

    @given(distinct_drifts(3, gap=0.2), st.floats(-3, 3))
    def test_restriction_to_lower_levels(self, d, x):
        # levels <= 2 do not see the third drift
        d2 = DriftSpec(d.drifts[:2])
        assert float(one_point(1.0, x, 2, d)) == pytest.approx(float(one_point(1.0, x, 2, d2)), abs=1e-10)

    def test_level_out_of_range(self):
        with pytest.raises(ValueError):
            kernel(1.0, KernelPoint(0.0, 3), KernelPoint(0.0, 1), DriftSpec((0.0, 1.0)))


class TestCorrelation:
    def test_single_point(self):
        d = DriftSpec((0.0,))
        assert correlation(1.0, [KernelPoint(0.0, 1)], d) == pytest.approx(1 / SQ2PI, abs=1e-12)

    def test_repeated_point_vanishes(self):
        d = DriftSpec((-1.0, 1.0))
        p = KernelPoint(0.4, 2)
        assert abs(correlation(1.0, [p, p], d)) < 1e-14

    def test_two_point_top_level_is_eigenvalue_density(self):
        d = DriftSpec((-1.0, 1.0))
        a, b = -0.3, 1.2
        top = density_top_level(1.0, np.array([a, b]), d)
        assert correlation(1.0, [KernelPoint(a, 2), KernelPoint(b, 2)], d) == pytest.approx(top, rel=1e-8)

    def test_matrix_entries_match_kernel(self):
        d = DriftSpec((-1.0, 0.5, 1.0))
        pts = [KernelPoint(0.1, 1), KernelPoint(-0.5, 2), KernelPoint(0.9, 3)]
        K = kernel_matrix(1.0, pts, d)
        for i, a in enumerate(pts):
            for j, b in enumerate(pts):
                assert K[i, j] == pytest.approx(float(kernel(1.0, a, b, d)), abs=1e-13)


class TestDensities:
    def test_single_gaussian(self):
        d = DriftSpec((0.5,))
        lam = GTPattern((np.array([0.2]),))
        assert density_full_pattern(2.0, lam, d) == pytest.approx(float(normal_pdf(0.2, 1.0, 2.0)), rel=1e-12)
        assert density_top_level(2.0, np.array([0.2]), d) == pytest.approx(float(normal_pdf(0.2, 1.0, 2.0)), rel=1e-6)

    def test_non_interlacing_is_zero(self):
        d = DriftSpec((-1.0, 1.0))
        assert density_full_pattern(1.0, GTPattern.from_flat([2.0, -1.0, 1.0]), d) == 0.0

    @staticmethod
    def _simplex_points(a, s, u):
        # (x^1_1, x^2_1, x^2_2) = (a + s u, a, a + s) covers the N=2 cone with Jacobian s
        return np.stack([a + s * u, a, a + s], axis=1)

    def test_normalisation_by_monte_carlo(self, rng):
        d = DriftSpec((-1.0, 1.0))
        m = 1_000_000
        a, s, u = rng.uniform(-10, 10, m), rng.uniform(0, 16, m), rng.uniform(0, 1, m)
        vals = density_full_pattern_batch(1.0, self._simplex_points(a, s, u), d) * s * 20 * 16
        err = vals.std() / math.sqrt(m)
        assert vals.mean() == pytest.approx(1.0, abs=max(1e-3, 4 * err))

    def test_normalisation_by_quadrature(self):
        d = DriftSpec((-1.0, 1.0))
        g, w = np.polynomial.legendre.leggauss(60)

        def nodes(lo, hi, panels):
            e = np.linspace(lo, hi, panels + 1)
            mid, half = (e[1:] + e[:-1]) / 2, np.diff(e) / 2
            return (mid[:, None] + half[:, None] * g).ravel(), (half[:, None] * w).ravel()

        (A, wa), (S, ws), (U, wu) = nodes(-10, 10, 4), nodes(0, 16, 4), nodes(0, 1, 1)
        a, s, u = (v.ravel() for v in np.meshgrid(A, S, U, indexing="ij"))
        wt = (wa[:, None, None] * ws[None, :, None] * wu[None, None, :]).ravel() * s
        total = np.sum(density_full_pattern_batch(1.0, self._simplex_points(a, s, u), d) * wt)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_top_level_vanishes_on_diagonal(self):
        d = DriftSpec((-1.0, 1.0))
        assert abs(density_top_level(1.0, np.array([0.3, 0.3]), d)) < 1e-15

    def test_top_level_constant_matches_closed_form(self):
        for N, drifts in ((2, (-1.0, 1.0)), (3, (-1.0, 0.0, 1.0))):
            d = DriftSpec(drifts)
            lam = np.array([-1.2, 0.1, 1.4][:N])
            ours = density_top_level(1.3, lam, d)
            from gtdrift.kernel_ct import _top_unnormalised
            closed = float(_top_unnormalised(1.3, lam, d.mu)[0]) * top_level_constant_closed(N, 1.3)
            assert ours == pytest.approx(closed, rel=1e-6)
