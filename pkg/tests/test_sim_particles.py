import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from gtdrift.kernel_dt import DiscretePoint, RateSpec, kernel_d
from gtdrift.rng import RngStream
from gtdrift.sim_particles import (
    DiscreteGTPattern,
    InterlacingError,
    apply_jump,
    flat_index,
    init_packed,
    rescale,
    run_events,
    run_to,
    simulate,
    step,
)
from gtdrift.verify.statistics import binomial_threshold, compare_to_kernel, estimate_one_point
from gtdrift.verify.studies import restriction_pvalues


class TestInit:
    def test_examples(self):
        assert init_packed(1).levels[0].tolist() == [-1]
        p = init_packed(2)
        assert [l.tolist() for l in p.levels] == [[-1], [-2, -1]]
        assert p.time == 0.0

    @pytest.mark.parametrize("N", [1, 2, 5, 9])
    def test_interlaced(self, N):
        assert init_packed(N).is_interlaced()

    def test_invalid(self):
        with pytest.raises(ValueError):
            init_packed(0)
        with pytest.raises(ValueError):
            DiscreteGTPattern(2, [0, 1])

    def test_flat_index(self):
        assert [flat_index(n, k) for n in (1, 2, 3) for k in range(1, n + 1)] == list(range(6))


class TestDynamics:
    def figure_state(self):
        return DiscreteGTPattern.from_levels([[5], [2, 6], [1, 4, 6], [0, 2, 5, 6]])

    def test_push_along_diagonal(self):
        s = self.figure_state()
        assert s.is_interlaced()
        assert apply_jump(s, 2, 2) == 3
        assert [l.tolist() for l in s.levels] == [[5], [2, 7], [1, 4, 7], [0, 2, 5, 7]]
        assert s.is_interlaced()

    def test_blocked_by_lower_level(self):
        s = self.figure_state()
        before = s.positions.copy()
        assert apply_jump(s, 3, 1) == 0
        np.testing.assert_array_equal(s.positions, before)

    def test_block_case(self):
        s = DiscreteGTPattern.from_levels([[0], [-1, 1]])
        assert apply_jump(s, 2, 1) == 0
        assert s.positions.tolist() == [0, -1, 1]

    def test_free_jump_without_push(self):
        s = DiscreteGTPattern.from_levels([[0], [-1, 1]])
        assert apply_jump(s, 1, 1) == 1
        assert s.positions.tolist() == [1, -1, 1]

    def test_step_reports_event(self):
        s = init_packed(3)
        s, ev = step(s, RateSpec((1.0, 1.0, 1.0)), RngStream(1), check=True)
        assert ev.time == s.time > 0
        assert 1 <= ev.k <= ev.n <= 3
        assert ev.moved >= 0

    def test_interlacing_over_a_million_events(self):
        s = init_packed(5)
        moves = run_events(s, 1_000_000, RateSpec((1.0, 0.7, 1.3, 0.9, 1.1)), RngStream(2), check=True)
        assert s.is_interlaced() and moves > 0

    def test_broken_state_is_detected(self):
        s = DiscreteGTPattern.from_levels([[5], [-1, 0]])
        with pytest.raises(InterlacingError):
            run_events(s, 1, RateSpec((1.0, 1.0)), RngStream(0))

    @given(st.integers(0, 10 ** 9), st.integers(1, 5))
    def test_coordinates_never_decrease(self, seed, N):
        s = init_packed(N)
        rng = RngStream(seed)
        r = RateSpec(tuple(1.0 + 0.1 * j for j in range(N)))
        prev = s.positions.copy()
        for _ in range(200):
            s, _ = step(s, r, rng, check=True)
            assert np.all(s.positions >= prev)
            prev = s.positions.copy()

    def test_run_to_zero_time(self):
        s = init_packed(3)
        run_to(s, 0.0, RateSpec((1.0, 1.0, 1.0)), RngStream(4))
        assert s.positions.tolist() == init_packed(3).positions.tolist()

    def test_run_to_rejects_past(self):
        s = init_packed(1)
        s.time = 2.0
        with pytest.raises(ValueError):
            run_to(s, 1.0, RateSpec((1.0,)), RngStream(0))

    def test_python_path_matches_bulk(self):
        r = RateSpec((1.0, 0.8, 1.2))
        bulk = simulate(3, 7.5, r, 13, first=40, count=5)
        for i in range(5):
            s = run_to(init_packed(3), 7.5, r, RngStream(13, 40 + i))
            np.testing.assert_array_equal(s.positions, bulk[i])
            assert s.time == 7.5


class TestLaws:
    def test_single_walker_is_poisson(self):
        v, t = 1.3, 4.0
        x = simulate(1, t, RateSpec((v,)), 99, 0, 100_000)[:, 0]
        counts = np.bincount(x + 1)
        expected = stats.poisson.pmf(np.arange(counts.size), v * t) * x.size
        keep = expected > 5
        obs, exp = counts[keep], expected[keep]
        exp = exp * obs.sum() / exp.sum()
        assert stats.chisquare(obs, exp).pvalue > 1e-3
        assert abs(x.mean() - (-1 + v * t)) < 4 * np.sqrt(v * t / x.size)

    def test_one_point_matches_discrete_kernel(self):
        r = RateSpec((1.2, 0.8, 1.0))
        t = 5.0
        samples = simulate(3, t, r, 7, 0, 50_000)
        edges = np.arange(-4, 30) - 0.5
        for n in (1, 2, 3):
            est = estimate_one_point(samples.astype(float), n, edges, 3)
            xs = np.arange(-4, 29)
            exp = kernel_d(t, DiscretePoint(xs, n), DiscretePoint(xs, n), r)
            rep = compare_to_kernel(est, t, None, threshold=binomial_threshold(est, exp), expected=exp)
            assert rep.passed, rep.to_dict()

    def test_lower_levels_ignore_upper_rates(self):
        a = simulate(3, 6.0, RateSpec((1.0, 0.8, 0.5)), 21, 0, 100_000)
        b = simulate(3, 6.0, RateSpec((1.0, 0.8, 1.7)), 22, 0, 100_000)
        assert min(restriction_pvalues(a, b, 2)) > 1e-3

    def test_upper_rates_change_the_top_level(self):
        # power check for the restriction test
        a = simulate(3, 6.0, RateSpec((1.0, 0.8, 0.5)), 21, 0, 20_000)
        b = simulate(3, 6.0, RateSpec((1.0, 0.8, 1.7)), 22, 0, 20_000)
        assert min(restriction_pvalues(a, b, 3)) < 1e-6


def test_rescale():
    np.testing.assert_allclose(rescale(np.array([[100, 90]]), 1.0, 100.0), [[0.0, 1.0]])
