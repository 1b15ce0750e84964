import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from gtdrift.rng import RngStream, replica_states


def test_frozen_stream():
    # xoshiro256** outputs for master seed 42, replica 7
    s = RngStream(42, 7)
    assert [s.u64() for _ in range(3)] == [4340252436910926196, 7895563309794636257, 5570094451456346144]


@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 10 ** 6))
def test_same_key_same_stream(seed, replica):
    a, b = RngStream(seed, replica), RngStream(seed, replica)
    assert [a.u64() for _ in range(4)] == [b.u64() for _ in range(4)]


def test_replicas_differ():
    firsts = {RngStream(1, r).u64() for r in range(1000)}
    assert len(firsts) == 1000


def test_block_states_match_single_streams():
    states = replica_states(9, 100, 5)
    for i in range(5):
        np.testing.assert_array_equal(states[i], RngStream(9, 100 + i).state)


def test_uniform_range_and_law():
    s = RngStream(3)
    u = np.array([s.uniform() for _ in range(20000)])
    assert u.min() >= 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_normal_law():
    z = RngStream(5).normal(40001)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 4 / np.sqrt(z.size)


def test_exponential_law():
    s = RngStream(6)
    e = np.array([s.exponential() for _ in range(20000)])
    assert e.min() > 0
    assert stats.kstest(e, "expon").pvalue > 1e-3


@given(st.integers(1, 50))
def test_below_range(n):
    s = RngStream(n)
    vals = [s.below(n) for _ in range(200)]
    assert min(vals) >= 0 and max(vals) < n


def test_below_uniform():
    s = RngStream(11)
    counts = np.bincount([s.below(6) for _ in range(60000)], minlength=6)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_large_seed_is_reduced_mod_2_64():
    assert RngStream(2 ** 64 + 5).u64() == RngStream(5).u64()


@pytest.mark.parametrize("count", [0, 1, 3])
def test_replica_states_shape(count):
    assert replica_states(1, 0, count).shape == (count, 4)
