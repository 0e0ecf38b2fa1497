import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import band_count_exhaustive, oscillation_count_exhaustive
from pvarlab.core import SamplePath, dyadic_size, r1_cutoff
from pvarlab.pvar import (band_count, dyadic_upper_bound, extrema_reduce, oscillation_count,
                          pvar_bruteforce, pvar_dp_reference, pvar_exact, stopping_times, window_range)
from pvarlab.simulate import MeshSpec, ProcessSpec, simulate_path

P = SamplePath.from_values

short_values = st.lists(st.integers(-4, 4).map(lambda k: k * 0.25), min_size=1, max_size=10)
real_values = st.lists(st.floats(-3, 3, allow_nan=False, allow_subnormal=False), min_size=1, max_size=10)


# --- pvar_exact / pvar_bruteforce -------------------------------------------

@pytest.mark.parametrize("values,p,expected", [
    ([0, 1], 2, 1.0),
    ([0, 1, 0, 1], 2, 3.0),
    ([0, 0.5, 1.2, 2.0], 1, 2.0),
])
def test_pvar_examples(values, p, expected):
    assert pvar_exact(P(values), p) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("values,p,expected", [
    ([0, 1], 3, 1.0),
    ([0, 1, 0, 1], 2, 3.0),
    ([0, 2, 1], 1, 3.0),
])
def test_bruteforce_examples(values, p, expected):
    assert pvar_bruteforce(P(values), p) == expected


def test_pvar_errors():
    with pytest.raises(ValueError):
        pvar_exact(P([0, 1]), 0)
    with pytest.raises(ValueError):
        pvar_bruteforce(P([0, 1]), -1)
    with pytest.raises(ValueError):
        pvar_bruteforce(P(np.zeros(23)), 2)
    assert pvar_exact(P([1.5]), 2) == 0.0


@settings(max_examples=300, deadline=None)
@given(st.one_of(short_values, real_values), st.sampled_from([1.0, 1.3, 2.0, 3.0]))
def test_pvar_matches_bruteforce(values, p):
    x = P(values)
    assert pvar_exact(x, p) == pytest.approx(pvar_bruteforce(x, p), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("alpha", [0.7, 1.2, 2.0])
@pytest.mark.parametrize("p", [1.05, 1.5, 2.0, 3.0, 6.0])
def test_pruned_dp_matches_plain_recurrence(alpha, p):
    for seed in range(3):
        x = simulate_path(ProcessSpec(alpha), MeshSpec(700), seed)
        assert pvar_exact(x, p) == pytest.approx(pvar_dp_reference(x, p), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(real_values, st.sampled_from([0.5, 0.8, 1.0]))
def test_small_p_is_finest_sum(values, p):
    x = np.asarray(values, dtype=float)
    expected = float(np.sum(np.abs(np.diff(x)) ** p)) if x.size > 1 else 0.0
    assert pvar_exact(P(values), p) == expected


@settings(max_examples=150, deadline=None)
@given(real_values, st.floats(0.5, 4), st.floats(0.5, 4))
def test_holder_monotonicity(values, p, q):
    p, q = min(p, q), max(p, q)
    vp = pvar_exact(P(values), p)
    vq = pvar_exact(P(values), q)
    assert vq ** (1 / q) <= vp ** (1 / p) + 1e-12


@settings(max_examples=150, deadline=None)
@given(real_values, st.data(), st.sampled_from([0.7, 1.0, 1.5, 2.0, 3.0]))
def test_subsample_monotonicity(values, data, p):
    n = len(values)
    keep = [0] + [i for i in range(1, n - 1) if data.draw(st.booleans())] + ([n - 1] if n > 1 else [])
    full = pvar_exact(P(values), p)
    sub = pvar_exact(P([values[i] for i in keep]), p)
    assert sub <= full * (1 + 1e-12) + 1e-300


# --- extrema_reduce ----------------------------------------------------------

@pytest.mark.parametrize("values,expected", [
    ([0, 1, 2, 3], [0, 3]),
    ([0, 1, 0, 1], [0, 1, 0, 1]),
    ([0, 0.4, 1, 0.2], [0, 1, 0.2]),
    ([0, 1, 1, 1, 0], [0, 1, 0]),
    ([2, 2, 2], [2, 2]),
])
def test_extrema_reduce_examples(values, expected):
    red = extrema_reduce(P(values))
    assert list(red.values) == expected
    assert red.times[0] == 0.0 and red.times[-1] == 1.0


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_extrema_reduce_example_invariance(p):
    x = P([0, 0.4, 1, 0.2])
    assert pvar_exact(extrema_reduce(x), p) == pytest.approx(pvar_bruteforce(x, p), rel=1e-15)


@settings(max_examples=150, deadline=None)
@given(st.one_of(short_values, real_values), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_extrema_reduce_invariance(values, p):
    x = P(values)
    assert pvar_bruteforce(extrema_reduce(x), p) == pytest.approx(pvar_bruteforce(x, p), rel=1e-12)


# --- window_range / stopping_times --------------------------------------------

def test_window_range():
    assert window_range(P([0, 0.6, 0]), 1, 1) == 0.0
    assert window_range(P([0, 0.6, 0]), 0, 2) == 0.6
    assert window_range(P([-1, 2, 0.5]), 0, 2) == 3.0
    with pytest.raises(IndexError):
        window_range(P([0, 1]), 0, 2)
    with pytest.raises(IndexError):
        window_range(P([0, 1]), 1, 0)


def test_stopping_time_examples():
    rec = stopping_times(SamplePath([0, 0.5, 1], [0, 0.6, 0]), 0)
    assert list(rec.times) == [0, 0.5, 1.0] and rec.terminated
    assert list(rec.durations) == [0.5, 0.5]
    rec = stopping_times(P(np.zeros(7)), 3)
    assert list(rec.times) == [0.0] and rec.terminated and rec.count == 0
    rec = stopping_times(SamplePath([0, 0.5, 1], [0, 0.3, 0.6]), 0)
    assert list(rec.times) == [0, 1.0]


def test_stopping_time_truncation():
    x = P([0, 1, 0, 1, 0, 1])
    rec = stopping_times(x, 0, max_count=2)
    assert rec.count == 2 and not rec.terminated
    assert stopping_times(x, 0).count == 5


def _check_minimality(path, r):
    rec = stopping_times(path, r)
    m = dyadic_size(r)
    idx = list(rec.indices)
    for a, b in zip(idx, idx[1:]):
        assert window_range(path, a, b) > m
        for t in range(a, b):
            assert window_range(path, a, t) <= m
    # nothing after the last one
    assert window_range(path, idx[-1], len(path) - 1) <= m


@pytest.mark.parametrize("alpha", [1.2, 2.0])
def test_stopping_time_minimality(alpha):
    for seed in range(4):
        path = simulate_path(ProcessSpec(alpha), MeshSpec(300), seed)
        for r in range(-2, 5):
            _check_minimality(path, r)


# --- oscillation_count / band_count ------------------------------------------

def test_oscillation_examples():
    assert oscillation_count(P(np.ones(6)), 0.1) == 0
    assert oscillation_count(P([0, 1]), 2) == 0
    assert oscillation_count(P([0, 1, 0, 1]), 0.5) == 3
    assert oscillation_count_exhaustive((0, 1, 0, 1), 0.5) == 3
    with pytest.raises(ValueError):
        oscillation_count(P([0, 1]), 0)


def test_band_examples():
    assert band_count(P(np.ones(6)), 0) == 0
    assert band_count(P([0, 0.6, 0, 0.6]), 0) == 3
    assert band_count_exhaustive((0, 0.6, 0, 0.6), 0.5, 1.0) == 3
    assert band_count(P([0, 2]), 0) == 0


@settings(max_examples=200, deadline=None)
@given(st.one_of(short_values, real_values), st.sampled_from([0.1, 0.25, 0.5, 1.0, 1.7]))
def test_oscillation_count_optimal(values, b):
    assert oscillation_count(P(values), b) == oscillation_count_exhaustive(tuple(values), b)


@settings(max_examples=200, deadline=None)
@given(st.one_of(short_values, real_values), st.integers(-3, 3))
def test_band_count_optimal(values, r):
    lo, hi = dyadic_size(r), dyadic_size(r - 1)
    assert band_count(P(values), r) == band_count_exhaustive(tuple(values), lo, hi)


@pytest.mark.parametrize("alpha", [0.8, 1.2, 2.0])
def test_band_count_bounded_by_finer_stopping_times(alpha):
    for seed in range(5):
        path = simulate_path(ProcessSpec(alpha), MeshSpec(400), seed)
        for r in range(-3, 8):
            assert band_count(path, r) <= stopping_times(path, r + 1).count


@settings(max_examples=100, deadline=None)
@given(short_values, st.integers(-3, 2))
def test_band_count_linkage_small(values, r):
    assert band_count(P(values), r) <= stopping_times(P(values), r + 1).count


# --- dyadic_upper_bound ------------------------------------------------------

def test_dyadic_constant_path():
    prof = dyadic_upper_bound(P(np.full(5, 3.0)), 2.0, 1.0)
    assert prof.dyadic_bound == 0.0 and prof.band_counts == {} and prof.nu0 == 0


def test_dyadic_hand_example():
    prof = dyadic_upper_bound(P([0, 1]), 1.0, 4.0)
    assert prof.r1 == -5 == r1_cutoff(4.0)
    assert prof.band_counts == {-1: 1}
    assert prof.nu0 == 0 and prof.Mhat == 1.0
    assert prof.dyadic_bound == 2.0 >= pvar_exact(P([0, 1]), 1.0)


def test_dyadic_single_point():
    prof = dyadic_upper_bound(P([1.0]), 2.0, 1.0)
    assert prof.dyadic_bound == 0.0


def test_dyadic_profile_fields():
    path = simulate_path(ProcessSpec(1.2), MeshSpec(257), 3)
    prof = dyadic_upper_bound(path, 1.5, 0.5)
    assert prof.Mhat == pytest.approx(np.max(np.abs(path.values)))
    assert prof.nu0 == oscillation_count(path, 0.25)
    for r, y in prof.band_counts.items():
        assert r > prof.r1 and y == band_count(path, r) > 0
    assert prof.dyadic_bound == pytest.approx(prof.small_part + (2 * prof.Mhat) ** 1.5 * prof.nu0)


@settings(max_examples=200, deadline=None)
@given(st.one_of(short_values, real_values), st.sampled_from([0.7, 1.0, 1.5, 2.5]),
       st.sampled_from([0.05, 0.3, 1.0, 4.0]))
def test_dyadic_bound_dominates_small(values, p, a0):
    x = P(values)
    assert pvar_exact(x, p) <= dyadic_upper_bound(x, p, a0).dyadic_bound * (1 + 1e-12)


@pytest.mark.parametrize("alpha", [1.2, 1.8, 2.0])
def test_dyadic_bound_dominates_simulated(alpha):
    for seed in range(10):
        path = simulate_path(ProcessSpec(alpha), MeshSpec(513), seed)
        assert pvar_exact(path, 1.5) <= dyadic_upper_bound(path, 1.5, 1.0).dyadic_bound
