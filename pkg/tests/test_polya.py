import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lacunary.errors import DomainError, SearchFailure
from lacunary.meromorphics import MeromorphicSum
from lacunary.polya import GridFunction, PeakInput, divided_interval, lacunary_lower_bound_probe, polya_peaks
from lacunary.spectra import SpectrumSequence


def brute_peaks(p, alpha):
    q = [a * x for a, x in zip(alpha, p)]
    n = len(p)
    return tuple(
        m for m in range(n)
        if all(p[m] >= p[s] for s in range(m + 1)) and all(q[m] >= q[s] for s in range(m, n))
    )


def scan_best(values, width):
    """Exhaustive oracle: best min |f| over grid windows of width+1 nodes."""
    a = np.abs(values)
    return max(a[j: j + width + 1].min() for j in range(len(a) - width))


# peaks


def test_monotone_inputs_all_peaks():
    p = np.arange(1.0, 11.0)
    alpha = 1.0 / np.arange(1.0, 11.0) ** 2
    assert polya_peaks(PeakInput(p, alpha)).peak_indices == tuple(range(10))


def test_small_example():
    p = [1.0, 3.0, 2.0, 5.0]
    alpha = [1.0, 0.5, 0.25, 0.125]
    rep = polya_peaks(PeakInput(p, alpha))
    assert rep.peak_indices == brute_peaks(p, alpha) == (1, 3)
    assert rep.q_at_peaks == (1.5, 0.625)


def test_dominant_head():
    alpha = [1.0, 0.9, 0.8, 0.1]
    rep = polya_peaks(PeakInput([5.0, 1.0, 1.0, 1.0], alpha))
    assert 1 not in rep.peak_indices
    assert rep.peak_indices == brute_peaks([5.0, 1.0, 1.0, 1.0], alpha)


def test_peak_input_validation():
    with pytest.raises(DomainError):
        PeakInput([1.0, 2.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        PeakInput([1.0, -2.0], [1.0, 0.5])
    with pytest.raises(DomainError):
        PeakInput([], [])


def test_health_flags():
    n = np.arange(1.0, 41.0)
    rep = polya_peaks(PeakInput(n, 1.0 / n ** 2))
    assert rep.p_max_growing and rep.q_tail_shrinking
    flat = polya_peaks(PeakInput(np.ones(10), 1.0 / np.arange(1.0, 11.0)))
    assert not flat.p_max_growing


peak_inputs = st.integers(1, 40).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 20), min_size=n, max_size=n),
        st.lists(st.integers(1, 10 ** 6), min_size=n, max_size=n, unique=True),
    )
)


@settings(max_examples=200)
@given(peak_inputs)
def test_peaks_match_brute_force(data):
    # small integer p and exactly representable alpha keep q ties exact
    p, raw = data
    alpha = [x / 2.0 ** 10 for x in sorted(raw, reverse=True)]
    p = [float(x) for x in p]
    assert polya_peaks(PeakInput(p, alpha)).peak_indices == brute_peaks(p, alpha)


@settings(max_examples=100)
@given(peak_inputs, st.integers(-8, 8))
def test_peaks_rescaling_invariant(data, e):
    p, raw = data
    alpha = [x / 2.0 ** 10 for x in sorted(raw, reverse=True)]
    p = np.array(p, dtype=float)
    lam = 2.0 ** e
    assert polya_peaks(PeakInput(lam * p, alpha)).peak_indices == polya_peaks(PeakInput(p, alpha)).peak_indices


# divided-difference interval


def test_quadratic_example_exact():
    a, b = Fraction(0), Fraction(3)
    g = GridFunction.sample(lambda x: x ** 2 - 1, a, b, 9 * 40 + 1)
    g = GridFunction(a, b, g.values)
    res = divided_interval(g, 2, Fraction(1))
    c, d = res.subinterval
    assert d - c == Fraction(1, 3)
    assert res.bound == Fraction(1, 4)
    assert res.min_abs_value >= 0.25
    assert res.min_abs_value <= scan_best(g.values, 40)


def test_linear_example():
    a, b = Fraction(0), Fraction(1)
    g = GridFunction(a, b, 2 * np.linspace(0, 1, 3 * 30 + 1))
    res = divided_interval(g, 1, 1)
    c, d = res.subinterval
    assert d - c == Fraction(1, 3)
    assert res.bound == Fraction(1, 6)
    assert res.min_abs_value >= 1 / 6


@pytest.mark.parametrize("r", [1, 2, 3, 4])
def test_bound_and_length_symbolic(r):
    a, b = Fraction(1, 7), Fraction(22, 7)
    eps = Fraction(1, 2)
    n = 3 ** r * 12 + 1
    x = np.linspace(float(a), float(b), n)
    g = GridFunction(a, b, x ** r)  # r-th derivative r! > eps
    res = divided_interval(g, r, eps)
    c, d = res.subinterval
    assert isinstance(c, Fraction) and d - c == (b - a) / 3 ** r
    assert res.bound == ((b - a) / 6) ** r * eps
    lo, hi = res.index_range
    assert np.abs(g.values[lo: hi + 1]).min() >= float(res.bound)


def test_constant_fails_precondition():
    g = GridFunction(0.0, 1.0, np.full(31, 100.0))
    with pytest.raises(SearchFailure):
        divided_interval(g, 1, 1.0)


def test_divided_interval_errors():
    with pytest.raises(DomainError):
        divided_interval(GridFunction(0.0, 1.0, np.linspace(0, 1, 11)), 1, 0.1)
    with pytest.raises(DomainError):
        divided_interval(GridFunction(0.0, 1.0, np.linspace(0, 1, 31)), 5, 0.1)
    with pytest.raises(DomainError):
        divided_interval(GridFunction(0.0, 1.0, np.linspace(0, 1, 11)), 2, 0.1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 3))
def test_divided_interval_random_polynomials(r, c1, c0, lead):
    n = 3 ** r * 8 + 1
    x = np.linspace(0.0, 2.0, n)
    vals = lead * x ** r + c1 * x + c0 if r > 1 else lead * x + c0
    eps = 0.99 * lead * math.factorial(r)
    res = divided_interval(GridFunction(0.0, 2.0, vals), r, eps)
    lo, hi = res.index_range
    assert hi - lo == (n - 1) // 3 ** r
    assert res.min_abs_value >= float(res.bound)


# lower-bound probe


def dyadic_sum(c):
    t = 2.0 ** np.arange(1, len(c) + 1)
    return MeromorphicSum(SpectrumSequence.from_values(t), np.asarray(c, dtype=complex), 1.0)


def test_probe_divergent_example():
    n = np.arange(1, 31)
    pr = lacunary_lower_bound_probe(dyadic_sum(2.0 ** n / n))
    assert not pr.inconclusive
    assert pr.holds
    assert len(pr.rows) >= 8
    assert min(row.observed_min for row in pr.rows) >= pr.floor > 0
    assert 1 < pr.u < pr.g


def test_probe_convergent_is_inconclusive():
    n = np.arange(1, 31)
    pr = lacunary_lower_bound_probe(dyadic_sum(4.0 ** -n))
    assert pr.inconclusive and pr.floor is None


def test_probe_single_pole_closed_form():
    c = np.zeros(10)
    c[3] = 5.0
    f = dyadic_sum(c)
    pr = lacunary_lower_bound_probe(f, require_divergence=False, min_peaks=1)
    assert [row.index for row in pr.rows] == [3]
    row = pr.rows[0]
    x = np.linspace(*row.ring, 2001)
    t = 16.0
    closed = np.abs(x * (1 + 5 * x / (t * (t - x))))
    assert closed.min() <= row.observed_min + 1e-9
    assert row.observed_min <= closed.max()


def test_probe_short_window():
    assert lacunary_lower_bound_probe(dyadic_sum([1.0])).inconclusive


def test_probe_rejects_bad_u():
    n = np.arange(1, 21)
    with pytest.raises(DomainError):
        lacunary_lower_bound_probe(dyadic_sum(2.0 ** n / n), u=1.0)
