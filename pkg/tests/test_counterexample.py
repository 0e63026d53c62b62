import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lacunary.counterexample import (
    CanonicalProduct,
    block_product,
    build_counterexample,
    cauchy_kernel_columns,
    defect_rank,
    greedy_block,
    interpolation_residual,
    minimality_margins,
    removal_log_sums,
    sandwich_log_products,
    verify_sums,
)
from lacunary.errors import AnchorUnsuitable, DomainError, InsufficientSparseness
from lacunary.meromorphics import MeromorphicSum, beta_zeros
from lacunary.perturbation import build_truncated_matrix, kernel_chain_dims, singular_to_bounded
from lacunary.spectra import SpectrumSequence, geometric_sequence, integer_sequence


@pytest.fixture(scope="module")
def small_bundle():
    return build_counterexample(integer_sequence(600), 3, sandwich="report")


@pytest.fixture(scope="module")
def enforced_bundle():
    return build_counterexample(integer_sequence(2000), 3, sandwich="enforce")


def exact_block_sum(values, T):
    """sum over T of 1 / prod_{m != n} |1 - t_n/t_m|, in rationals (U = 1)."""
    total = Fraction(0)
    for n in T:
        p = Fraction(1)
        for m in T:
            if m != n:
                p *= abs(1 - Fraction(values[n]) / Fraction(values[m]))
        total += 1 / p
    return total


# canonical products


def test_single_zero_product():
    S = block_product(integer_sequence(10), [4])
    assert S.derivs()[0] == pytest.approx(-1 / 5)
    assert S(np.array([2.5]))[0] == pytest.approx(0.5)
    assert S.at_zero == 1.0


def test_two_zero_derivative():
    seq = SpectrumSequence.from_values([2.0, 4.0])
    S = block_product(seq, [0, 1])
    assert S.derivs() == pytest.approx([-0.25, 0.25])
    h = 1e-6
    num = (S(np.array([2 + h]))[0] - S(np.array([2 - h]))[0]) / (2 * h)
    assert num.real == pytest.approx(-0.25, rel=1e-6)


@settings(max_examples=50)
@given(st.lists(st.floats(0.5, 50.0), min_size=1, max_size=12, unique=True))
def test_derivatives_match_numerical(zs):
    zs = np.array(sorted(zs))
    if len(zs) > 1 and np.min(np.diff(zs) / zs[1:]) < 1e-3:
        return
    S = CanonicalProduct(zs)
    h = 1e-6 * zs
    num = (S(zs + h) - S(zs - h)).real / (2 * h)
    assert np.allclose(S.derivs(), num, rtol=1e-6, atol=0)
    assert S(np.array([0.0]))[0] == 1.0


def test_product_errors():
    with pytest.raises(DomainError):
        block_product(integer_sequence(5), [])
    with pytest.raises(DomainError):
        block_product(integer_sequence(5), [1, 1])
    with pytest.raises(DomainError):
        CanonicalProduct(np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        block_product(SpectrumSequence.from_values([-1.0, 2.0]), [0])


def test_log_abs_handles_huge_blocks():
    S = CanonicalProduct(np.arange(1.0, 3001.0))
    assert np.isfinite(S.log_abs(np.array([3000.5]))[0])
    logs, _ = S.log_abs_derivs()
    assert np.all(np.isfinite(logs))


# greedy blocks


def test_anchor_unsuitable_single_point():
    seq = SpectrumSequence.from_values([1.0, 10.0, 100.0])
    U = CanonicalProduct(np.array([1.0]))  # |U(10)| = 9
    with pytest.raises(AnchorUnsuitable):
        greedy_block(seq, 1, U)


def test_greedy_integers_anchor_40_is_minimal():
    seq = integer_sequence(200)
    gb = greedy_block(seq, 39)
    T = [int(i) for i in gb.indices]
    vals = list(range(1, 201))
    assert all(20 <= vals[i] <= 80 for i in T)
    assert exact_block_sum(vals, T) > 1
    for j in T:
        assert exact_block_sum(vals, [i for i in T if i != j]) <= 1
    assert np.all(removal_log_sums(seq, gb.indices) <= 0)
    assert math.exp(gb.log_sum) == pytest.approx(float(exact_block_sum(vals, T)), rel=1e-12)


def test_greedy_clustered_octave_passes_in_full():
    pts = np.concatenate([[1.0], 100.0 + np.linspace(0, 1, 20)])
    seq = SpectrumSequence.from_values(pts)
    gb = greedy_block(seq, 10)
    assert gb.octave_size == 20
    assert gb.log_sum > 0


# construction


def test_zero_blocks_degenerate():
    b = build_counterexample(integer_sequence(50), 0)
    assert len(b.S) == 0 and len(b.residues) == 0
    assert b.kappa == 1.0 and b.blocks == ()


def test_geometric_insufficient():
    with pytest.raises(InsufficientSparseness):
        build_counterexample(geometric_sequence(2.0, 60), 4)


def test_bad_inputs():
    with pytest.raises(DomainError):
        build_counterexample(integer_sequence(50), 2, sandwich="ignore")
    with pytest.raises(DomainError):
        build_counterexample(SpectrumSequence.from_values([1j, 2.0]), 2)


def test_bundle_invariants(small_bundle):
    b = small_bundle
    t = b.sequence.values.real
    seen = set()
    for T, a in zip(b.blocks, b.anchors):
        assert all(t[a] / 2 <= t[i] <= 2 * t[a] for i in T)
        assert not seen & set(T.tolist())
        seen |= set(T.tolist())
    assert 0 not in seen
    assert b.kappa == 1.0 and b.S.at_zero == 1.0
    assert np.allclose(b.a * b.b, b.residues, rtol=1e-14)
    assert np.allclose(b.residues, -1 / b.S.derivs(), rtol=1e-12)


def test_s1_equals_residue_sum(small_bundle):
    b = small_bundle
    t = b.S.zeros
    assert np.sum(np.abs(b.residues) / t) == pytest.approx(b.S1_trace[-1], rel=1e-12)
    assert np.sum(np.abs(b.residues) / t ** 2) == pytest.approx(b.S2_trace[-1], rel=1e-12)


def test_minimality_every_block(small_bundle):
    for total, after in minimality_margins(small_bundle):
        assert total > 0
        assert after <= 0


def test_zle_uniform_bound(small_bundle):
    z = small_bundle.zle_sums
    assert all(x <= 4 * z[0] for x in z)


def test_sums_report(small_bundle):
    rep = verify_sums(small_bundle)
    assert rep.S1_diverges_proxy and rep.S2_converges_proxy
    assert all(b > a for a, b in zip(rep.S1_trace, rep.S1_trace[1:]))


def test_sums_single_block():
    b = build_counterexample(integer_sequence(600), 1, sandwich="report")
    rep = verify_sums(b)
    assert rep.S1_diverges_proxy is None and rep.S2_converges_proxy is None
    assert rep.reason == "insufficient blocks"


def test_sandwich_enforced(enforced_bundle):
    b = enforced_bundle
    assert len(b.blocks) >= 2
    t = b.sequence.values.real
    for logs in sandwich_log_products(t, list(b.blocks))[:-1]:
        assert np.all(np.exp(logs) >= 0.5) and np.all(np.exp(logs) <= 2.0)
    assert min(b.sandwich_min) >= 0.5 and max(b.sandwich_max) <= 2.0


def test_report_mode_records_violations(small_bundle):
    # the first-triggered schedule on the integers does not meet the sandwich window
    assert small_bundle.sandwich_policy == "report"
    assert min(small_bundle.sandwich_min) < 0.5


def test_forced_tilde(small_bundle):
    b = build_counterexample(integer_sequence(600), 3, sandwich="report", force_tilde=True)
    assert b.used_tilde
    assert b.S.at_zero == -1.0 and b.kappa == -1.0
    assert 0 in b.S.indices
    # S~'(t_n) = (t_n - t_1) S'(t_n): each sum picks up 1/(t_n - 1), between 1/t_n and 2/t_n here
    for new, old in ((b.S1_increments, small_bundle.S2_increments),):
        assert all(o <= x <= 2 * o for x, o in zip(new, old))
    assert all(x < y for x, y in zip(b.S2_increments, small_bundle.S2_increments))


def test_json(small_bundle):
    doc = json.loads(json.dumps(small_bundle.to_json()))
    assert doc["blocks"] == [[int(i) for i in T] for T in small_bundle.blocks]
    assert doc["S_at_zero"] == 1.0
    assert len(doc["residues_sign"]) == len(small_bundle.S)


# interpolation identity


def exact_identity_gap(zeros, z):
    zeros = [Fraction(x) for x in zeros]
    z = Fraction(z)

    def S(x):
        p = Fraction(1)
        for t in zeros:
            p *= 1 - x / t
        return p

    def dS(n):
        p = -1 / zeros[n]
        for m, t in enumerate(zeros):
            if m != n:
                p *= 1 - zeros[n] / t
        return p

    rhs = 1 / S(Fraction(0)) - sum((1 / dS(n)) * (1 / (t - z) - 1 / t) for n, t in enumerate(zeros))
    return 1 / S(z) - rhs


def test_interpolation_two_zeros():
    for z in (Fraction(1, 3), Fraction(5), Fraction(-7, 2)):
        assert exact_identity_gap([2, 4], z) == 0
    S = CanonicalProduct(np.array([2.0, 4.0]))
    chk = interpolation_residual(S, [1 / 3, 5.0, -3.5, 1j, 3 + 2j])
    assert chk.max_residual < 1e-12
    assert interpolation_residual(S, [0.0]).max_residual == 0.0


def test_interpolation_rejects_near_zero():
    S = CanonicalProduct(np.array([2.0, 4.0]))
    chk = interpolation_residual(S, [2.0 + 1e-9, 1j])
    assert chk.rejected == (0,)
    assert len(chk.residuals) == 1


def test_interpolation_bundle(small_bundle):
    assert interpolation_residual(small_bundle.S, [1j, 0.5, -3.0]).max_residual < 1e-9


# kernels and defect


def test_kernel_columns_direct_oracle():
    rng = np.random.default_rng(2)
    t = np.arange(1.0, 13.0)
    ab = rng.uniform(0.5, 2.0, 12)
    lam = np.array([3.0, 7.5, -2.0, 12.0])
    V = cauchy_kernel_columns(t, ab, lam, normalize=False)
    direct = np.empty_like(V)
    for k, l in enumerate(lam):
        for n in range(12):
            direct[n, k] = ab[n] / t[n] * np.prod([1 - l / t[j] for j in range(12) if j != n])
    assert np.allclose(V, direct, rtol=1e-12, atol=0)


def test_defect_generic_window(small_bundle):
    rep = defect_rank(small_bundle, (0, 40))
    m = sum(1 for i in small_bundle.S.indices if i < 40)
    assert rep.deficiency == rep.expected == m
    assert rep.consistent


def test_defect_rank_oracle(small_bundle):
    # rank of the Gram matrix by eigenvalues, from the direct product formula
    window = (0, 12)
    rep = defect_rank(small_bundle, window)
    data = small_bundle.rank_one_data(window)
    t = data.t.real
    lam = t[~np.isin(np.arange(12), small_bundle.S.indices)]
    V = np.array([[abs(data.b[n]) / t[n] * np.prod([1 - l / t[j] for j in range(12) if j != n])
                   for l in lam] for n in range(12)])
    V /= np.linalg.norm(V, axis=0)
    ev = np.linalg.eigvalsh(V.T @ V)
    assert rep.numerical_rank == int(np.count_nonzero(ev > 1e-12 * ev.max()))


def test_defect_window_outside_zs(small_bundle):
    rep = defect_rank(small_bundle, (100, 130))
    assert rep.deficiency == 0 and rep.expected == 0


def test_defect_blocks_only(small_bundle):
    T1, T2 = small_bundle.blocks[:2]
    lo, hi = int(T1.min()), int(T2.max()) + 1
    assert set(range(lo, hi)) == set(T1.tolist()) | set(T2.tolist())
    rep = defect_rank(small_bundle, (lo, hi))
    assert rep.deficiency == len(T1) + len(T2)


def test_defect_errors(small_bundle):
    with pytest.raises(DomainError):
        defect_rank(small_bundle, (0, 10 ** 6))
    with pytest.raises(DomainError):
        defect_rank(build_counterexample(integer_sequence(50), 0))


# end to end


def test_windowed_operator_spectrum(small_bundle):
    b = small_bundle
    window = (0, 40)
    data = b.rank_one_data(window)
    ev = np.linalg.eigvals(build_truncated_matrix(singular_to_bounded(data)))
    ev = ev[np.argsort(-np.abs(ev))]
    keep = ~np.isin(np.arange(40), b.S.indices)
    expected = np.sort(1 / data.t.real[keep])[::-1]
    m = len(expected)
    assert np.allclose(ev[:m].real, expected, rtol=1e-8)
    # the Z_S coordinates form one defective zero eigenvalue, split by rounding at ~ eps^(1/6)
    assert len(ev) - m == sum(1 for i in b.S.indices if i < 40)
    assert np.abs(ev[m:]).max() < 1e-2
    L = build_truncated_matrix(singular_to_bounded(data))
    assert kernel_chain_dims(L, 1).dims == [1]
    # beta is 1/S on the window: no zeros
    f = MeromorphicSum.from_rank_one(data)
    z = np.array([1j, -5.0, 7.5 + 2j])
    assert np.allclose(f(z), 1 / b.S(z), rtol=1e-10)
    assert beta_zeros(f, (0.5, 41.5)).count == 0
