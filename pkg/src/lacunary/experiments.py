"""Composite experiments shared by the command line, scripts and tests."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .counterexample import (
    build_counterexample,
    defect_rank,
    interpolation_residual,
    minimality_margins,
    verify_sums,
)
from .meromorphics import (
    MeromorphicSum,
    beta_zeros,
    nudge_radius,
    psi_eval,
    psi_meromorphic_sum,
    psi_rank_one_data,
    zero_free_radii,
)
from .perturbation import RankOneData, build_truncated_matrix, moment_sum
from .spectra import SpectrumSequence


def random_rank_one(rng, n_max=50, complex_spectrum=None):
    """Bounded data with N <= n_max separated eigenvalues of modulus ~ 1..N and small a, b."""
    N = int(rng.integers(2, n_max + 1))
    mod = np.arange(1, N + 1) + rng.uniform(0, 0.5, N)
    if complex_spectrum is None:
        complex_spectrum = bool(rng.integers(0, 2))
    if complex_spectrum:
        t = mod * np.exp(1j * rng.uniform(0, 2 * np.pi, N))
    else:
        t = mod * rng.choice([-1.0, 1.0], N)
    a = (rng.normal(size=N) + 1j * rng.normal(size=N)) * 0.3 / np.sqrt(N)
    b = (rng.normal(size=N) + 1j * rng.normal(size=N)) * 0.3 / np.sqrt(N)
    return RankOneData(SpectrumSequence.from_values(t, origin="random"), a, b)


def windowed_zeros(f, tol=1e-10):
    r_in, r_out = zero_free_radii(f)
    return beta_zeros(f, (nudge_radius(f, r_in, -1), nudge_radius(f, r_out, 1)), tol)


@dataclass(frozen=True)
class OracleComparison:
    n: int
    n_eigenvalues: int
    n_zeros: int
    max_rel_error: float


def oracle_comparison(data, tol=1e-10):
    """Nonzero eigenvalues of the dense matrix against reciprocals of the beta zeros."""
    ev = np.linalg.eigvals(build_truncated_matrix(data))
    scale = np.abs(ev).max()
    ev = ev[np.abs(ev) > 1e-12 * scale]
    zs = windowed_zeros(MeromorphicSum.from_rank_one(data), tol)
    rec = 1.0 / zs.zeros
    if len(rec) != len(ev) or len(ev) == 0:
        return OracleComparison(len(data), len(ev), len(rec), math.inf if len(rec) != len(ev) else 0.0)
    cost = np.abs(rec[:, None] - ev[None, :]) / np.abs(ev[None, :])
    r, c = linear_sum_assignment(cost)
    return OracleComparison(len(data), len(ev), len(rec), float(cost[r, c].max()))


@dataclass(frozen=True)
class PsiReproduction:
    zeros: np.ndarray
    expected: np.ndarray
    max_rel_zero_error: float
    first_moment: complex
    circle_radii: tuple
    circle_maxima: tuple
    decay_exponent: float
    decay_constant: float


def psi_reproduction(n_min=2, n_max=12, k_min=3, k_max=10, n_terms=40, n_circle=512, tol=1e-10):
    """Zeros of the psi-based beta in the annulus holding i 2^n, n_min..n_max; the first
    moment of the associated bounded data; and max |psi| on |z| = 3 2^k."""
    f = psi_meromorphic_sum(n_terms)
    r_in = 2.0 ** n_min / math.sqrt(2)
    r_out = 2.0 ** n_max * math.sqrt(2)
    zs = beta_zeros(f, (r_in, r_out), tol)
    expected = 1j * 2.0 ** np.arange(n_min, n_max + 1)
    if len(zs.zeros) == len(expected):
        err = float(np.max(np.abs(zs.zeros - expected) / np.abs(expected)))
    else:
        err = math.inf
    moment = moment_sum(psi_rank_one_data(n_terms), 1).partial_sum
    theta = (np.arange(n_circle) + 0.5) * 2 * math.pi / n_circle
    radii, maxima = [], []
    for k in range(k_min, k_max + 1):
        r = 3.0 * 2.0 ** k
        maxima.append(max(abs(psi_eval(z).value) for z in r * np.exp(1j * theta)))
        radii.append(r)
    ks = np.arange(k_min, k_max + 1, dtype=float)
    slope, icpt = np.polyfit(ks, np.log2(maxima), 1)
    return PsiReproduction(
        zs.zeros, expected, err, complex(moment), tuple(radii), tuple(maxima), float(slope), float(2.0 ** icpt)
    )


def sample_points(count, t_max):
    """Deterministic complex samples on a spiral between 1/2 and 2 t_max, off the real axis."""
    if count < 1:
        return np.zeros(0, dtype=complex)
    golden = (math.sqrt(5) - 1) / 2
    j = np.arange(count)
    radius = 0.5 * (4 * t_max) ** (j / max(count - 1, 1))
    angle = math.pi / 6 + ((j * golden) % 1.0) * (2 * math.pi - math.pi / 3)
    return radius * np.exp(1j * angle)


@dataclass(frozen=True)
class CounterexampleRun:
    bundle: object
    sums: object
    minimality: tuple
    interpolation: object
    defect: object
    samples: np.ndarray


def counterexample_experiment(seq, max_blocks, growth=4.0, sandwich="enforce", n_samples=20, window=None,
                              rank_tol=1e-8, force_tilde=False):
    bundle = build_counterexample(seq, max_blocks, growth, sandwich, force_tilde=force_tilde)
    sums = verify_sums(bundle)
    margins = tuple(minimality_margins(bundle))
    t_max = float(bundle.S.zeros.max()) if len(bundle.S) else 1.0
    samples = sample_points(n_samples, t_max)
    interp = interpolation_residual(bundle.S, samples)
    defect = defect_rank(bundle, window, rank_tol) if len(bundle.S) else None
    return CounterexampleRun(bundle, sums, margins, interp, defect, samples)
