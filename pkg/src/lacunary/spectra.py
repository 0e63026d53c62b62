"""Spectrum sequences, generators and sparseness tests.

A `SpectrumSequence` holds the values t_n (reciprocals of the eigenvalues of a
compact normal operator) ordered by modulus.  The tests here measure how sparse
such a sequence is: pairwise lacunarity, the counting function, the log^2
density condition, and the octave product that drives the block construction
in :mod:`lacunary.counterexample`.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from ._numerics import LOG_FLOOR, floor_exp
from .errors import DomainError, UnsupportedInput

DEFAULT_LACUNARITY_THRESHOLD = 1e-3
DEFAULT_DIVERGENCE_THRESHOLD = 2.0


@dataclass(frozen=True)
class SpectrumSequence:
    values: np.ndarray
    is_real: bool = False
    origin: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).copy()
        if v.ndim != 1:
            raise DomainError("values must be one-dimensional")
        if np.any(v == 0):
            raise DomainError("spectrum values must be nonzero")
        if not np.all(np.isfinite(v)):
            raise DomainError("spectrum values must be finite")
        mod = np.abs(v)
        if np.any(np.diff(mod) < 0):
            raise DomainError("moduli must be nondecreasing")
        if len(np.unique(v)) != len(v):
            raise DomainError("spectrum values must be pairwise distinct")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "is_real", bool(np.all(v.imag == 0)))

    @classmethod
    def from_values(cls, values, origin=""):
        """Build a sequence from arbitrary values, sorting them by modulus (stable)."""
        v = np.asarray(values, dtype=complex).ravel()
        order = np.argsort(np.abs(v), kind="stable")
        return cls(v[order], origin=origin)

    def __len__(self):
        return len(self.values)

    @property
    def moduli(self):
        return np.abs(self.values)

    @property
    def real(self):
        if not self.is_real:
            raise UnsupportedInput("sequence has complex values")
        return self.values.real.copy()

    @property
    def reciprocals(self):
        """s_n = 1/t_n."""
        return 1.0 / self.values

    def window(self, start, stop):
        return SpectrumSequence(self.values[start:stop], origin=f"{self.origin}[{start}:{stop}]")

    def to_json(self):
        return [[float(z.real), float(z.imag)] for z in self.values]

    @classmethod
    def from_json(cls, pairs, origin="json"):
        return cls.from_values([complex(re, im) for re, im in pairs], origin=origin)


@dataclass(frozen=True)
class LacunarityReport:
    is_lacunary: bool
    best_epsilon: float
    witness_pair: tuple | None = None
    threshold: float = DEFAULT_LACUNARITY_THRESHOLD


@dataclass(frozen=True)
class DensityVerdict:
    radii: tuple
    ratios: tuple
    window_maxima: tuple
    limsup_proxy: float
    satisfies_beglog2: bool
    window_saturated: bool
    threshold: float = DEFAULT_DIVERGENCE_THRESHOLD


@dataclass(frozen=True)
class Witness:
    index: int
    product_value: float
    log_product: float
    M: int
    candidates: tuple = field(default=(), repr=False)


# generators


def geometric_sequence(ratio, count, start=1, scale=1.0):
    n = np.arange(start, start + count, dtype=float)
    return SpectrumSequence.from_values(scale * ratio ** n, origin=f"geometric({ratio})")


def integer_sequence(count, start=1, shift=0.0):
    n = np.arange(start, start + count, dtype=float)
    return SpectrumSequence.from_values(n + shift, origin=f"integers({start}+{shift})")


def stretched_exp_sequence(power, count, start=1):
    """t_n = exp(n**power); power 1/2 and 1/3 give the log^2 borderline and its sparse side."""
    n = np.arange(start, start + count, dtype=float)
    return SpectrumSequence.from_values(np.exp(n ** power), origin=f"exp(n^{power})")


# sparseness tests


def check_lacunary(seq, threshold=DEFAULT_LACUNARITY_THRESHOLD, chunk=512):
    """Exact minimum over pairs of |t_n - t_m| / max(|t_n|, |t_m|)."""
    v = np.asarray(seq.values)
    n = len(v)
    if n == 0:
        raise DomainError("empty sequence")
    if n == 1:
        return LacunarityReport(True, math.inf, None, threshold)
    mod = np.abs(v)
    best = math.inf
    pair = None
    for lo in range(0, n - 1, chunk):
        hi = min(n - 1, lo + chunk)
        rows = np.arange(lo, hi)
        diff = np.abs(v[rows, None] - v[None, :])
        den = np.maximum(mod[rows, None], mod[None, :])
        ratio = diff / den
        ratio[np.arange(n)[None, :] <= rows[:, None]] = np.inf
        k = int(np.argmin(ratio))
        i, j = divmod(k, n)
        if ratio[i, j] < best:
            best = float(ratio[i, j])
            pair = (int(rows[i]), int(j))
    return LacunarityReport(best > threshold, best, pair, threshold)


def fit_geometric_growth(seq):
    """Fitted (g, B) with |t_n / t_m| <= B g^(n-m) for n < m on the window.

    g is the least-squares growth rate of log|t_n|; B is the smallest constant
    that makes the inequality hold for that g.
    """
    mod = np.abs(seq.values)
    if len(mod) < 2:
        raise DomainError("need at least two values")
    idx = np.arange(len(mod), dtype=float)
    slope = np.polyfit(idx, np.log(mod), 1)[0]
    g = math.exp(slope)
    # log|t_n/t_m| - (n-m) log g for n < m, maximised
    resid = np.log(mod) - idx * slope
    running_max = np.maximum.accumulate(resid)
    log_b = np.max(running_max[:-1] - resid[1:])
    return g, math.exp(max(log_b, 0.0))


def counting_function(seq, r):
    """#{n : |t_n| < r}."""
    if r <= 0:
        raise DomainError("radius must be positive")
    return int(np.searchsorted(np.abs(seq.values), r, side="left"))


def log2_density_test(seq, radii, threshold=DEFAULT_DIVERGENCE_THRESHOLD):
    """Windowed proxy for limsup n_T(r) / log^2 r = infinity.

    The radius grid is split into three consecutive windows.  The verdict is
    positive when the maximum ratio in the last window exceeds `threshold` and
    the window maxima are nondecreasing.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 3:
        raise DomainError("need at least three radii")
    if np.any(radii <= 1):
        raise DomainError("radii must exceed 1")
    if np.any(np.diff(radii) <= 0):
        raise DomainError("radii must be increasing")
    counts = np.array([counting_function(seq, r) for r in radii], dtype=float)
    ratios = counts / np.log(radii) ** 2
    windows = np.array_split(np.arange(len(radii)), 3)
    maxima = tuple(float(ratios[w].max()) for w in windows)
    limsup = maxima[-1]
    saturated = bool(radii[-1] > np.abs(seq.values).max())
    ok = limsup > threshold and all(b >= a for a, b in zip(maxima, maxima[1:]))
    return DensityVerdict(
        tuple(radii.tolist()), tuple(ratios.tolist()), maxima, limsup, bool(ok), saturated, threshold
    )


def _require_real(seq):
    if not seq.is_real:
        raise UnsupportedInput("operation is defined for real sequences only")
    return seq.values.real


def log_sparseness_product(seq, n, N):
    """log of |t_n|^N prod_{k != n, 1/2 <= t_k/t_n <= 2} |(t_k - t_n)/t_k|."""
    t = _require_real(seq)
    if not 0 <= n < len(t):
        raise DomainError(f"index {n} out of range")
    tn = t[n]
    ratio = t / tn
    mask = (ratio >= 0.5) & (ratio <= 2.0)
    mask[n] = False
    tk = t[mask]
    return N * math.log(abs(tn)) + float(np.sum(np.log(np.abs((tk - tn) / tk))))


def sparseness_product(seq, n, N):
    return floor_exp(log_sparseness_product(seq, n, N))


def bon_witness(seq, R):
    """Point of [R, 2R] whose product of relative distances to the other points is smallest.

    With 2M points in the interval the minimum never exceeds 2^(1-M).
    """
    t = _require_real(seq)
    idx = np.flatnonzero((t >= R) & (t <= 2 * R))
    if len(idx) < 2:
        return None
    pts = t[idx]
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs((pts[None, :] - pts[:, None]) / pts[None, :]))
    np.fill_diagonal(logs, 0.0)
    row = logs.sum(axis=1)
    j = int(np.argmin(row))
    lp = float(row[j])
    return Witness(
        index=int(idx[j]),
        product_value=floor_exp(lp) if lp > LOG_FLOOR else 0.0,
        log_product=lp,
        M=len(idx) // 2,
        candidates=tuple(int(i) for i in idx),
    )


# generators from operators


def _sturm_count(d, e2, x):
    """Number of eigenvalues of the tridiagonal matrix strictly below x."""
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, len(d)):
        if q == 0.0:
            q = 1e-300
        q = d[i] - x - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def tridiagonal_eigenvalues(diag, offdiag, rtol=1e-12):
    """All eigenvalues of a real symmetric tridiagonal matrix by Sturm bisection, ascending."""
    d = np.asarray(diag, dtype=float)
    e = np.asarray(offdiag, dtype=float)
    n = len(d)
    e2 = e * e
    radius = np.zeros(n)
    radius[:-1] += np.abs(e)
    radius[1:] += np.abs(e)
    lo0 = float(np.min(d - radius))
    hi0 = float(np.max(d + radius))
    scale = max(abs(lo0), abs(hi0), 1e-300)
    tol = rtol * scale
    out = np.empty(n)
    for k in range(n):
        lo, hi = lo0, hi0
        # invariant: count(lo) <= k < count(hi)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _sturm_count(d, e2, mid) > k:
                hi = mid
            else:
                lo = mid
        out[k] = 0.5 * (lo + hi)
    return out


def jacobi_truncated_eigenvalues(diag, offdiag, N):
    """Eigenvalues of the N x N truncation of a Jacobi matrix, as a spectrum sequence.

    Eigenvalues within the bisection tolerance of 0 are dropped (a spectrum
    sequence holds nonzero values only); the origin label records how many.
    """
    if N < 1:
        raise DomainError("N must be at least 1")
    d = np.broadcast_to(np.asarray(diag, dtype=float), (N,)) if np.ndim(diag) == 0 else np.asarray(diag, dtype=float)[:N]
    if len(d) < N:
        raise DomainError("diag shorter than N")
    e = np.asarray(offdiag, dtype=float)
    if len(e) < N - 1:
        raise DomainError("offdiag must have length >= N-1")
    e = e[: N - 1]
    ev = tridiagonal_eigenvalues(d, e)
    scale = max(np.abs(ev).max(), 1e-300)
    keep = np.abs(ev) > 1e-12 * scale
    dropped = int(np.count_nonzero(~keep))
    return SpectrumSequence.from_values(ev[keep], origin=f"jacobi(N={N}, dropped_zero={dropped})")


def q_oscillator_offdiag(q, count):
    """Off-diagonal entries ((q^n - 1)/(q - 1))^(1/2), n = 1..count."""
    n = np.arange(1, count + 1, dtype=float)
    return np.sqrt((q ** n - 1.0) / (q - 1.0))


def convolution_symbol_sequence(tau1, tau2, r, R, a, n_max, form="exact"):
    """Two-sided Fourier-coefficient sequence of tau1 (R - z)^-a + tau2 (1/r - 1/z)^-a.

    form="leading" returns the asymptotic coefficients tau1 R^(-a-n) n^(a-1)
    (n > 0) and tau2 r^(a+|n|) |n|^(a-1) (n < 0).  form="exact" uses the
    binomial-series coefficients Gamma(n+a)/(Gamma(a) n!), which share that
    leading order but stay pairwise distinct for small |n|.
    """
    tau1, tau2 = complex(tau1), complex(tau2)
    if tau1 == 0 or tau2 == 0:
        raise DomainError("tau1 and tau2 must be nonzero")
    ratio = tau1 / tau2
    if abs(ratio.imag) <= 1e-15 * abs(ratio) and ratio.real > 0:
        raise DomainError("tau1/tau2 in (0, inf): the two branches would share a ray")
    if not (0 < r < 1 and R > 1 and a > 1):
        raise DomainError("need 0 < r < 1, R > 1, a > 1")
    n = np.arange(1, n_max + 1, dtype=float)
    if form == "leading":
        pos = tau1 * R ** (-a - n) * n ** (a - 1)
        neg = tau2 * r ** (a + n) * n ** (a - 1)
        vals = np.concatenate([pos, neg])
    elif form == "exact":
        binom = np.exp(gammaln(n + a) - gammaln(a) - gammaln(n + 1))
        pos = tau1 * R ** (-a - n) * binom
        neg = tau2 * r ** (a + n) * binom
        zero = tau1 * R ** (-a) + tau2 * r ** a
        vals = np.concatenate([[zero], pos, neg]) if zero != 0 else np.concatenate([pos, neg])
    else:
        raise DomainError(f"unknown form {form!r}")
    return SpectrumSequence.from_values(vals, origin=f"convolution-symbol({form})")
