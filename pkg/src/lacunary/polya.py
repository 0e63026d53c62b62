"""Peak extraction for a pair of sequences, the trisection witness, and the
radial lower-bound probe built from both.

Peaks: indices m where p(m) dominates every earlier p and q(m) = alpha(m) p(m)
dominates every later q.

Trisection witness: if |f^(r)| > eps on [a, b], cutting [a, b] into thirds r
times (keeping the third away from the sign change of the next-lower
derivative) leaves an interval of length (b - a)/3^r on which |f| is bounded
below.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._numerics import tail_ratio
from .errors import DomainError, SearchFailure
from .spectra import check_lacunary, fit_geometric_growth


@dataclass(frozen=True)
class PeakInput:
    p: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        if p.ndim != 1 or p.shape != alpha.shape or len(p) == 0:
            raise DomainError("p and alpha must be aligned, nonempty 1-d sequences")
        if np.any(p < 0) or np.any(alpha <= 0):
            raise DomainError("p must be nonnegative and alpha positive")
        if np.any(np.diff(alpha) >= 0):
            raise DomainError("alpha must be strictly decreasing")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "alpha", alpha)

    @property
    def q(self):
        return self.alpha * self.p


@dataclass(frozen=True)
class PeakReport:
    peak_indices: tuple
    p_at_peaks: tuple
    q_at_peaks: tuple
    p_max_growing: bool
    q_tail_shrinking: bool


def polya_peaks(inp):
    """All indices m with p[m] = max p[:m+1] and q[m] = max q[m:] (0-based)."""
    p, q = inp.p, inp.q
    head = np.maximum.accumulate(p)
    tail = np.maximum.accumulate(q[::-1])[::-1]
    idx = np.flatnonzero((p == head) & (q == tail))
    mid = len(p) // 2
    return PeakReport(
        peak_indices=tuple(int(i) for i in idx),
        p_at_peaks=tuple(float(p[i]) for i in idx),
        q_at_peaks=tuple(float(q[i]) for i in idx),
        p_max_growing=bool(head[-1] > head[mid]) if len(p) > 1 else False,
        q_tail_shrinking=bool(tail[mid] < tail[0]) if len(p) > 1 else False,
    )


@dataclass(frozen=True)
class GridFunction:
    """Samples of a real function at a + j (b - a)/(n - 1), j = 0..n-1.

    a and b may be Fractions; node positions are then exact.
    """

    a: object
    b: object
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) < 2:
            raise DomainError("need at least two samples")
        if not self.b > self.a:
            raise DomainError("need a < b")
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, func, a, b, n):
        x = np.linspace(float(a), float(b), n)
        return cls(a, b, np.asarray(func(x), dtype=float))

    @property
    def n(self):
        return len(self.values)

    @property
    def h(self):
        return float(self.b - self.a) / (self.n - 1)

    def node(self, j):
        return self.a + (self.b - self.a) * Fraction(j, self.n - 1) if isinstance(self.a, Fraction) or isinstance(
            self.b, Fraction
        ) else self.a + (self.b - self.a) * j / (self.n - 1)


@dataclass(frozen=True)
class DividedInterval:
    subinterval: tuple
    index_range: tuple
    min_abs_value: float
    bound: object
    method: str


def _derivative_samples(g, k):
    return np.diff(g.values, k) / g.h ** k if k else g.values


def divided_interval(g, r, eps):
    """Subinterval of length (b - a)/3^r with sampled |f| >= ((b - a)/6)^r eps.

    The search follows the trisection argument: at order k, keep the first third
    of the current interval when f^(k-1) at its midpoint has sign opposite to
    f^(k), else keep the last third.  If the trisection candidate misses the
    stated bound on the grid, every grid-aligned interval of the same length is
    scanned before giving up.
    """
    if not 1 <= r <= 4:
        raise DomainError("r must be in 1..4")
    step = 3 ** r
    if (g.n - 1) % step:
        raise DomainError(f"grid needs n - 1 divisible by 3^{r}")
    dr = _derivative_samples(g, r)
    if not (np.all(dr > eps) or np.all(dr < -eps)):
        raise SearchFailure(f"finite differences do not certify |f^({r})| > eps")
    length = g.b - g.a
    bound = (length / 6) ** r * eps
    fb = float(bound)

    lo, hi = 0, g.n - 1
    for k in range(r, 0, -1):
        # f^(k) keeps one sign on [lo, hi]; trisect according to f^(k-1) at the midpoint
        dk = _derivative_samples(g, k)
        seg = dk[lo: hi - k + 1] if hi - k + 1 > lo else dk[lo: lo + 1]
        sign = 1.0 if np.mean(seg) > 0 else -1.0
        dlow = _derivative_samples(g, k - 1)
        mid = (lo + hi) // 2
        at = min(max(mid - (k - 1) // 2, 0), len(dlow) - 1)
        third = (hi - lo) // 3
        if sign * dlow[at] < 0:
            hi = lo + third
        else:
            lo = hi - third
    sub = np.abs(g.values[lo: hi + 1])
    method = "trisection"
    if sub.min() < fb:
        width = (g.n - 1) // step
        absv = np.abs(g.values)
        from numpy.lib.stride_tricks import sliding_window_view

        mins = sliding_window_view(absv, width + 1).min(axis=1)
        ok = np.flatnonzero(mins >= fb)
        if len(ok) == 0:
            raise SearchFailure("no grid subinterval of the required length clears the bound")
        j = int(ok[np.argmax(mins[ok])])
        lo, hi = j, j + width
        sub = absv[lo: hi + 1]
        method = "scan"
    return DividedInterval((g.node(lo), g.node(hi)), (lo, hi), float(sub.min()), bound, method)


# radial lower bound on |z beta(z)| near the peak poles


@dataclass(frozen=True)
class RingRow:
    index: int
    ring: tuple
    observed_min: float
    bound: float
    method: str


@dataclass(frozen=True)
class LowerBoundProbe:
    rows: tuple
    floor: float | None
    holds: bool
    inconclusive: bool
    reason: str = ""
    u: float = math.nan
    g: float = math.nan
    skipped: tuple = field(default=())


def lacunary_lower_bound_probe(f, u=None, require_divergence=True, n_grid=9 * 64 + 1, min_peaks=2):
    """min |z beta(z)| on the radial rings just outside the peak poles.

    Rings are [(1 + eps1)|t_m|, (1 + eps)|t_m|] with eps = min(0.1, gamma/4) and
    eps1 = 0.9 eps, gamma the pairwise lacunarity constant.  On each ring the
    real part of a rotated beta is fed to the trisection witness with r = 2.
    """
    t = np.asarray(f.t)
    c = np.asarray(f.residues)
    mod = np.abs(t)
    if len(t) < 2:
        return LowerBoundProbe((), None, False, True, "window too short")
    if require_divergence and tail_ratio(np.abs(c / t)) < 1e-2:
        return LowerBoundProbe((), None, False, True, "sum |c_n/t_n| converges on the window")
    gamma = check_lacunary(f.poles).best_epsilon
    g, _ = fit_geometric_growth(f.poles)
    if u is None:
        u = 0.5 * (1 + g)
    if not 1 < u:
        raise DomainError("u must exceed 1")
    n = np.arange(1, len(t) + 1, dtype=float)
    p = u ** n * np.abs(c) / mod
    alpha = u ** (-n) / mod
    peaks = polya_peaks(PeakInput(p, alpha)).peak_indices
    peaks = [m for m in peaks if c[m] != 0]
    if not peaks:
        return LowerBoundProbe((), None, False, True, "no peaks on the window", u, g)
    eps = min(0.1, gamma / 4)
    eps1 = 0.9 * eps
    rows, skipped = [], []
    for m in peaks:
        phase = t[m] / mod[m]
        x = np.linspace((1 + eps1) * mod[m], (1 + eps) * mod[m], n_grid)
        z = x * phase
        b2 = f.derivative(z, 2) * phase ** 2
        centre = b2[len(b2) // 2]
        zeta = np.conj(centre) / abs(centre)
        f2 = (zeta * b2).real
        if f2.min() <= 0:
            skipped.append(m)
            continue
        bz = f(z)
        grid = GridFunction(float(x[0]), float(x[-1]), (zeta * bz).real)
        try:
            res = divided_interval(grid, 2, 0.999 * float(f2.min()))
        except SearchFailure:
            skipped.append(m)
            continue
        lo, hi = res.index_range
        observed = float(np.min(np.abs(z[lo: hi + 1] * bz[lo: hi + 1])))
        rows.append(RingRow(int(m), (float(x[0]), float(x[-1])), observed, float(x[lo]) * float(res.bound), res.method))
    if len(rows) < min_peaks:
        return LowerBoundProbe(tuple(rows), None, False, True, "too few usable peaks", u, g, tuple(skipped))
    obs = [row.observed_min for row in rows]
    half = max(1, len(obs) // 2)
    floor = 0.5 * min(obs[:half])
    holds = floor > 0 and all(o >= floor for o in obs[half:])
    return LowerBoundProbe(tuple(rows), floor, bool(holds), False, "", u, g, tuple(skipped))
