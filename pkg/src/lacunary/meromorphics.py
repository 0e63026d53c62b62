"""The perturbation determinant beta(z) = kappa + sum c_n (1/(t_n - z) - 1/t_n).

Evaluation carries a bound on the dropped tail; zeros are counted with the
argument principle and isolated by recursive subdivision of annular sectors,
then polished by damped Newton.  Also here: the infinite product psi whose
zeros sit at i 2^n, and the two radial probes (resolvent norm, z^s beta).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._numerics import neumaier_sum
from .errors import ContourError, DomainError, PoleError
from .spectra import SpectrumSequence, check_lacunary

TWO_PI = 2.0 * math.pi
POLE_DISTANCE = 1e-12
CIRCLE_MARGIN = 1e-3
MAX_POINTS = 2 ** 16
ARG_STEP = math.pi / 2
CUT_FRACTIONS = tuple(np.linspace(0.15, 0.85, 71))


@dataclass(frozen=True)
class MeromorphicSum:
    poles: SpectrumSequence
    residues: np.ndarray
    kappa: complex = 1.0
    tail_weight: float = 0.0  # bound on sum_{n > N} |c_n| / |t_n|^2
    next_pole_modulus: float = math.inf

    def __post_init__(self):
        c = np.asarray(self.residues, dtype=complex).copy()
        if c.shape != (len(self.poles),):
            raise DomainError("residues must align with poles")
        c.setflags(write=False)
        object.__setattr__(self, "residues", c)
        object.__setattr__(self, "kappa", complex(self.kappa))

    @classmethod
    def from_rank_one(cls, data, tail_weight=0.0, next_pole_modulus=math.inf):
        return cls(data.spectrum, data.residues, data.kappa, tail_weight, next_pole_modulus)

    @property
    def t(self):
        return self.poles.values

    @property
    def n_terms(self):
        return len(self.poles)

    @property
    def weight_sum(self):
        """sum |c_n| / |t_n|^2 over the window."""
        return float(np.sum(np.abs(self.residues) / np.abs(self.t) ** 2))

    @property
    def value_at_infinity(self):
        """kappa - sum c_n / t_n, the radial limit of beta for finitely supported data."""
        return self.kappa - complex(neumaier_sum(self.residues / self.t))

    def truncate(self, N):
        if not 0 < N <= self.n_terms:
            raise DomainError("truncation outside the window")
        dropped = np.abs(self.residues[N:]) / np.abs(self.t[N:]) ** 2
        nxt = abs(self.t[N]) if N < self.n_terms else self.next_pole_modulus
        return MeromorphicSum(
            self.poles.window(0, N), self.residues[:N], self.kappa,
            self.tail_weight + float(np.sum(dropped)), nxt,
        )

    def tail_bound(self, z):
        """Bound on |sum_{n>N} c_n z / (t_n (t_n - z))|, valid for |z| < |t_{N+1}|."""
        r = np.abs(np.asarray(z))
        if self.tail_weight == 0.0:
            return np.zeros_like(r, dtype=float) if np.ndim(r) else 0.0
        with np.errstate(divide="ignore"):
            out = np.where(r < self.next_pole_modulus, r * self.tail_weight / (1 - r / self.next_pole_modulus), np.inf)
        return out if np.ndim(r) else float(out)

    def _terms(self, z, power):
        t = self.t[:, None]
        c = self.residues[:, None]
        z = np.atleast_1d(np.asarray(z, dtype=complex))[None, :]
        if power == 0:
            return c * z / (t * (t - z))
        return c / (t - z) ** (power + 1)

    def __call__(self, z):
        """beta on an array of points (no pole check)."""
        z = np.asarray(z, dtype=complex)
        val = self.kappa + neumaier_sum(self._terms(z, 0), axis=0)
        return val.reshape(z.shape)

    def derivative(self, z, order=1):
        z = np.asarray(z, dtype=complex)
        val = math.factorial(order) * neumaier_sum(self._terms(z, order), axis=0)
        return val.reshape(z.shape)

    def nearest_pole(self, z):
        d = np.abs(self.t - z) / np.abs(self.t)
        i = int(np.argmin(d)) if len(d) else -1
        return i, (float(d[i]) if i >= 0 else math.inf)


@dataclass(frozen=True)
class BetaValue:
    value: complex
    tail_bound: float


def beta_eval(f, z):
    z = complex(z)
    i, d = f.nearest_pole(z)
    if d <= POLE_DISTANCE:
        raise PoleError(i)
    return BetaValue(complex(f(np.array([z]))[0]), float(f.tail_bound(z)))


def zero_free_radii(f):
    """(r_in, r_out) such that the finitely supported beta has no zeros with |z| < r_in or |z| > r_out."""
    t_abs = np.abs(f.t)
    c_abs = np.abs(f.residues)
    if f.kappa == 0:
        raise DomainError("beta(0) = 0: no zero-free disc around the origin")
    w0 = float(np.sum(c_abs / t_abs ** 2))
    r_in = 0.5 * float(t_abs.min())
    if w0 > 0:
        r_in = min(r_in, abs(f.kappa) / (4.0 * w0))
    b_inf = abs(f.value_at_infinity)
    if f.tail_weight > 0 or b_inf == 0:
        return r_in, math.inf
    r_out = max(2.0 * float(t_abs.max()), 4.0 * float(c_abs.sum()) / b_inf) * 1.01
    return r_in, r_out


def nudge_radius(f, r, direction, margin=CIRCLE_MARGIN):
    """Move r (outward if direction > 0) until it clears every pole by the relative margin."""
    mods = np.sort(np.abs(f.t))
    for _ in range(len(mods) + 1):
        close = np.abs(mods - r) <= 2 * margin * r
        if not close.any():
            return r
        r = r * (1 + 4 * margin) if direction > 0 else r / (1 + 4 * margin)
    return r


# zero finding


@dataclass(frozen=True)
class Annulus:
    r_in: float
    r_out: float


@dataclass(frozen=True)
class ZeroSet:
    zeros: np.ndarray
    multiplicities: tuple
    contour: Annulus
    winding_total: int
    poles_enclosed: int
    polish_residuals: tuple

    @property
    def count(self):
        return int(sum(self.multiplicities))

    def to_json(self):
        return {
            "zeros": [[float(z.real), float(z.imag), int(m)] for z, m in zip(self.zeros, self.multiplicities)],
            "winding": int(self.winding_total),
            "residuals": [float(r) for r in self.polish_residuals],
            "annulus": [self.contour.r_in, self.contour.r_out],
        }


@dataclass(frozen=True)
class _Cell:
    r1: float
    r2: float
    th1: float
    th2: float
    depth: int = 0

    @property
    def full(self):
        return self.th2 - self.th1 >= TWO_PI - 1e-15

    def contains(self, z, slack=0.0):
        r = abs(z)
        if not (self.r1 * (1 - slack) < r < self.r2 * (1 + slack)):
            return False
        if self.full:
            return True
        ang = (math.atan2(z.imag, z.real) - self.th1) % TWO_PI
        span = self.th2 - self.th1
        return ang < span + slack or ang > TWO_PI - slack

    def diameter(self):
        if self.full:
            return 2 * self.r2
        return max(self.r2 - self.r1, self.r2 * (self.th2 - self.th1))


class _ZeroFinder:
    def __init__(self, f, tol, max_points, max_depth=48):
        self.f = f
        self.tol = tol
        self.max_points = max_points
        self.max_depth = max_depth
        active = np.asarray(f.residues) != 0
        self.poles = np.asarray(f.t)[active]
        self.pole_mod = np.abs(self.poles)

    # boundary sampling

    def _sample(self, zfun, n0):
        s = np.linspace(0.0, 1.0, n0 + 1)
        z = zfun(s)
        v = self.f(z)
        while True:
            if not np.all(np.isfinite(v)) or np.any(v == 0):
                raise ContourError("beta vanishes or blows up on the contour")
            d = np.angle(v[1:] / v[:-1])
            bad = np.abs(d) >= ARG_STEP
            if len(self.poles):
                # a zero hugging a pole is invisible to the argument test unless the
                # step is small compared with the distance to that pole
                seg = np.abs(z[1:] - z[:-1])
                mid = 0.5 * (z[1:] + z[:-1])
                dist = np.min(np.abs(mid[:, None] - self.poles[None, :]), axis=1)
                bad |= seg > 0.5 * dist
            bad = np.flatnonzero(bad)
            if len(bad) == 0:
                return z, v
            if len(s) + len(bad) > self.max_points:
                raise ContourError("argument refinement exceeded the point budget")
            mids = 0.5 * (s[bad] + s[bad + 1])
            if np.any(s[bad + 1] - s[bad] < 1e-14):
                raise ContourError("argument refinement stalled (zero on the contour?)")
            zm = zfun(mids)
            s = np.insert(s, bad + 1, mids)
            z = np.insert(z, bad + 1, zm)
            v = np.insert(v, bad + 1, self.f(zm))

    def _edges(self, c):
        r1, r2, a, b = c.r1, c.r2, c.th1, c.th2
        arc_pts = max(32, int(64 * (b - a) / TWO_PI))
        if c.full:
            return [
                (lambda s: r2 * np.exp(1j * (a + s * TWO_PI)), 128),
                (lambda s: r1 * np.exp(1j * (a + TWO_PI - s * TWO_PI)), 128),
            ]
        lr = math.log(r2 / r1)
        return [
            (lambda s: r2 * np.exp(1j * (a + s * (b - a))), arc_pts),
            (lambda s: r2 * np.exp(-s * lr) * np.exp(1j * b), 32),
            (lambda s: r1 * np.exp(1j * (b - s * (b - a))), arc_pts),
            (lambda s: r1 * np.exp(s * lr) * np.exp(1j * a), 32),
        ]

    def boundary(self, c):
        zs, vs = [], []
        for zfun, n0 in self._edges(c):
            z, v = self._sample(zfun, n0)
            zs.append(z)
            vs.append(v)
        total = 0.0
        dlogs = []
        for z, v in zip(zs, vs):
            d = np.angle(v[1:] / v[:-1])
            total += float(np.sum(d))
            dlogs.append(np.log(np.abs(v[1:] / v[:-1])) + 1j * d)
        w = total / TWO_PI
        if abs(w - round(w)) > 1e-6:
            raise ContourError(f"winding {w} is not an integer")
        return zs, vs, int(round(w)), dlogs

    def poles_inside(self, c):
        return [i for i, p in enumerate(self.f.t) if self.f.residues[i] != 0 and c.contains(complex(p))]

    def count(self, c):
        zs, vs, w, dlogs = self.boundary(c)
        poles = self.poles_inside(c)
        return w + len(poles), (zs, dlogs, poles, w)

    def moment(self, data):
        zs, dlogs, poles, _ = data
        acc = 0j
        for z, dl in zip(zs, dlogs):
            zm = 0.5 * (z[1:] + z[:-1])
            acc += complex(np.sum(zm * dl))
        return acc / (2j * math.pi) + complex(np.sum(self.f.t[poles])) if poles else acc / (2j * math.pi)

    # cut placement

    def _in_sector(self, c, p):
        if c.full:
            return True
        ang = (math.atan2(p.imag, p.real) - c.th1) % TWO_PI
        return ang <= c.th2 - c.th1 + 1e-9 or ang >= TWO_PI - 1e-9

    def _radial_ok(self, c, r):
        near = np.flatnonzero(np.abs(self.pole_mod - r) <= 2 * CIRCLE_MARGIN * r)
        return not any(self._in_sector(c, complex(self.poles[i])) for i in near)

    def _angular_ok(self, c, th):
        for p in self.poles:
            if c.r1 * (1 - 1e-9) < abs(p) < c.r2 * (1 + 1e-9):
                if abs(p) * abs(math.sin(math.atan2(p.imag, p.real) - th)) <= 2 * CIRCLE_MARGIN * abs(p) and math.cos(
                    math.atan2(p.imag, p.real) - th
                ) > 0:
                    return False
        return True

    def split(self, c, attempt):
        """Four children (two if only one cut direction clears the poles), or None."""
        fr0 = [0.5123, 0.382, 0.618, 0.441, 0.559, 0.3, 0.7, 0.25, 0.75][attempt % 9]
        fracs = sorted(CUT_FRACTIONS, key=lambda x: abs(x - fr0))
        d = c.depth + 1
        if c.full:
            for off in fracs:
                th0 = c.th1 + 0.1234 + 0.37 * attempt + off * math.pi / 2
                cuts = [th0 + k * math.pi / 2 for k in range(5)]
                if all(self._angular_ok(c, th) for th in cuts[:4]):
                    return [_Cell(c.r1, c.r2, cuts[k], cuts[k + 1], d) for k in range(4)]
            return None
        rm = next((c.r1 * (c.r2 / c.r1) ** x for x in fracs if self._radial_ok(c, c.r1 * (c.r2 / c.r1) ** x)), None)
        tm = next((c.th1 + x * (c.th2 - c.th1) for x in fracs if self._angular_ok(c, c.th1 + x * (c.th2 - c.th1))),
                  None)
        if rm is None and tm is None:
            return None
        if rm is None:
            return [_Cell(c.r1, c.r2, c.th1, tm, d), _Cell(c.r1, c.r2, tm, c.th2, d)]
        if tm is None:
            return [_Cell(c.r1, rm, c.th1, c.th2, d), _Cell(rm, c.r2, c.th1, c.th2, d)]
        return [
            _Cell(c.r1, rm, c.th1, tm, d), _Cell(c.r1, rm, tm, c.th2, d),
            _Cell(rm, c.r2, c.th1, tm, d), _Cell(rm, c.r2, tm, c.th2, d),
        ]

    def children(self, c, n):
        last = None
        for attempt in range(12):
            kids = self.split(c, attempt)
            if kids is None:
                continue
            try:
                counted = [(k,) + self.count(k) for k in kids]
            except ContourError as exc:
                last = exc
                continue
            if sum(x[1] for x in counted) == n and all(x[1] >= 0 for x in counted):
                return counted
            last = ContourError("child counts do not add up")
        raise last or ContourError("no admissible subdivision")

    # localisation

    def newton(self, z):
        f = self.f
        fz = complex(f(np.array([z]))[0])
        hit = False
        for _ in range(50):
            if abs(fz) < self.tol:
                if hit:
                    break
                hit = True
            d = complex(f.derivative(np.array([z]))[0])
            if d == 0 or not math.isfinite(abs(d)):
                break
            step = fz / d
            lam = 1.0
            while True:
                zn = z - lam * step
                fn = complex(f(np.array([zn]))[0])
                if abs(fn) < abs(fz) or lam < 2 ** -30:
                    break
                lam *= 0.5
            if not abs(fn) < abs(fz):
                break
            z, fz = zn, fn
        return z, abs(fz)

    def locate(self, c, n, data, out):
        if n == 0:
            return
        if n == 1:
            z0 = self.moment(data)
            z, res = self.newton(z0)
            if c.contains(z, slack=1e-9) and res < self.tol:
                out.append((z, 1, res))
                return
            if c.depth >= self.max_depth or c.diameter() < 1e-12 * max(c.r2, 1.0):
                out.append((z if c.contains(z, 1e-9) else z0, 1, res if c.contains(z, 1e-9) else abs(self.f(np.array([z0]))[0])))
                return
        elif c.depth >= self.max_depth or c.diameter() < 1e-12 * max(c.r2, 1.0):
            z0 = self.moment(data) / n
            out.append((z0, n, float(abs(self.f(np.array([z0]))[0]))))
            return
        for kid, m, kdata in self.children(c, n):
            self.locate(kid, m, kdata, out)


def beta_zeros(f, annulus, tol=1e-10, max_points=MAX_POINTS):
    """Zeros of beta in r_in < |z| < r_out, counted and polished."""
    r_in, r_out = (annulus.r_in, annulus.r_out) if isinstance(annulus, Annulus) else annulus
    if r_in <= 0:
        r_in = zero_free_radii(f)[0]
    if not 0 < r_in < r_out < math.inf:
        raise DomainError("need 0 < r_in < r_out < inf")
    for r in (r_in, r_out):
        close = np.abs(np.abs(f.t) - r) <= CIRCLE_MARGIN * r
        if close.any():
            raise DomainError(f"circle |z| = {r} passes within the margin of a pole")
    if f.tail_bound(r_out) > tol:
        raise DomainError("tail bound on the outer circle exceeds the tolerance")
    finder = _ZeroFinder(f, tol, max_points)
    root = _Cell(r_in, r_out, 0.0, TWO_PI)
    n, data = finder.count(root)
    if n < 0:
        raise ContourError("negative zero count")
    found = []
    finder.locate(root, n, data, found)
    found.sort(key=lambda x: (abs(x[0]), math.atan2(x[0].imag, x[0].real)))
    zeros = np.array([x[0] for x in found], dtype=complex)
    return ZeroSet(
        zeros=zeros,
        multiplicities=tuple(int(x[1]) for x in found),
        contour=Annulus(r_in, r_out),
        winding_total=data[3],
        poles_enclosed=len(data[2]),
        polish_residuals=tuple(float(x[2]) for x in found),
    )


def spectrum_from_beta(zs):
    z = np.asarray(zs.zeros if isinstance(zs, ZeroSet) else zs, dtype=complex)
    if np.any(z == 0):
        raise DomainError("zero at the origin has no reciprocal")
    return SpectrumSequence.from_values(1.0 / z, origin="reciprocal zeros of beta")


# the product psi(z) = 2/(2 - z) prod_{n >= 2} (2^n + iz)/(2^n - z)


@dataclass(frozen=True)
class PsiValue:
    value: complex
    rel_tail_bound: float


def _psi_factors(z, last):
    n = np.arange(2, last + 1, dtype=float)
    p = 2.0 ** n
    return (p + 1j * z) / (p - z)


def psi_eval(z, n_factors=60):
    """Truncated product with factors n = 2..n_factors+1 and a bound on the relative error."""
    z = complex(z)
    last = n_factors + 1
    poles = 2.0 ** np.arange(1, last + 1)
    hit = np.flatnonzero(np.abs(poles - z) <= POLE_DISTANCE * poles)
    if len(hit):
        raise PoleError(int(hit[0]) + 1)
    val = 2.0 / (2.0 - z) * complex(np.prod(_psi_factors(z, last)))
    r = abs(z)
    if r < 2.0 ** (last + 1):
        eps = math.sqrt(2) * r * 2.0 ** (-last) / (1 - r * 2.0 ** (-last - 1))
        bound = math.expm1(eps)
    else:
        bound = math.inf
    return PsiValue(val, bound)


def psi_residue_coefficients(n_max, n_factors=None):
    """c_n = -Res_{z=2^n} psi for n = 1..n_max."""
    last = (n_max + 64) if n_factors is None else n_factors + 1
    out = np.empty(n_max, dtype=complex)
    for n in range(1, n_max + 1):
        p = 2.0 ** n
        m = np.arange(2, last + 1)
        m = m[m != n]
        q = 2.0 ** m
        rest = complex(np.prod((q + 1j * p) / (q - p)))
        if n == 1:
            out[0] = 2.0 * rest
        else:
            out[n - 1] = p * (1 + 1j) * (2.0 / (2.0 - p)) * rest
    return out


def psi_meromorphic_sum(n_terms=40, extra=30):
    """beta with kappa = 1 and the residues of psi at 2^n, n = 1..n_terms."""
    c_all = psi_residue_coefficients(n_terms + extra)
    t_all = 2.0 ** np.arange(1, n_terms + extra + 1)
    c, t = c_all[:n_terms], t_all[:n_terms]
    tail = float(np.sum(np.abs(c_all[n_terms:]) / t_all[n_terms:] ** 2))
    # remaining terms: |c_n| <= 2 max|c| and sum_{n > N+extra} 4^-n = 4^-(N+extra)/3
    tail += 2 * float(np.abs(c_all).max()) * 4.0 ** (-(n_terms + extra)) / 3
    poles = SpectrumSequence(t.astype(complex), origin="psi poles 2^n")
    return MeromorphicSum(poles, c, 1.0, tail, float(t_all[n_terms]))


def psi_rank_one_data(n_terms=40):
    """Bounded data with a_n = t_n^(-3/2), b_n = -conj(c_n) t_n^(-1/2), so that w_n = -c_n / t_n^2."""
    from .perturbation import RankOneData

    f = psi_meromorphic_sum(n_terms)
    t = f.t.real
    return RankOneData(f.poles, t ** -1.5, -np.conj(f.residues) * t ** -0.5, 1.0, "bounded")


# radial probes


def _dyadic_blocks(radii, values):
    blocks = {}
    for r, v in zip(radii, values):
        blocks.setdefault(int(math.floor(math.log2(r))), []).append(v)
    return blocks


@dataclass(frozen=True)
class ResolventProbe:
    radii: tuple
    sup_values: tuple
    kept: tuple
    kept_fraction: float | None
    block_fractions: tuple = field(default=())


def resolvent_norm_probe(spectrum, delta, radius_grid, tol=2.0):
    """sup_{|z|=r} |z|^-delta / dist(1/z, {s_n}) for each radius, with s_n = spectrum values.

    On the circle |1/z| = 1/r the distance to s_n is minimised at arg z = -arg s_n,
    so the supremum is r^-delta / min_n |1/r - |s_n||.
    """
    if delta <= 1:
        raise DomainError("delta must exceed 1")
    radii = np.asarray(radius_grid, dtype=float)
    if len(radii) == 0:
        return ResolventProbe((), (), (), None, ())
    mods = np.abs(spectrum.values)
    dist = np.min(np.abs(1.0 / radii[:, None] - mods[None, :]), axis=1)
    with np.errstate(divide="ignore"):
        sup = np.where(dist > 0, radii ** (-delta) / dist, np.inf)
    kept = sup < tol
    blocks = _dyadic_blocks(radii, kept)
    fractions = tuple((j, float(np.mean(v))) for j, v in sorted(blocks.items()))
    return ResolventProbe(
        tuple(radii.tolist()), tuple(sup.tolist()), tuple(bool(k) for k in kept), float(np.mean(kept)), fractions
    )


@dataclass(frozen=True)
class LimstProbe:
    rows: tuple  # (r, value, kept)
    block_maxima: tuple  # (j, max over kept circles in [2^j, 2^(j+1)))
    tau: float


def limst_probe(f, s, radius_grid, tau=None, n_samples=256):
    """max over |z| = r of |z|^s |beta(z)| on circles clear of the discs B(t_n, tau |t_n|)."""
    if tau is None:
        eps = check_lacunary(f.poles).best_epsilon if len(f.poles) > 1 else 1.0
        tau = 0.1 * min(eps, 1.0)
    radii = np.asarray(radius_grid, dtype=float)
    mods = np.abs(f.t)
    theta = (np.arange(n_samples) + 0.5) * TWO_PI / n_samples
    rows, kept_vals = [], []
    for r in radii:
        kept = not np.any(np.abs(mods - r) < tau * mods)
        if kept:
            z = r * np.exp(1j * theta)
            val = float(np.max(r ** s * np.abs(f(z))))
            kept_vals.append((r, val))
        else:
            val = math.nan
        rows.append((float(r), val, bool(kept)))
    blocks = _dyadic_blocks([r for r, _ in kept_vals], [v for _, v in kept_vals])
    maxima = tuple((j, float(max(v))) for j, v in sorted(blocks.items()))
    return LimstProbe(tuple(rows), maxima, float(tau))


@dataclass(frozen=True)
class SectorReport:
    zero_sets: tuple
    outliers: tuple
    ray_angles: tuple
    eps: float


def _arg_distance(z, alpha):
    d = (math.atan2(z.imag, z.real) - alpha + math.pi) % TWO_PI - math.pi
    return abs(d)


def sector_localization_check(f, ray_angles, eps, annuli, tol=1e-10, threads=1):
    """Zeros in each annulus whose argument is farther than eps from every ray."""
    annuli = [a if isinstance(a, Annulus) else Annulus(*a) for a in annuli]
    if threads > 1 and len(annuli) > 1:
        with ThreadPoolExecutor(threads) as pool:
            sets = list(pool.map(lambda a: beta_zeros(f, a, tol), annuli))
    else:
        sets = [beta_zeros(f, a, tol) for a in annuli]
    outliers = [
        complex(z) for zs in sets for z in zs.zeros if all(_arg_distance(z, al) > eps for al in ray_angles)
    ]
    return SectorReport(tuple(sets), tuple(outliers), tuple(ray_angles), eps)
