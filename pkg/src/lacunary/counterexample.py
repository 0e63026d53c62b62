"""Canonical products with sparse zero sets built block by block.

Given a real positive sequence t_n, each block T_k is a minimal subset of the
octave [t_a/2, 2 t_a] around an anchor t_a such that

    sum_{n in T_k} 1 / |t_n U(t_n) S_T'(t_n)| > 1,

where U is the product over earlier blocks and S_T the product over T_k.  The
final product S = prod_k S_{T_k} then has

    S1 = sum 1/|t_n S'(t_n)| growing by a fixed amount per block, while
    S2 = sum 1/(t_n^2 |S'(t_n)|) stays bounded,

and the coefficients c_n = -1/S'(t_n) assemble into a singular rank-one
perturbation whose determinant is 1/S.  Everything is done with log-magnitudes.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._numerics import csum, floor_exp
from .errors import AnchorUnsuitable, DomainError, InsufficientSparseness, PrecisionWarning
from .perturbation import RankOneData
from .spectra import SpectrumSequence, log_sparseness_product

LOG_HALF = math.log(0.5)
LOG_TWO = math.log(2.0)


def _positive_real(seq):
    if not seq.is_real:
        raise DomainError("sequence must be real")
    t = seq.values.real
    if np.any(t <= 0):
        raise DomainError("sequence must be positive")
    return t


@dataclass(frozen=True)
class CanonicalProduct:
    """S(z) = scale * prod (1 - z/t_n) over real positive zeros."""

    zeros: np.ndarray
    scale: float = 1.0
    indices: tuple = ()

    def __post_init__(self):
        z = np.asarray(self.zeros, dtype=float)
        order = np.argsort(z, kind="stable")
        z = z[order]
        if np.any(z <= 0):
            raise DomainError("zeros must be positive")
        if np.any(np.diff(z) == 0):
            raise DomainError("duplicate zeros")
        idx = tuple(int(i) for i in np.asarray(self.indices, dtype=int)[order]) if len(self.indices) else ()
        z.setflags(write=False)
        object.__setattr__(self, "zeros", z)
        object.__setattr__(self, "indices", idx)

    @classmethod
    def one(cls):
        return cls(np.zeros(0), 1.0, ())

    def __len__(self):
        return len(self.zeros)

    @property
    def at_zero(self):
        return self.scale

    def log_abs(self, x):
        """log|S(x)| for real or complex x (vectorised)."""
        x = np.atleast_1d(np.asarray(x))
        out = np.full(x.shape, math.log(abs(self.scale)))
        for chunk in np.array_split(np.arange(len(self.zeros)), max(1, len(self.zeros) // 256)):
            zc = self.zeros[chunk]
            with np.errstate(divide="ignore"):
                out += np.log(np.abs(1 - x[..., None] / zc)).sum(axis=-1)
        return out

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        logs = np.log(1 - z[..., None] / self.zeros).sum(axis=-1)
        return self.scale * np.exp(logs)

    def log_abs_derivs(self):
        """log|S'(t_n)| and sign(S'(t_n)) at every zero."""
        t = self.zeros
        with np.errstate(divide="ignore"):
            m = np.log(np.abs(1 - t[:, None] / t[None, :]))
        np.fill_diagonal(m, 0.0)
        logs = math.log(abs(self.scale)) - np.log(t) + m.sum(axis=1)
        # 1 - t_n/t_m < 0 exactly for t_m < t_n, and there are n of those
        signs = -np.sign(self.scale) * (-1.0) ** np.arange(len(t))
        return logs, signs

    def derivs(self):
        logs, signs = self.log_abs_derivs()
        return signs * np.exp(logs)

    def times(self, other):
        return CanonicalProduct(
            np.concatenate([self.zeros, other.zeros]),
            self.scale * other.scale,
            self.indices + other.indices,
        )

    def with_linear_factor(self, t1, index):
        """(z - t1) S(z) = -t1 (1 - z/t1) S(z)."""
        return CanonicalProduct(np.append(self.zeros, t1), -t1 * self.scale, self.indices + (index,))


def block_product(seq, T):
    t = _positive_real(seq)
    T = np.asarray(sorted(T), dtype=int)
    if len(T) == 0:
        raise DomainError("block must be nonempty")
    if len(set(T.tolist())) != len(T):
        raise DomainError("duplicate indices")
    return CanonicalProduct(t[T], 1.0, tuple(T.tolist()))


def octave_indices(seq, anchor, exclude=()):
    t = _positive_real(seq)
    ta = t[anchor]
    idx = np.flatnonzero((t >= ta / 2) & (t <= 2 * ta))
    if len(exclude):
        idx = idx[~np.isin(idx, np.fromiter(exclude, dtype=int))]
    return idx


def block_log_contributions(t, T, U):
    """log(1/|t_n U(t_n) S_T'(t_n)|) for n in T."""
    v = t[T]
    lc = -U.log_abs(v) - np.log(v)
    for chunk in np.array_split(np.arange(len(v)), max(1, len(v) // 256)):
        with np.errstate(divide="ignore"):
            m = np.log(np.abs(1 - v[chunk, None] / v[None, :]))
        m[np.arange(len(chunk)), chunk] = 0.0
        lc[chunk] -= m.sum(axis=1)
    # 1/|t S'_T(t)| = 1/prod_{m != n}|1 - t/t_m|; the 1/t_n above cancels the -1/t_n in S'
    return lc + np.log(v)


def zlt_log_sum(t, T, U):
    return float(logsumexp(block_log_contributions(t, T, U)))


@dataclass(frozen=True)
class GreedyBlock:
    indices: np.ndarray
    log_contributions: np.ndarray
    log_sum: float
    octave_size: int


def greedy_block(seq, anchor, U_prev=None, exclude=(0,)):
    """Minimal subset of the anchor's octave whose block sum exceeds 1.

    Starts from the whole octave (minus `exclude`) and repeatedly deletes the
    point with the smallest contribution whose deletion keeps the sum above 1
    (ties to the lower index).  Deleting t_j multiplies every other contribution
    by |1 - t_n/t_j|, so updates are O(size) per step.
    """
    t = _positive_real(seq)
    U = U_prev if U_prev is not None else CanonicalProduct.one()
    T = octave_indices(seq, anchor, exclude)
    if len(T) == 0:
        raise AnchorUnsuitable("octave is empty")
    v = t[T]
    lc = block_log_contributions(t, T, U)
    if logsumexp(lc) <= 0:
        raise AnchorUnsuitable("the full octave does not satisfy the block inequality")
    alive = np.ones(len(T), dtype=bool)
    while alive.sum() > 1:
        idx = np.flatnonzero(alive)
        order = idx[np.lexsort((idx, lc[idx]))]
        removed = False
        for j in order:
            keep = alive.copy()
            keep[j] = False
            with np.errstate(divide="ignore"):
                upd = np.log(np.abs(1 - v[keep] / v[j]))
            new = lc[keep] + upd
            if logsumexp(new) > 0:
                lc[keep] = new
                alive = keep
                removed = True
                break
        if not removed:
            break
    return GreedyBlock(T[alive], lc[alive], float(logsumexp(lc[alive])), len(T))


def removal_log_sums(seq, T, U_prev=None):
    """Block log-sum after deleting each point of T in turn (minimality check)."""
    t = _positive_real(seq)
    U = U_prev if U_prev is not None else CanonicalProduct.one()
    T = np.asarray(T, dtype=int)
    out = np.empty(len(T))
    for i in range(len(T)):
        rest = np.delete(T, i)
        out[i] = zlt_log_sum(t, rest, U) if len(rest) else -math.inf
    return out


def sandwich_log_products(t, blocks):
    """For each block k, log prod_{j > k} |S_{T_j}(t_n)| at every t_n in T_k."""
    out = []
    for k, Tk in enumerate(blocks):
        acc = np.zeros(len(Tk))
        for Tj in blocks[k + 1:]:
            acc += CanonicalProduct(t[Tj]).log_abs(t[Tk])
        out.append(acc)
    return out


def sparseness_trigger(seq, index, n_prev):
    """sparseness_product(index, N_k + 1) < 1/t_index."""
    return log_sparseness_product(seq, index, n_prev + 1) < -math.log(abs(seq.values[index].real))


@dataclass(frozen=True)
class CounterexampleBundle:
    sequence: SpectrumSequence
    blocks: tuple
    anchors: tuple
    S: CanonicalProduct
    residues: np.ndarray  # aligned with S.indices
    log_abs_residues: np.ndarray
    residue_signs: np.ndarray
    a: np.ndarray
    b: np.ndarray
    kappa: float
    S1_increments: tuple
    S2_increments: tuple
    used_tilde: bool
    tilde_terms: tuple = (0.0, 0.0)
    block_log_sums: tuple = ()
    zle_sums: tuple = ()
    sandwich_policy: str = "enforce"
    sandwich_min: tuple = ()
    sandwich_max: tuple = ()
    block_size_proxies: tuple = ()
    viable_anchors: tuple = field(default=())

    @property
    def S1_trace(self):
        return tuple(np.cumsum((self.tilde_terms[0],) + self.S1_increments)[1:].tolist())

    @property
    def S2_trace(self):
        return tuple(np.cumsum((self.tilde_terms[1],) + self.S2_increments)[1:].tolist())

    @property
    def zero_indices(self):
        return self.S.indices

    def anchor_values(self):
        t = self.sequence.values.real
        return tuple(float(t[i]) for i in self.anchors)

    def rank_one_data(self, window=None):
        """Singular data on an index window: a, b from the assembly on Z_S, (0, 1) elsewhere."""
        n = len(self.sequence)
        lo, hi = window if window is not None else (0, n)
        idx = np.arange(lo, hi)
        a = np.zeros(len(idx), dtype=complex)
        b = np.ones(len(idx), dtype=complex)
        pos = {j: k for k, j in enumerate(self.S.indices)}
        for k, j in enumerate(idx):
            if j in pos:
                a[k] = self.a[pos[j]]
                b[k] = self.b[pos[j]]
        seq = SpectrumSequence(self.sequence.values[lo:hi], origin=f"{self.sequence.origin}[{lo}:{hi}]")
        return RankOneData(seq, a, b, self.kappa, "singular")

    def to_json(self):
        return {
            "anchors": [int(i) for i in self.anchors],
            "anchor_values": list(self.anchor_values()),
            "blocks": [[int(i) for i in T] for T in self.blocks],
            "zeros": [float(x) for x in self.S.zeros],
            "zero_indices": [int(i) for i in self.S.indices],
            "S_at_zero": float(self.S.scale),
            "residues_log_abs": [float(x) for x in self.log_abs_residues],
            "residues_sign": [int(s) for s in self.residue_signs],
            "a": [float(x.real) for x in self.a],
            "b": [float(x.real) for x in self.b],
            "kappa": float(self.kappa),
            "S1_trace": list(self.S1_trace),
            "S2_trace": list(self.S2_trace),
            "used_tilde": bool(self.used_tilde),
            "sandwich_policy": self.sandwich_policy,
            "sandwich_min": [float(x) for x in self.sandwich_min],
            "sandwich_max": [float(x) for x in self.sandwich_max],
        }


def _assemble(seq, blocks, anchors, greedy_meta, policy, tilde):
    t = seq.values.real
    S = CanonicalProduct.one()
    for T in blocks:
        S = S.times(CanonicalProduct(t[T], 1.0, tuple(int(i) for i in T)))
    if tilde:
        S = S.with_linear_factor(float(t[0]), 0)
    logs, signs = S.log_abs_derivs()
    zeros = S.zeros
    block_of = {}
    for k, T in enumerate(blocks):
        for j in T:
            block_of[int(j)] = k
    s1 = [[] for _ in blocks]
    s2 = [[] for _ in blocks]
    tilde_terms = [0.0, 0.0]
    for pos, j in enumerate(S.indices):
        l1 = -logs[pos] - math.log(zeros[pos])
        l2 = l1 - math.log(zeros[pos])
        if j in block_of:
            s1[block_of[j]].append(l1)
            s2[block_of[j]].append(l2)
        else:
            tilde_terms = [math.exp(l1), math.exp(l2)]
    inc1 = tuple(float(np.exp(logsumexp(x))) for x in s1)
    inc2 = tuple(float(np.exp(logsumexp(x))) for x in s2)
    log_c = -logs
    sign_c = -signs
    c = sign_c * np.array([floor_exp(x) for x in log_c])
    root = np.sqrt(np.abs(c))
    a = root.astype(complex)
    b = np.where(root > 0, c / np.where(root > 0, root, 1.0), 0.0).astype(complex)
    sandwich = sandwich_log_products(t, blocks)
    smin = tuple(float(np.exp(x.min())) if len(x) else 1.0 for x in sandwich)
    smax = tuple(float(np.exp(x.max())) if len(x) else 1.0 for x in sandwich)
    proxies = []
    for k, T in enumerate(blocks):
        ta = t[anchors[k]]
        prev = np.concatenate([t[B] for B in blocks[:k]]) if k else np.zeros(0)
        proxies.append(float(np.sum(np.log(ta / prev))) if len(prev) else 0.0)
    return CounterexampleBundle(
        sequence=seq,
        blocks=tuple(np.asarray(T, dtype=int) for T in blocks),
        anchors=tuple(int(i) for i in anchors),
        S=S,
        residues=c,
        log_abs_residues=log_c,
        residue_signs=sign_c.astype(int),
        a=a,
        b=b,
        kappa=1.0 / S.scale,
        S1_increments=inc1,
        S2_increments=inc2,
        used_tilde=tilde,
        tilde_terms=tuple(tilde_terms),
        block_log_sums=tuple(m[0] for m in greedy_meta),
        zle_sums=tuple(m[1] for m in greedy_meta),
        sandwich_policy=policy,
        sandwich_min=smin,
        sandwich_max=smax,
        block_size_proxies=tuple(proxies),
    )


def _tilde_needed(inc2, patience):
    run = 0
    for prev, cur in zip(inc2, inc2[1:]):
        run = run + 1 if cur >= prev else 0
        if run >= patience:
            return True
    return False


def build_counterexample(
    seq,
    max_blocks,
    growth=4.0,
    sandwich="enforce",
    force_tilde=False,
    tilde_patience=3,
):
    """Run the block construction over anchors t_{n_k} with t_{n_{k+1}} >= growth * t_{n_k}.

    An anchor is tried only if its octave lies inside the window and its
    sparseness product with exponent N_k + 1 is below 1/t.  With
    sandwich="enforce", an anchor is also rejected until every earlier point
    t_n in T_j satisfies 1/2 <= prod_{later blocks} |S_T(t_n)| <= 2; the search
    over candidate anchors gallops forward and then bisects back to the first
    acceptable one.  With sandwich="report", the first triggered anchor is
    taken and the sandwich products are only recorded.
    """
    if sandwich not in ("enforce", "report"):
        raise DomainError("sandwich must be 'enforce' or 'report'")
    t = _positive_real(seq)
    if len(t) > 1 and np.min(np.diff(t)) <= 0:
        raise DomainError("sequence must be strictly increasing (separated)")
    if max_blocks == 0:
        return _assemble(seq, [], [], [], sandwich, False)
    tmax = t[-1]
    blocks, anchors, meta, viable = [], [], [], []
    U = CanonicalProduct.one()
    used = {0}
    start = 1
    while len(blocks) < max_blocks:
        n_prev = sum(len(T) for T in blocks)
        cands = _candidates(seq, t, start, tmax, n_prev)
        pick = _choose_anchor(seq, t, cands, U, used, blocks, sandwich)
        if pick is None:
            break
        anchor, gb = pick
        blocks.append(gb.indices)
        anchors.append(anchor)
        viable.append(anchor)
        lzle = float(logsumexp(gb.log_contributions - np.log(t[gb.indices])))
        meta.append((gb.log_sum, math.exp(lzle)))
        used.update(int(i) for i in gb.indices)
        U = U.times(CanonicalProduct(t[gb.indices], 1.0, tuple(int(i) for i in gb.indices)))
        nxt = np.searchsorted(t, growth * t[anchor], side="left")
        start = int(nxt)
    if len(blocks) < min(2, max_blocks):
        raise InsufficientSparseness(f"only {len(blocks)} viable anchor(s) in the window")
    bundle = _assemble(seq, blocks, anchors, meta, sandwich, False)
    if force_tilde or _tilde_needed(bundle.S2_increments, tilde_patience):
        bundle = _assemble(seq, blocks, anchors, meta, sandwich, True)
    return bundle


class _Candidates:
    """Lazy list of trigger-passing anchor indices, in increasing order."""

    def __init__(self, seq, t, start, tmax, n_prev):
        self.seq, self.t, self.n_prev = seq, t, n_prev
        self.pos = start
        self.stop = int(np.searchsorted(t, tmax / 2, side="right"))
        self.found = []

    def get(self, i):
        while len(self.found) <= i and self.pos < self.stop:
            if sparseness_trigger(self.seq, self.pos, self.n_prev):
                self.found.append(self.pos)
            self.pos += 1
        return self.found[i] if i < len(self.found) else None


def _candidates(seq, t, start, tmax, n_prev):
    return _Candidates(seq, t, start, tmax, n_prev)


def _try_anchor(seq, t, anchor, U, used, blocks, sandwich):
    try:
        gb = greedy_block(seq, anchor, U, exclude=used)
    except AnchorUnsuitable:
        return None
    if sandwich == "enforce" and blocks:
        logs = sandwich_log_products(t, list(blocks) + [gb.indices])
        for x in logs[:-1]:
            if x.min() < LOG_HALF or x.max() > LOG_TWO:
                return None
    return gb


def _choose_anchor(seq, t, cands, U, used, blocks, sandwich):
    first = cands.get(0)
    if first is None:
        return None
    gb = _try_anchor(seq, t, first, U, used, blocks, sandwich)
    if gb is not None:
        return first, gb
    if sandwich == "report":
        i = 1
        while (a := cands.get(i)) is not None:
            gb = _try_anchor(seq, t, a, U, used, blocks, sandwich)
            if gb is not None:
                return a, gb
            i += 1
        return None
    # gallop over candidate positions, then bisect back to the first success
    lo, step = 0, 1
    hit = None
    while True:
        i = lo + step
        a = cands.get(i)
        if a is None:
            break
        gb = _try_anchor(seq, t, a, U, used, blocks, sandwich)
        if gb is not None:
            hit = (i, a, gb)
            break
        lo, step = i, step * 2
    if hit is None:
        return None
    hi = hit[0]
    best = hit[1:]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        a = cands.get(mid)
        gb = _try_anchor(seq, t, a, U, used, blocks, sandwich)
        if gb is not None:
            hi, best = mid, (a, gb)
        else:
            lo = mid
    return best


@dataclass(frozen=True)
class SumsReport:
    S1_trace: tuple
    S2_trace: tuple
    S1_increments: tuple
    S2_increments: tuple
    S1_diverges_proxy: bool | None
    S2_converges_proxy: bool | None
    S2_constant: float | None
    reason: str = ""


def verify_sums(bundle, min_increment=0.5, constant_slack=4.0):
    """Per-block checks: S1 increments >= min_increment; S2 increments decreasing
    and below C / t_{n_k}, with C fitted on the first block times constant_slack."""
    inc1, inc2 = bundle.S1_increments, bundle.S2_increments
    if len(inc1) < 2:
        return SumsReport(bundle.S1_trace, bundle.S2_trace, inc1, inc2, None, None, None, "insufficient blocks")
    ta = bundle.anchor_values()
    s1 = all(x >= min_increment for x in inc1)
    C = constant_slack * inc2[0] * ta[0]
    dominated = all(x <= C / a for x, a in zip(inc2, ta))
    decreasing = all(b < a for a, b in zip(inc2, inc2[1:]))
    return SumsReport(bundle.S1_trace, bundle.S2_trace, inc1, inc2, s1, dominated and decreasing, C)


@dataclass(frozen=True)
class InterpolationCheck:
    max_residual: float
    residuals: tuple
    rejected: tuple


def interpolation_residual(S, z_samples, min_distance=1e-6):
    """max |1/S(z) - (1/S(0) - sum (1/S'(t_n)) (1/(t_n - z) - 1/t_n))| over the samples."""
    z = np.asarray(z_samples, dtype=complex).ravel()
    t = S.zeros
    d = S.derivs()
    res, rejected = [], []
    for i, zi in enumerate(z):
        if len(t) and np.min(np.abs(t - zi) / t) < min_distance:
            rejected.append(i)
            continue
        lhs = 1.0 / complex(S(np.array([zi]))[0])
        terms = (1.0 / d) * zi / (t * (t - zi))
        rhs = 1.0 / S.scale - csum(terms)
        res.append(abs(lhs - rhs))
    return InterpolationCheck(max(res) if res else 0.0, tuple(res), tuple(rejected))


@dataclass(frozen=True)
class DefectReport:
    dimension: int
    numerical_rank: int
    deficiency: int
    expected: int
    consistent: bool
    cond_estimate: float
    precision_warning: bool


def cauchy_kernel_columns(t_window, abs_b, lambdas, normalize=True):
    """Columns A_w(lam) |b_n| / (t_n - lam), with A_w(z) = prod_window (1 - z/t_j).

    The factor A_w(lam) makes the kernel finite at lam in the window: there
    A_w(lam)/(t_n - lam) = (1/t_n) prod_{j != n} (1 - lam/t_j), which vanishes
    unless t_n = lam.  Magnitudes are accumulated as logs; with normalize=True
    each column is scaled to unit norm before exponentiating.
    """
    t = np.asarray(t_window, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    with np.errstate(divide="ignore"):
        lf = np.log(np.abs(1 - lam[None, :] / t[:, None]))  # (j, lam)
    neg = (1 - lam[None, :] / t[:, None]) < 0
    hit = np.isneginf(lf)
    zeros = hit.sum(axis=0)
    total = np.where(hit, 0.0, lf).sum(axis=0)
    nneg = neg.sum(axis=0)
    # drop factor j = n from the per-lam totals
    logs = total[None, :] - np.where(hit, 0.0, lf)
    alive = (zeros[None, :] - hit) == 0
    sign = np.where((nneg[None, :] - neg) % 2 == 1, -1.0, 1.0)
    logs = logs + np.log(np.asarray(abs_b))[:, None] - np.log(t)[:, None]
    logs = np.where(alive, logs, -np.inf)
    if normalize:
        top = logs.max(axis=0)
        logs = logs - np.where(np.isfinite(top), top, 0.0)[None, :]
    V = sign * np.exp(logs)
    if normalize:
        nrm = np.linalg.norm(V, axis=0)
        V = V / np.where(nrm > 0, nrm, 1.0)
    return V


def defect_rank(bundle, window=None, tol=1e-8):
    """Rank of the kernels at window points outside Z_S, inside the window's coordinate space."""
    zi = np.asarray(bundle.S.indices, dtype=int)
    if window is None:
        if len(zi) == 0:
            raise DomainError("empty bundle needs an explicit window")
        window = (int(zi.min()), int(zi.max()) + 1)
    lo, hi = window
    if not 0 <= lo < hi <= len(bundle.sequence):
        raise DomainError("window outside the sequence")
    data = bundle.rank_one_data((lo, hi))
    t = data.t.real
    abs_b = np.abs(data.b)
    if np.any(abs_b == 0):
        raise DomainError("b must be nonzero on the window")
    in_s = np.isin(np.arange(lo, hi), zi)
    lambdas = t[~in_s]
    d = hi - lo
    if len(lambdas) == 0:
        return DefectReport(d, 0, d, int(in_s.sum()), True, 1.0, False)
    V = cauchy_kernel_columns(t, abs_b, lambdas)
    sv = np.linalg.svd(V, compute_uv=False)
    rank = int(np.count_nonzero(sv > tol * sv[0]))
    cond = float(sv[0] / sv[rank - 1]) if rank else math.inf
    warn = cond > 1e12
    if warn:
        warnings.warn(f"kernel Gram matrix badly conditioned ({cond:.3g})", PrecisionWarning)
    deficiency = d - rank
    expected = int(in_s.sum())
    return DefectReport(d, rank, deficiency, expected, deficiency >= expected, cond, bool(warn))


def minimality_margins(bundle):
    """For each block, (log-sum of the block, max log-sum after deleting one point)."""
    t = bundle.sequence
    out = []
    U = CanonicalProduct.one()
    vals = bundle.sequence.values.real
    for T in bundle.blocks:
        after = removal_log_sums(t, T, U)
        out.append((zlt_log_sum(vals, T, U), float(after.max())))
        U = U.times(CanonicalProduct(vals[T], 1.0, tuple(int(i) for i in T)))
    return out
