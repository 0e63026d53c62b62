"""Rank-one perturbations of a diagonal operator.

Two flavours share one data type:

* ``kind="bounded"``: L = diag(s_n) + a b*, with s_n = 1/t_n.  The determinant is
  beta(z) = 1 + sum c_n (1/(t_n - z) - 1/t_n) with c_n = -t_n^2 w_n and
  w_n = a_n conj(b_n).
* ``kind="singular"``: the unbounded operator with eigenvalues t_n perturbed by
  the triple (a, b, kappa).  Its determinant is
  kappa + sum c_n (1/(t_n - z) - 1/t_n) with c_n = t_n^2 w_n / |t_n|^2.

Zeros of beta are the reciprocals of the nonzero eigenvalues of L (bounded) or
the eigenvalues themselves (singular).
"""

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._numerics import csum, tail_ratio
from .errors import DomainError, PrecisionWarning
from .spectra import SpectrumSequence

MOMENT_TOL = 1e-8
CONVERGENCE_TAIL_RATIO = 1e-2
RANK_TOL = 1e-8


@dataclass(frozen=True)
class RankOneData:
    spectrum: SpectrumSequence
    a: np.ndarray
    b: np.ndarray
    kappa: complex = 1.0
    kind: str = "bounded"
    a_in_H: bool = False

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex).copy()
        b = np.asarray(self.b, dtype=complex).copy()
        n = len(self.spectrum)
        if a.shape != (n,) or b.shape != (n,):
            raise DomainError("a and b must align with the spectrum")
        if self.kind not in ("bounded", "singular"):
            raise DomainError(f"unknown kind {self.kind!r}")
        kappa = complex(self.kappa)
        if self.kind == "bounded" and kappa != 1:
            raise DomainError("bounded perturbations have kappa = 1")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "kappa", kappa)
        if self.kind == "singular" and self.a_in_H:
            pairing = csum(a * np.conj(b) / self.t)
            if abs(kappa - pairing) <= 1e-12 * max(1.0, abs(kappa)):
                raise DomainError("condition (A) fails: kappa equals <A^-1 a, b>")

    @property
    def t(self):
        return self.spectrum.values

    @property
    def s(self):
        return 1.0 / self.spectrum.values

    @property
    def weights(self):
        """w_n = a_n conj(b_n)."""
        return self.a * np.conj(self.b)

    @property
    def residues(self):
        t = self.t
        if self.kind == "bounded":
            return -(t ** 2) * self.weights
        return self.weights * t / np.conj(t)

    def __len__(self):
        return len(self.spectrum)

    def truncate(self, N):
        if not 1 <= N <= len(self):
            raise DomainError("truncation outside the window")
        return RankOneData(
            self.spectrum.window(0, N), self.a[:N], self.b[:N], self.kappa, self.kind, self.a_in_H
        )

    @classmethod
    def from_weights(cls, spectrum, weights, kind="bounded", kappa=1.0):
        """Data with a_n = |w_n|^(1/2), b_n = conj(w_n)/|w_n|^(1/2) (b_n = 1 where w_n = 0)."""
        w = np.asarray(weights, dtype=complex)
        mag = np.sqrt(np.abs(w))
        a = mag.astype(complex)
        b = np.where(mag > 0, np.conj(w) / np.where(mag > 0, mag, 1.0), 1.0)
        return cls(spectrum, a, b, kappa, kind)

    def to_json(self):
        pair = lambda z: [float(z.real), float(z.imag)]  # noqa: E731
        return {
            "t": [pair(z) for z in self.t],
            "a": [pair(z) for z in self.a],
            "b": [pair(z) for z in self.b],
            "kappa": pair(self.kappa),
            "kind": self.kind,
        }

    @classmethod
    def from_json(cls, doc):
        cx = lambda p: complex(p[0], p[1])  # noqa: E731
        t = np.array([cx(p) for p in doc["t"]])
        order = np.argsort(np.abs(t), kind="stable")
        a = np.array([cx(p) for p in doc["a"]])[order]
        b = np.array([cx(p) for p in doc["b"]])[order]
        return cls(
            SpectrumSequence(t[order], origin="json"), a, b, cx(doc.get("kappa", [1, 0])),
            doc.get("kind", "bounded"),
        )


@dataclass(frozen=True)
class MomentReport:
    k: int
    partial_sum: complex
    abs_partial_sum: float
    converges_absolutely: bool
    satisfied: bool
    target: complex = 0.0
    tail_ratio: float = 0.0


def moment_target(data, k):
    if data.kind == "bounded":
        if k < 1:
            raise DomainError("bounded moments start at k = 1")
        return -1.0 if k == 1 else 0.0
    if k < -1:
        raise DomainError("singular moments start at k = -1")
    return data.kappa if k == -1 else 0.0


def moment_sum(data, k, n_trunc=None, tol=MOMENT_TOL, finite=False):
    """Partial sum of t_n^k w_n over the first n_trunc terms, compared with its target.

    With finite=True the window is taken to be the whole series, so the sum
    converges absolutely by definition and the tail-ratio proxy is skipped.
    """
    n_trunc = len(data) if n_trunc is None else n_trunc
    if not 1 <= n_trunc <= len(data):
        raise DomainError("n_trunc outside the window")
    t = data.t[:n_trunc]
    terms = t ** k * data.weights[:n_trunc]
    total = csum(terms)
    abs_terms = np.abs(terms)
    ratio = tail_ratio(abs_terms)
    target = moment_target(data, k)
    return MomentReport(
        k=k,
        partial_sum=total,
        abs_partial_sum=math.fsum(abs_terms),
        converges_absolutely=finite or ratio < CONVERGENCE_TAIL_RATIO,
        satisfied=abs(total - target) <= tol * (1 + abs(target)),
        target=target,
        tail_ratio=ratio,
    )


@dataclass(frozen=True)
class MomentCheck:
    reports: list
    first_failing: int | None

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)

    def __getitem__(self, i):
        return self.reports[i]


def moment_equalities_check(data, k_max, tol=MOMENT_TOL, finite=False):
    """Moment reports for the first k_max equations.

    first_failing is the smallest index whose series passes the convergence
    proxy but misses its target.
    """
    if k_max < 1:
        raise DomainError("k_max must be positive")
    k0 = 1 if data.kind == "bounded" else -1
    reports = [moment_sum(data, k, tol=tol, finite=finite) for k in range(k0, k0 + k_max)]
    first = next((r.k for r in reports if r.converges_absolutely and not r.satisfied), None)
    return MomentCheck(reports, first)


def build_truncated_matrix(data, N=None):
    """L[i, j] = s_i delta_ij + a_i conj(b_j) for the leading N x N block."""
    if data.kind != "bounded":
        raise DomainError("convert singular data with singular_to_bounded first")
    N = len(data) if N is None else N
    if not 1 <= N <= len(data):
        raise DomainError("N outside the window")
    L = np.outer(data.a[:N], np.conj(data.b[:N]))
    L[np.diag_indices(N)] += data.s[:N]
    return L


@dataclass(frozen=True)
class KernelChain:
    dims: list
    cond_estimate: float
    precision_warning: bool
    thresholds: list = field(default_factory=list)


def kernel_chain_dims(L, j_max, tol=RANK_TOL):
    """dim ker (L*)^j for j = 1..j_max by pivoted QR with threshold tol * ||L||^j."""
    L = np.asarray(L, dtype=complex)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise DomainError("L must be square")
    n = L.shape[0]
    sv = scipy.linalg.svdvals(L)
    norm = float(sv[0]) if n else 0.0
    above = sv[sv > tol * norm]
    cond = float(above[0] / above[-1]) if len(above) else 1.0
    warn = j_max * math.log10(max(cond, 1.0)) > -math.log10(tol)
    if warn:
        warnings.warn(f"kernel chain near precision limit (cond ~ {cond:.3g})", PrecisionWarning)
    Ls = L.conj().T
    P = np.eye(n, dtype=complex)
    dims, thresholds = [], []
    for j in range(1, j_max + 1):
        P = P @ Ls
        thr = tol * norm ** j
        if n == 0:
            rank = 0
        else:
            R = scipy.linalg.qr(P, mode="r", pivoting=True)[0]
            rank = int(np.count_nonzero(np.abs(np.diag(R)) > thr))
        dims.append(n - rank)
        thresholds.append(thr)
    return KernelChain(dims, cond, bool(warn), thresholds)


def singular_to_bounded(data):
    """Bounded data for L0 = A0 - kappa^-1 (A0 a)(A0 b)*, with A0 = diag(1/t_n).

    Output weights are -w_n / (kappa |t_n|^2).
    """
    if data.kind != "singular":
        raise DomainError("input must be singular data")
    if data.kappa == 0:
        raise DomainError("kappa = 0 cannot be inverted")
    s = data.s
    a0 = -(s * data.a) / data.kappa
    b0 = s * data.b
    return RankOneData(data.spectrum, a0, b0, 1.0, "bounded")


class Degeneracy(enum.Enum):
    DEGENERATE = "degenerate"
    NONDEGENERATE = "nondegenerate"


def degeneracy_check(data, tol=1e-14):
    if np.all(np.abs(data.weights) < tol) and abs(data.kappa) < tol:
        return Degeneracy.DEGENERATE
    return Degeneracy.NONDEGENERATE
