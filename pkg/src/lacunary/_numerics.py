"""Small numerical helpers: compensated sums and log-space products."""

import math

import numpy as np
from scipy.special import logsumexp

LOG_FLOOR = -700.0


def neumaier_sum(terms, axis=-1):
    """Compensated sum along one axis.

    Small batches (at most four columns) go through math.fsum, which is exactly
    rounded; larger ones use error-free TwoSum accumulation in index order.  Both
    paths are deterministic for a given input shape.
    """
    terms = np.moveaxis(np.asarray(terms), axis, 0)
    if terms.shape[0] == 0:
        return np.zeros(terms.shape[1:], dtype=terms.dtype)
    if terms.ndim == 2 and terms.shape[1] <= 4:
        return _fsum_columns(terms)
    if np.iscomplexobj(terms):
        return _twosum_real(terms.real) + 1j * _twosum_real(terms.imag)
    return _twosum_real(terms)


def _fsum_columns(terms):
    out = np.empty(terms.shape[1], dtype=terms.dtype)
    for j in range(terms.shape[1]):
        col = terms[:, j]
        if np.iscomplexobj(col):
            out[j] = complex(math.fsum(col.real), math.fsum(col.imag))
        else:
            out[j] = math.fsum(col)
    return out


def _twosum_real(terms):
    s = np.array(terms[0], dtype=float, copy=True)
    comp = np.zeros_like(s)
    for x in terms[1:]:
        t = s + x
        bp = t - s
        comp += (s - (t - bp)) + (x - bp)
        s = t
    return s + comp


def csum(values):
    """Compensated sum of a 1-d sequence, returning a Python scalar."""
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return math.fsum(values)


def log_abs_sum(log_terms):
    """log of a sum of positive numbers given by their logs."""
    log_terms = np.asarray(log_terms, dtype=float)
    if log_terms.size == 0:
        return -math.inf
    return float(logsumexp(log_terms))


def floor_exp(log_value):
    """exp with an underflow floor: anything below exp(LOG_FLOOR) is returned as 0."""
    if log_value < LOG_FLOOR:
        return 0.0
    return math.exp(log_value)


def tail_ratio(abs_terms):
    """Share of the absolute sum contributed by the last quarter of the terms."""
    abs_terms = np.asarray(abs_terms, dtype=float)
    total = math.fsum(abs_terms)
    if total == 0.0:
        return 0.0
    n = len(abs_terms)
    start = n - max(1, n // 4)
    return math.fsum(abs_terms[start:]) / total


def fmt(x):
    """Fixed 17-significant-digit float formatting used in every report."""
    return format(float(x), ".17g")
