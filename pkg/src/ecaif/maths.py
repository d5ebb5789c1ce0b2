"""Categorical-distribution primitives.

All functions take and return plain numpy arrays. Logarithms are natural.
"""

import numpy as np

from .errors import (
    AbsoluteContinuityViolation,
    DegenerateDistribution,
    DimensionMismatch,
    InvalidLogit,
    InvalidWeight,
)

MIN_VAL = 1e-16
NORM_TOL = 1e-9


def log_stable(x):
    """Natural log with entries below ``MIN_VAL`` clamped to ``MIN_VAL``."""
    x = np.asarray(x, dtype=float)
    return np.log(np.maximum(x, MIN_VAL))


def is_categorical(p, tol=NORM_TOL):
    p = np.asarray(p, dtype=float)
    return p.ndim == 1 and p.size >= 1 and bool(np.all(p >= 0)) and abs(p.sum() - 1.0) <= tol


def normalize(weights):
    """Rescale non-negative weights so they sum to one.

    >>> normalize([1, 3])
    array([0.25, 0.75])
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DegenerateDistribution("weights must be a non-empty 1-d sequence")
    if np.any(np.isnan(w)) or np.any(w < 0):
        raise InvalidWeight(f"negative or NaN weight in {w.tolist()}")
    total = w.sum()
    if not total > 0 or not np.isfinite(total):
        raise DegenerateDistribution("weights sum to zero (or overflow)")
    return w / total


def softmax(logits, precision=1.0):
    """``exp(precision * logits)`` normalised, with max-subtraction."""
    x = np.asarray(logits, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InvalidLogit("logits must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(x)):
        raise InvalidLogit(f"non-finite logit in {x.tolist()}")
    if not precision > 0:
        raise InvalidLogit(f"precision must be positive, got {precision}")
    z = precision * x
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _check_pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {p.shape} and {q.shape} differ")
    return p, q


def kl_divergence(p, q):
    """KL(p || q) with the convention 0 ln(0/q) = 0."""
    p, q = _check_pair(p, q)
    support = p > 0
    if np.any(q[support] <= 0):
        raise AbsoluteContinuityViolation("p has mass where q is zero")
    kl = np.sum(p[support] * (np.log(p[support]) - np.log(q[support])))
    return max(float(kl), 0.0)


def entropy(p):
    """Shannon entropy with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return max(float(-np.sum(nz * np.log(nz))), 0.0)


def xlogx(p):
    """Elementwise p ln p with 0 ln 0 = 0, for arrays of any shape."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log(p[nz])
    return out


def onehot(index, size):
    v = np.zeros(size)
    v[index] = 1.0
    return v
