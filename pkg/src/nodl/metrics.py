"""Reconstruction quality measures: Pearson, Spearman and per-dimension MSE."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class MetricRecord:
    pearson: float
    spearman: float
    mse: float
    n_samples: int

    def to_dict(self):
        return asdict(self)


def _pair(x, xhat, min_len=1):
    x = np.asarray(x, dtype=float).ravel()
    xhat = np.asarray(xhat, dtype=float).ravel()
    if x.shape != xhat.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {xhat.shape[0]}")
    if x.size < min_len:
        raise ValueError(f"need at least {min_len} entries")
    return x, xhat


def _corr(a, b) -> float:
    a = a - a.mean()
    b = b - b.mean()
    sa = np.sqrt(a @ a)
    sb = np.sqrt(b @ b)
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(np.clip((a @ b) / (sa * sb), -1.0, 1.0))


def pearson(x, xhat) -> float:
    """Sample Pearson correlation; 0 when either side has zero variance."""
    return _corr(*_pair(x, xhat, 2))


def spearman(x, xhat) -> float:
    """Pearson correlation of average-tie ranks."""
    x, xhat = _pair(x, xhat, 2)
    return _corr(rankdata(x), rankdata(xhat))


def mse(x, xhat) -> float:
    """Mean over dimensions of the squared error."""
    x, xhat = _pair(x, xhat)
    d = x - xhat
    val = float(d @ d) / x.size
    if val == 0.0 and np.any(d != 0.0):
        # squares of tiny differences underflow; keep "zero only when equal"
        return float(np.nextafter(0.0, 1.0))
    return val


def batch_pearson(X, Xhat) -> float:
    return float(np.mean([pearson(x, xh) for x, xh in zip(X, Xhat)])) if len(X) else 0.0


def evaluate(X, Xhat) -> MetricRecord:
    """Average each metric over the rows of ``X`` and ``Xhat``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xhat = np.atleast_2d(np.asarray(Xhat, dtype=float))
    if X.shape != Xhat.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Xhat.shape}")
    n = X.shape[0]
    if n == 0:
        return MetricRecord(0.0, 0.0, 0.0, 0)
    p = [pearson(a, b) for a, b in zip(X, Xhat)]
    s = [spearman(a, b) for a, b in zip(X, Xhat)]
    e = [mse(a, b) for a, b in zip(X, Xhat)]
    return MetricRecord(float(np.mean(p)), float(np.mean(s)), float(np.mean(e)), n)
