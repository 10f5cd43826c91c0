"""Proximal building blocks shared by the coders and the dictionary update.

Everything here is a pure function of numpy vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_SEARCH_ITERS = 64


class SearchError(RuntimeError):
    """Raised when the lambda bisection reaches a state it cannot be in."""


@dataclass(frozen=True)
class SparsityTarget:
    """Desired non-zero count and the bisection tolerances used to hit it."""

    beta: int
    eps_beta: int = 0
    eps_lambda: float = 1e-3

    def __post_init__(self):
        if self.beta < 0 or self.eps_beta < 0:
            raise ValueError("beta and eps_beta must be non-negative")
        if not 0.0 < self.eps_lambda < 1.0:
            raise ValueError("eps_lambda must lie in (0, 1)")


def _as_finite(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("input contains non-finite entries")
    return u


def prox_l1(u, lam: float) -> np.ndarray:
    """Soft-threshold: sign(u) * max(|u| - lam, 0)."""
    u = _as_finite(u)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return np.sign(u) * np.maximum(np.abs(u) - lam, 0.0)


def nnz_after_threshold(abs_u: np.ndarray, lam: float) -> int:
    return int(np.count_nonzero(abs_u > lam))


@dataclass(frozen=True)
class SearchResult:
    lam: float
    count: int
    stop: str  # "count", "width", "cap" or "trivial"
    iterations: int


def search_lambda(u, target: SparsityTarget) -> SearchResult:
    """Bisect the soft-threshold level until about ``target.beta`` entries survive.

    The midpoint of ``[0, max|u|]`` is probed; the search stops when the
    surviving count is within ``eps_beta`` of ``beta`` or when the interval
    width relative to its upper end drops below ``eps_lambda``. The last
    midpoint is returned either way. If neither rule fires within
    ``MAX_SEARCH_ITERS`` probes (only possible when ``beta`` exceeds the number
    of non-zero entries) the last midpoint is returned with ``stop="cap"``.

    Two degenerate inputs short-circuit: an all-zero ``u`` gives 0, and
    ``beta == 0`` gives ``max|u|``, the smallest level that zeroes everything
    and which a midpoint never reaches.
    """
    abs_u = np.abs(_as_finite(u))
    if target.beta > abs_u.size:
        raise ValueError(f"target beta={target.beta} exceeds vector length {abs_u.size}")
    lam_max = float(abs_u.max()) if abs_u.size else 0.0
    if lam_max == 0.0:
        return SearchResult(0.0, 0, "trivial", 0)
    if target.beta == 0:
        return SearchResult(lam_max, 0, "trivial", 0)

    lam_min = 0.0
    for it in range(1, MAX_SEARCH_ITERS + 1):
        lam = 0.5 * (lam_min + lam_max)
        count = nnz_after_threshold(abs_u, lam)
        if abs(count - target.beta) <= target.eps_beta:
            return SearchResult(lam, count, "count", it)
        if (lam_max - lam_min) / lam_max < target.eps_lambda:
            return SearchResult(lam, count, "width", it)
        if count > target.beta:
            lam_min = lam
        elif count < target.beta:
            lam_max = lam
        else:
            raise SearchError(f"count {count} equals beta but stopping rule did not fire")
    return SearchResult(lam, count, "cap", MAX_SEARCH_ITERS)


def binary_search_lambda(u, target: SparsityTarget) -> float:
    """Threshold level leaving about ``target.beta`` non-zeros; see :func:`search_lambda`."""
    return search_lambda(u, target).lam


def sparsify(u, target: SparsityTarget) -> np.ndarray:
    """Soft-threshold ``u`` at the level found by :func:`binary_search_lambda`."""
    return prox_l1(u, binary_search_lambda(u, target))


def group_shrink(v, lambda_g: float) -> np.ndarray:
    """Block soft-threshold: scale ``v`` by max(1 - lambda_g/||v||, 0)."""
    v = _as_finite(v)
    if not 0.0 <= lambda_g <= 1.0:
        raise ValueError("lambda_g must lie in [0, 1]")
    if lambda_g == 0.0:
        return v.copy()
    norm = np.linalg.norm(v)
    if norm <= lambda_g:
        return np.zeros_like(v)
    return v * (1.0 - lambda_g / norm)


def normalize_column(w) -> np.ndarray:
    """Project onto the unit l2 ball."""
    w = _as_finite(w)
    norm = np.linalg.norm(w)
    if norm <= 1.0:
        return w.copy()
    return w / norm
