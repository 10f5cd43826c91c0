"""Per-sample LASSO coding and the outer search that tunes lambda_c to a target sparsity.

The solver is cyclic coordinate descent on the Gram matrix ("covariance
updates"): with ``G = D^T D`` and ``c = D^T x`` the residual correlation
``r = c - G a`` is kept current, so each coordinate step costs O(k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .numerics import MAX_SEARCH_ITERS, SparsityTarget

CD_TOL = 1e-8
CD_MAX_SWEEPS = 10_000


@dataclass
class Code:
    alpha: np.ndarray
    lambda_c: float

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.alpha))


@numba.njit(cache=True)
def _cd_lasso(G, c, lam, alpha, tol, max_sweeps):
    k = G.shape[0]
    r = c - G @ alpha
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(k):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = alpha[j]
            z = r[j] + gjj * old
            if z > lam:
                new = (z - lam) / gjj
            elif z < -lam:
                new = (z + lam) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                alpha[j] = new
                for i in range(k):
                    r[i] -= G[i, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol:
            return sweep + 1
    return max_sweeps


def _check_dims(D, x):
    D = np.asarray(D, dtype=float)
    x = np.asarray(x, dtype=float)
    if D.ndim != 2 or x.ndim != 1 or D.shape[0] != x.shape[0]:
        raise ValueError(f"dimension mismatch: D {D.shape} vs x {x.shape}")
    return D, x


def lasso_gram(G, c, lam, alpha0=None, tol=CD_TOL, max_sweeps=CD_MAX_SWEEPS) -> np.ndarray:
    """Solve min_a 0.5 a^T G a - c^T a + lam ||a||_1 by coordinate descent."""
    if lam < 0:
        raise ValueError("lambda_c must be non-negative")
    alpha = np.zeros(G.shape[0]) if alpha0 is None else np.array(alpha0, dtype=float)
    if G.shape[0]:
        _cd_lasso(np.ascontiguousarray(G), np.ascontiguousarray(c, dtype=float), float(lam), alpha, tol, max_sweeps)
    return alpha


def _coding_scales(D, normalize):
    # per-column divisor used for coding; zero columns keep scale 1 and code 0
    if not normalize:
        return None
    norms = np.linalg.norm(D, axis=0)
    return np.where(norms > 0, norms, 1.0)


class Coder:
    """Encodes samples against one fixed dictionary snapshot.

    Precomputes the Gram matrix once so a whole batch reuses it. With
    ``normalize=True`` every non-zero column is rescaled to unit norm for the
    solve and coefficients are mapped back to the stored scale.
    """

    def __init__(self, D, normalize: bool = False):
        self.D = np.asarray(D, dtype=float)
        self.scales = _coding_scales(self.D, normalize)
        Dn = self.D if self.scales is None else self.D / self.scales
        self.Dn = Dn
        self.G = Dn.T @ Dn

    @property
    def k(self) -> int:
        return self.D.shape[1]

    def _finish(self, alpha, lam):
        if self.scales is not None:
            alpha = alpha / self.scales
        return Code(alpha, lam)

    def _corr(self, x):
        if x.shape[0] != self.D.shape[0]:
            raise ValueError(f"dimension mismatch: D {self.D.shape} vs x {x.shape}")
        return self.Dn.T @ x

    def lasso(self, x, lambda_c: float) -> Code:
        x = np.asarray(x, dtype=float)
        return self._finish(lasso_gram(self.G, self._corr(x), lambda_c), lambda_c)

    def encode(self, x, target: SparsityTarget) -> Code:
        """Bisect lambda_c on [0, ||D^T x||_inf] so the code has about ``target.beta`` non-zeros.

        Each probe is a full LASSO solve warm-started from the previous probe.
        Stopping rules are the ones of :func:`nodl.numerics.search_lambda`;
        the probe with nnz closest to the target is returned (latest wins ties).
        If the target is at least the column count, lambda_c = 0 is used.
        """
        x = np.asarray(x, dtype=float)
        c = self._corr(x)
        k = self.k
        lam_max = float(np.max(np.abs(c))) if k else 0.0
        if lam_max == 0.0 or target.beta == 0:
            return self._finish(np.zeros(k), lam_max)
        if target.beta >= k:
            return self._finish(lasso_gram(self.G, c, 0.0), 0.0)

        lam_min = 0.0
        alpha = np.zeros(k)
        best, best_gap, best_lam = alpha, abs(target.beta), lam_max
        for _ in range(MAX_SEARCH_ITERS):
            lam = 0.5 * (lam_min + lam_max)
            alpha = lasso_gram(self.G, c, lam, alpha0=alpha)
            count = int(np.count_nonzero(alpha))
            gap = abs(count - target.beta)
            if gap <= best_gap:
                best, best_gap, best_lam = alpha, gap, lam
            if gap <= target.eps_beta or (lam_max - lam_min) / lam_max < target.eps_lambda:
                break
            if count > target.beta:
                lam_min = lam
            else:
                lam_max = lam
        return self._finish(best.copy(), best_lam)

    def encode_batch(self, X, target: SparsityTarget) -> np.ndarray:
        """Codes for the rows of ``X`` stacked as an (n, k) array."""
        X = np.asarray(X, dtype=float)
        out = np.zeros((X.shape[0], self.k))
        for i, x in enumerate(X):
            out[i] = self.encode(x, target).alpha
        return out


def lasso(D, x, lambda_c: float, normalize: bool = False) -> Code:
    """LASSO code of ``x`` in ``D`` at fixed ``lambda_c``."""
    D, x = _check_dims(D, x)
    return Coder(D, normalize).lasso(x, lambda_c)


def encode_target_nnz(D, x, target: SparsityTarget, normalize: bool = False) -> Code:
    """LASSO code of ``x`` in ``D`` with lambda_c tuned to ``target.beta`` non-zeros."""
    D, x = _check_dims(D, x)
    return Coder(D, normalize).encode(x, target)


def reconstruct(D, alpha) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if D.ndim != 2 or alpha.shape != (D.shape[1],):
        raise ValueError(f"dimension mismatch: D {D.shape} vs alpha {alpha.shape}")
    return D @ alpha


def lasso_objective(D, x, alpha, lambda_c: float) -> float:
    r = np.asarray(x) - np.asarray(D) @ alpha
    return 0.5 * float(r @ r) + lambda_c * float(np.abs(alpha).sum())
