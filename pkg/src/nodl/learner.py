"""Online dictionary learning with conditional birth and group-sparsity death of elements.

One call to :func:`process_batch` runs a full iteration: code the batch, maybe
add random elements and re-code, accumulate the memory matrices, update the
dictionary by block-coordinate descent, then deal with zero-norm columns.
The fixed-size baseline and the add-only / delete-only ablations are the same
loop with some of those steps switched off by :class:`LearnerConfig`.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import numerics
from .metrics import batch_pearson, evaluate
from .numerics import SparsityTarget
from .sparse_coding import Coder

log = logging.getLogger(__name__)

# tight enough that freshly drawn columns get exactly beta_d non-zeros
INIT_EPS_LAMBDA = 1e-12


class Variant(str, enum.Enum):
    ODL = "ODL"
    ODL_STAR = "ODL_STAR"
    NODL = "NODL"
    NODL_PLUS = "NODL_PLUS"
    NODL_MINUS = "NODL_MINUS"

    @property
    def births(self) -> bool:
        return self in (Variant.NODL, Variant.NODL_PLUS)

    @property
    def deaths(self) -> bool:
        return self in (Variant.NODL, Variant.NODL_MINUS)


@dataclass
class LearnerConfig:
    variant: Variant = Variant.NODL
    k_init: int = 200
    gamma: float = 0.9
    c_k: int = 50
    lambda_g: float = 0.03
    beta_c: int = 50
    beta_d: int | None = 50  # None: dense elements, no sparsification step
    batch_size: int = 20
    bcd_tol: float = 1e-6
    bcd_max_sweeps: int = 100
    normalize_for_coding: bool = True
    # False: lambda_j is tuned in the first sweep of an update and then held fixed
    retune_each_sweep: bool = False
    eps_beta: int = 0
    eps_lambda: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        self.variant = Variant(self.variant)

    def validate(self, m: int | None = None):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.lambda_g <= 1.0:
            raise ValueError("lambda_g must lie in [0, 1]")
        if self.c_k < 0 or self.k_init < 0 or self.beta_c < 0:
            raise ValueError("c_k, k_init and beta_c must be non-negative")
        if self.batch_size < 1 or self.bcd_max_sweeps < 1:
            raise ValueError("batch_size and bcd_max_sweeps must be positive")
        if self.beta_d is not None:
            if self.beta_d < 1:
                raise ValueError("beta_d must be positive or null")
            if m is not None and self.beta_d > m:
                raise ValueError(f"beta_d={self.beta_d} exceeds input dimension m={m}")

    def effective(self) -> LearnerConfig:
        """Copy with the parameters the variant disables forced to zero."""
        cfg = replace(self)
        if not self.variant.births:
            cfg.c_k = 0
        if not self.variant.deaths:
            cfg.lambda_g = 0.0
        return cfg

    @property
    def code_target(self) -> SparsityTarget:
        return SparsityTarget(self.beta_c, self.eps_beta, self.eps_lambda)

    @property
    def element_target(self) -> SparsityTarget | None:
        if self.beta_d is None:
            return None
        return SparsityTarget(self.beta_d, self.eps_beta, self.eps_lambda)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d


@dataclass
class Dictionary:
    D: np.ndarray  # (m, k)
    ages: np.ndarray  # batch index at which each column was created

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def k(self) -> int:
        return self.D.shape[1]


@dataclass
class Memory:
    A: np.ndarray  # (k, k), sum of alpha alpha^T
    B: np.ndarray  # (m, k), sum of x alpha^T

    @classmethod
    def empty(cls, m, k):
        return cls(np.zeros((k, k)), np.zeros((m, k)))


@dataclass
class CodeLog:
    """Every (sample, code) pair fed to the memory, kept column-aligned with the dictionary."""

    X: list = field(default_factory=list)
    codes: list = field(default_factory=list)

    def append(self, x, alpha):
        self.X.append(np.array(x, dtype=float))
        self.codes.append(np.array(alpha, dtype=float))

    def pad(self, n):
        self.codes = [np.concatenate([c, np.zeros(n)]) for c in self.codes]

    def keep(self, idx):
        self.codes = [c[idx] for c in self.codes]

    def zero(self, idx):
        for c in self.codes:
            c[idx] = 0.0

    def reaccumulate(self, m, k) -> Memory:
        """Row-by-row rebuild of A and B from the log."""
        A = np.zeros((k, k))
        B = np.zeros((m, k))
        for x, a in zip(self.X, self.codes):
            for p in np.flatnonzero(a):
                A[p, :] += a[p] * a
                B[:, p] += x * a[p]
        return Memory(A, B)


@dataclass
class LearnerState:
    dictionary: Dictionary
    memory: Memory
    config: LearnerConfig
    rng: np.random.Generator
    batches_seen: int = 0
    code_log: CodeLog | None = None

    @classmethod
    def create(cls, config: LearnerConfig, m: int, keep_log: bool = False) -> LearnerState:
        config.validate(m)
        rng = np.random.default_rng(config.seed)
        D = random_columns(rng, m, config.k_init, config.beta_d)
        return cls(
            dictionary=Dictionary(D, np.zeros(config.k_init, dtype=int)),
            memory=Memory.empty(m, config.k_init),
            config=config.effective(),
            rng=rng,
            code_log=CodeLog() if keep_log else None,
        )

    def check(self):
        k = self.dictionary.k
        assert self.memory.A.shape == (k, k)
        assert self.memory.B.shape == (self.dictionary.m, k)
        assert self.dictionary.ages.shape == (k,)


@dataclass
class BatchMetrics:
    batch: int
    n_samples: int
    k_before: int
    k: int
    p_c_pre: float
    p_c_post: float
    k_n: int
    killed: int
    mse: float
    pearson: float
    spearman: float
    sweeps: int
    empty: bool = False

    def to_dict(self):
        return asdict(self)


def random_columns(rng: np.random.Generator, m: int, n: int, beta_d: int | None) -> np.ndarray:
    """``n`` unit-norm columns: standard normal draws, soft-thresholded to ``beta_d`` non-zeros."""
    W = rng.standard_normal((m, n))
    if beta_d is not None:
        target = SparsityTarget(beta_d, 0, INIT_EPS_LAMBDA)
        for j in range(n):
            W[:, j] = numerics.sparsify(W[:, j], target)
    norms = np.linalg.norm(W, axis=0)
    return W / np.where(norms > 0, norms, 1.0)


def init_dictionary(m: int, k: int, beta_d: int | None, seed: int) -> Dictionary:
    if k < 0:
        raise ValueError("k must be non-negative")
    if beta_d is not None and beta_d > m:
        raise ValueError(f"beta_d={beta_d} exceeds m={m}")
    D = random_columns(np.random.default_rng(seed), m, k, beta_d)
    return Dictionary(D, np.zeros(k, dtype=int))


def neurogenesis_count(pc_avg: float, gamma: float, c_k: int, batch_size: int) -> int:
    """Number of elements to add for a batch whose average correlation is ``pc_avg``."""
    if c_k < 0:
        raise ValueError("c_k must be non-negative")
    if c_k == 0 or pc_avg > gamma:
        return 0
    cap = min(c_k, batch_size)
    # absorb float noise such as (1 - 0.9) * 50 = 5.000000000000001
    raw = math.ceil(round((1.0 - pc_avg) * c_k, 9))
    return max(1, min(raw, cap))


def add_elements(state: LearnerState, k_n: int) -> LearnerState:
    if k_n <= 0:
        return state
    d = state.dictionary
    new = random_columns(state.rng, d.m, k_n, state.config.beta_d)
    k = d.k
    d.D = np.hstack([d.D, new])
    d.ages = np.concatenate([d.ages, np.full(k_n, state.batches_seen, dtype=int)])
    A = np.zeros((k + k_n, k + k_n))
    A[:k, :k] = state.memory.A
    state.memory.A = A
    state.memory.B = np.hstack([state.memory.B, np.zeros((d.m, k_n))])
    if state.code_log is not None:
        state.code_log.pad(k_n)
    return state


def memory_update(memory: Memory, x, alpha) -> Memory:
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    k = memory.A.shape[0]
    if alpha.shape != (k,) or x.shape != (memory.B.shape[0],):
        raise ValueError(f"dimension mismatch: x {x.shape}, alpha {alpha.shape}, memory k={k}")
    memory.A += np.outer(alpha, alpha)
    memory.B += np.outer(x, alpha)
    return memory


def surrogate_objective(D, A, B, lambda_g=0.0, lambdas=None) -> float:
    """Quadratic surrogate plus the regularizers minimized exactly by one column step.

    Each column step solves min_d 0.5*a_jj*||d - u_j||^2 + a_jj*(lambda_j*||d||_1
    + lambda_g*||d||_2) over the unit ball, so the penalties carry an a_jj weight.
    """
    D = np.asarray(D)
    val = 0.5 * float(np.sum((D.T @ D) * A)) - float(np.sum(D * B))
    w = np.diag(A)
    if lambda_g:
        val += lambda_g * float(w @ np.linalg.norm(D, axis=0))
    if lambdas is not None:
        val += float((w * lambdas) @ np.abs(D).sum(axis=0))
    return val


@dataclass
class UpdateInfo:
    sweeps: int
    max_change: float
    # (objective before, objective after) per sweep, both with that sweep's lambda_j
    objectives: list = field(default_factory=list)
    iterates: list = field(default_factory=list)  # D before the first sweep, then after each sweep
    lambdas: np.ndarray | None = None


def column_step(u, target: SparsityTarget | None, lambda_g: float, lam: float | None = None):
    """Sparsify, group-shrink and project one unconstrained column minimizer.

    ``lam`` fixes the l1 level; when None it is searched for ``target``.
    Returns ``(d, lambda_j)``.
    """
    v = u
    if target is None:
        lam = 0.0
    else:
        if lam is None:
            lam = numerics.binary_search_lambda(u, target)
        v = numerics.prox_l1(u, lam)
    w = numerics.group_shrink(v, lambda_g) if lambda_g > 0 else v
    return numerics.normalize_column(w), lam


def dictionary_update(state: LearnerState, trace: bool = False) -> UpdateInfo:
    """Cyclic block-coordinate descent over columns until the largest column change is below ``bcd_tol``.

    The sparsity level of each column is searched in the first sweep and kept
    for the rest of the update (unless ``retune_each_sweep``), which makes the
    sweeps a descent method on one fixed convex objective. Retuning every sweep
    can cycle without converging.
    """
    cfg = state.config
    D = state.dictionary.D
    A, B = state.memory.A, state.memory.B
    k = D.shape[1]
    info = UpdateInfo(0, 0.0)
    if k == 0:
        return info
    target = cfg.element_target
    lambdas = np.zeros(k)
    tuned = np.zeros(k, dtype=bool)
    for sweep in range(cfg.bcd_max_sweeps):
        D_prev = D.copy() if trace else None
        if trace and sweep == 0:
            info.iterates.append(D_prev)
        max_change = 0.0
        for j in range(k):
            ajj = A[j, j]
            if ajj <= 0.0:
                continue
            u = D[:, j] + (B[:, j] - D @ A[:, j]) / ajj
            fixed = lambdas[j] if tuned[j] and not cfg.retune_each_sweep else None
            d, lambdas[j] = column_step(u, target, cfg.lambda_g, fixed)
            tuned[j] = True
            change = float(np.linalg.norm(d - D[:, j]))
            max_change = max(max_change, change)
            D[:, j] = d
        info.sweeps = sweep + 1
        info.max_change = max_change
        if trace:
            lam = lambdas if target is not None else None
            info.objectives.append(
                (
                    surrogate_objective(D_prev, A, B, cfg.lambda_g, lam),
                    surrogate_objective(D, A, B, cfg.lambda_g, lam),
                )
            )
            info.iterates.append(D.copy())
        if max_change < cfg.bcd_tol:
            break
    info.lambdas = lambdas.copy()
    return info


def handle_dead_elements(state: LearnerState) -> int:
    """Reinitialize (ODL*) or remove (deleting variants) zero-norm columns; return how many."""
    d = state.dictionary
    dead = np.flatnonzero(~np.any(d.D != 0.0, axis=0))
    if dead.size == 0:
        return 0
    variant = state.config.variant
    if variant == Variant.ODL_STAR:
        d.D[:, dead] = random_columns(state.rng, d.m, dead.size, state.config.beta_d)
        d.ages[dead] = state.batches_seen
        state.memory.A[dead, :] = 0.0
        state.memory.A[:, dead] = 0.0
        state.memory.B[:, dead] = 0.0
        if state.code_log is not None:
            state.code_log.zero(dead)
        return int(dead.size)
    if variant.deaths:
        keep = np.setdiff1d(np.arange(d.k), dead)
        d.D = d.D[:, keep]
        d.ages = d.ages[keep]
        state.memory.A = state.memory.A[np.ix_(keep, keep)]
        state.memory.B = state.memory.B[:, keep]
        if state.code_log is not None:
            state.code_log.keep(keep)
        return int(dead.size)
    return 0


def process_batch(state: LearnerState, X) -> BatchMetrics:
    """One online iteration on the rows of ``X``; mutates ``state`` in place."""
    cfg = state.config
    X = np.atleast_2d(np.asarray(X, dtype=float))
    k_before = state.dictionary.k
    if X.size == 0:
        log.warning("empty batch at index %d skipped", state.batches_seen)
        return BatchMetrics(state.batches_seen, 0, k_before, k_before, 0.0, 0.0, 0, 0, 0.0, 0.0, 0.0, 0, empty=True)
    if X.shape[1] != state.dictionary.m:
        raise ValueError(f"sample length {X.shape[1]} != dictionary rows {state.dictionary.m}")

    target = cfg.code_target
    coder = Coder(state.dictionary.D, cfg.normalize_for_coding)
    codes = coder.encode_batch(X, target)
    p_pre = batch_pearson(X, codes @ coder.D.T)
    p_post = p_pre

    k_n = neurogenesis_count(p_pre, cfg.gamma, cfg.c_k, X.shape[0])
    if k_n:
        add_elements(state, k_n)
        coder = Coder(state.dictionary.D, cfg.normalize_for_coding)
        codes = coder.encode_batch(X, target)
        p_post = batch_pearson(X, codes @ coder.D.T)
    rec = evaluate(X, codes @ coder.D.T)

    for x, a in zip(X, codes):
        memory_update(state.memory, x, a)
        if state.code_log is not None:
            state.code_log.append(x, a)

    info = dictionary_update(state)
    killed = handle_dead_elements(state)
    metrics = BatchMetrics(
        batch=state.batches_seen,
        n_samples=X.shape[0],
        k_before=k_before,
        k=state.dictionary.k,
        p_c_pre=p_pre,
        p_c_post=p_post,
        k_n=k_n,
        killed=killed,
        mse=rec.mse,
        pearson=rec.pearson,
        spearman=rec.spearman,
        sweeps=info.sweeps,
    )
    state.batches_seen += 1
    return metrics


def encode(state: LearnerState, X) -> np.ndarray:
    """Codes of the rows of ``X`` in the current dictionary, with the training sparsity target."""
    coder = Coder(state.dictionary.D, state.config.normalize_for_coding)
    return coder.encode_batch(np.atleast_2d(X), state.config.code_target)


def save_dictionary(dictionary: Dictionary, path, config: LearnerConfig | None = None):
    """Write ``path`` (m rows by k columns) and a ``.json`` sidecar next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if dictionary.k:
        np.savetxt(path, dictionary.D, delimiter=",", fmt="%.17g")
    else:
        path.write_text("")
    meta = {
        "m": dictionary.m,
        "k": dictionary.k,
        "beta_d": config.beta_d if config else None,
        "element_ages": dictionary.ages.tolist(),
        "config": config.to_dict() if config else None,
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2))


def load_dictionary(path) -> tuple[Dictionary, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    m, k = meta["m"], meta["k"]
    if k:
        D = np.loadtxt(path, delimiter=",", ndmin=2)
    else:
        D = np.zeros((m, 0))
    if D.shape != (m, k):
        raise ValueError(f"{path}: CSV shape {D.shape} disagrees with sidecar ({m}, {k})")
    return Dictionary(D, np.asarray(meta["element_ages"], dtype=int)), meta
