"""Two-domain streaming experiments, the support-preservation check, and CSV ingestion."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import datagen
from .learner import (
    LearnerConfig,
    LearnerState,
    Variant,
    encode,
    process_batch,
    random_columns,
    save_dictionary,
)
from .metrics import evaluate
from .sparse_coding import Coder

log = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "batch", "variant", "k", "p_c_pre", "p_c_post", "k_n", "killed",
    "mse", "pearson", "spearman", "domain", "sweeps",
]
RANDOM_D = "RANDOM_D"


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class CSVFormatError(ValueError):
    def __init__(self, path, row, col, msg):
        self.path, self.row, self.col = str(path), row, col
        where = f"row {row}" + (f", column {col}" if col is not None else "")
        super().__init__(f"{path}: {where}: {msg}")


def load_matrix_csv(path) -> np.ndarray:
    """Read a rectangular CSV of finite reals, one sample per row. Rows and columns are 1-based in errors."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for r, line in enumerate(csv.reader(fh), start=1):
            if not line or all(not c.strip() for c in line):
                continue
            if width is None:
                width = len(line)
            elif len(line) != width:
                raise CSVFormatError(path, r, None, f"has {len(line)} fields, expected {width}")
            vals = []
            for c, cell in enumerate(line, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise CSVFormatError(path, r, c, f"cannot parse {cell.strip()!r} as a number") from None
                if not math.isfinite(v):
                    raise CSVFormatError(path, r, c, f"non-finite value {cell.strip()!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=float)


@dataclass
class DataConfig:
    kind: str = "synthetic"  # "synthetic" or "csv"
    synthetic: datagen.SyntheticSpec = field(default_factory=datagen.SyntheticSpec)
    train: list = field(default_factory=list)  # one CSV path per domain
    test: list = field(default_factory=list)

    def __post_init__(self):
        if isinstance(self.synthetic, dict):
            self.synthetic = datagen.SyntheticSpec(**self.synthetic)


@dataclass
class ExperimentConfig:
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    data: DataConfig = field(default_factory=DataConfig)
    variants: list = field(default_factory=lambda: ["NODL"])
    seed: int = 0
    eval_every: int = 0  # evaluate held-out sets every N batches; 0 = end only
    random_baseline: bool = True
    audit: bool = True
    save_dictionaries: bool = True

    def __post_init__(self):
        if isinstance(self.learner, dict):
            self.learner = LearnerConfig(**self.learner)
        if isinstance(self.data, dict):
            self.data = DataConfig(**self.data)
        self.variants = [Variant(v).value for v in self.variants]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["learner"] = self.learner.to_dict()
        # the experiment seed drives data, initialization and shuffling
        d["learner"]["seed"] = self.seed
        d["data"]["synthetic"]["seed"] = self.seed
        d["data"]["synthetic"]["domain1_dims"] = list(self.data.synthetic.domain1_dims)
        d["data"]["synthetic"]["domain2_dims"] = list(self.data.synthetic.domain2_dims)
        d["data"]["synthetic"]["magnitude"] = list(self.data.synthetic.magnitude)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            learner = d.get("learner", {})
            _check_keys(learner, LearnerConfig, "learner")
            data = d.get("data", {})
            _check_keys(data, DataConfig, "data")
            _check_keys(data.get("synthetic", {}), datagen.SyntheticSpec, "data.synthetic")
            return cls(**d)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e


def _check_keys(d, klass, where):
    unknown = set(d) - set(klass.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class Dataset:
    train: list
    test: list
    m: int


def load_data(config: ExperimentConfig, base_dir=None) -> Dataset:
    dc = config.data
    if dc.kind == "synthetic":
        spec = datagen.SyntheticSpec(**{**asdict(dc.synthetic), "seed": config.seed})
        try:
            data = datagen.generate(spec)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return Dataset(data.train, data.test, spec.m)
    if dc.kind == "csv":
        if not dc.train or len(dc.train) != len(dc.test):
            raise ConfigError("csv data needs one train and one test path per domain")
        base = Path(base_dir) if base_dir else Path(".")
        train = [load_matrix_csv(base / p) for p in dc.train]
        test = [load_matrix_csv(base / p) for p in dc.test]
        widths = {X.shape[1] for X in train + test if X.size}
        if len(widths) != 1:
            raise ConfigError(f"inconsistent sample lengths across files: {sorted(widths)}")
        return Dataset(train, test, widths.pop())
    raise ConfigError(f"unknown data kind {dc.kind!r}")


def _validate(config: ExperimentConfig, data: Dataset):
    try:
        config.learner.validate(data.m)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    for d, X in enumerate(data.train, start=1):
        if config.learner.batch_size > X.shape[0]:
            raise ConfigError(
                f"batch_size={config.learner.batch_size} exceeds domain {d} training count {X.shape[0]}"
            )


@dataclass
class ExperimentReport:
    config: dict
    trace: list = field(default_factory=list)
    final: list = field(default_factory=list)  # {"variant", "domain", metrics...}
    evaluations: list = field(default_factory=list)
    memory_audit: dict = field(default_factory=dict)
    final_k: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    states: dict = field(default_factory=dict, repr=False)

    def record(self, variant, domain) -> dict:
        for r in self.final:
            if r["variant"] == variant and r["domain"] == domain:
                return r
        raise KeyError((variant, domain))

    def summary(self) -> dict:
        return {
            "config": self.config,
            "final": self.final,
            "final_k": self.final_k,
            "evaluations": self.evaluations,
            "memory_audit": self.memory_audit,
            "wall_clock": self.wall_clock,
        }

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.summary(), indent=2))
        with open(out / "trace.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            for row in self.trace:
                w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
        for variant, state in self.states.items():
            save_dictionary(state.dictionary, out / f"dictionary_{variant}.csv", state.config)


def _evaluate_tests(state_or_D, tests, beta_target, normalize):
    out = []
    for X in tests:
        if isinstance(state_or_D, LearnerState):
            codes = encode(state_or_D, X)
            D = state_or_D.dictionary.D
        else:
            D = state_or_D
            codes = Coder(D, normalize).encode_batch(X, beta_target)
        out.append(evaluate(X, codes @ D.T))
    return out


def memory_audit(state: LearnerState) -> float:
    """Largest elementwise gap between the live memory and a rebuild from the code log."""
    ref = state.code_log.reaccumulate(state.dictionary.m, state.dictionary.k)
    gap_a = np.max(np.abs(ref.A - state.memory.A), initial=0.0)
    gap_b = np.max(np.abs(ref.B - state.memory.B), initial=0.0)
    return float(max(gap_a, gap_b))


def train_variant(config: ExperimentConfig, data: Dataset, variant: str, report: ExperimentReport | None = None):
    """Stream every training domain in order through a fresh learner; return the final state."""
    lcfg = LearnerConfig(**{**config.learner.to_dict(), "variant": variant, "seed": config.seed})
    state = LearnerState.create(lcfg, data.m, keep_log=config.audit)
    shuffle = np.random.default_rng([config.seed, 1])
    bs = lcfg.batch_size
    n_batches = 0
    for d, X in enumerate(data.train, start=1):
        X = X[shuffle.permutation(X.shape[0])]
        for start in range(0, X.shape[0], bs):
            bm = process_batch(state, X[start:start + bs])
            n_batches += 1
            if report is not None:
                row = bm.to_dict()
                row.update(variant=variant, domain=d)
                report.trace.append(row)
                if config.eval_every and n_batches % config.eval_every == 0:
                    for td, rec in enumerate(_evaluate_tests(state, data.test, None, None), start=1):
                        report.evaluations.append({"variant": variant, "batch": bm.batch, "domain": td, **rec.to_dict()})
    return state


def run_experiment(config: ExperimentConfig, out_dir=None, base_dir=None) -> ExperimentReport:
    """Train each configured variant on the domain sequence and evaluate every held-out domain.

    All variants see the same shuffled stream and start from the same initial
    dictionary, so their differences come from the algorithm alone.
    """
    t0 = time.perf_counter()
    data = load_data(config, base_dir)
    _validate(config, data)
    report = ExperimentReport(config=config.to_dict())

    for variant in config.variants:
        state = train_variant(config, data, variant, report)
        state.check()
        report.states[variant] = state
        report.final_k[variant] = state.dictionary.k
        for d, rec in enumerate(_evaluate_tests(state, data.test, None, None), start=1):
            report.final.append({"variant": variant, "domain": d, **rec.to_dict()})
        if config.audit:
            report.memory_audit[variant] = memory_audit(state)

    if config.random_baseline:
        lcfg = config.learner
        D = random_columns(np.random.default_rng(config.seed), data.m, lcfg.k_init, None)
        recs = _evaluate_tests(D, data.test, lcfg.code_target, lcfg.normalize_for_coding)
        for d, rec in enumerate(recs, start=1):
            report.final.append({"variant": RANDOM_D, "domain": d, **rec.to_dict()})

    report.wall_clock = time.perf_counter() - t0
    if out_dir is not None:
        if not config.save_dictionaries:
            report.states = {}
        report.write(out_dir)
    return report


@dataclass
class Lemma1Result:
    passed: bool
    max_offsupport_magnitude: float
    k: int
    offsupport_nnz: int

    def to_dict(self):
        return asdict(self)


def verify_lemma1(config: ExperimentConfig, strict: bool = True) -> Lemma1Result:
    """Train the fixed-size baseline on the disjoint-support stream and inspect rows outside domain 1.

    With ``strict`` the configuration must match the setting in which support
    preservation is expected (synthetic data, ODL, sparse elements, no column
    normalization while coding); otherwise a ConfigError is raised before any
    training.
    """
    lc = config.learner
    if config.data.kind != "synthetic":
        raise ConfigError("support check needs the synthetic disjoint-support data")
    if strict:
        problems = []
        if lc.variant != Variant.ODL:
            problems.append(f"variant must be ODL, got {lc.variant.value}")
        if lc.beta_d is None:
            problems.append("beta_d must be set (sparse elements)")
        if lc.normalize_for_coding:
            problems.append("normalize_for_coding must be off")
        if problems:
            raise ConfigError("; ".join(problems))
    data = load_data(config)
    _validate(config, data)
    state = train_variant(config, data, lc.variant.value)
    lo, hi = config.data.synthetic.domain1_dims
    off = np.ones(data.m, dtype=bool)
    off[lo:hi] = False
    block = state.dictionary.D[off]
    mag = float(np.max(np.abs(block), initial=0.0))
    nnz = int(np.count_nonzero(block))
    return Lemma1Result(nnz == 0, mag, state.dictionary.k, nnz)
