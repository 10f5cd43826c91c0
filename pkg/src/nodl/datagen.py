"""Two-domain synthetic stream with disjoint supports (a block-diagonal data matrix)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class SyntheticSpec:
    m: int = 1024
    nnz_per_sample: int = 50
    domain1_dims: tuple[int, int] = (0, 512)
    domain2_dims: tuple[int, int] = (512, 1024)
    n_train_per_domain: int = 100
    n_test_per_domain: int = 100
    magnitude: tuple[float, float] = (0.2, 1.0)
    random_sign: bool = False
    seed: int = 0

    def __post_init__(self):
        self.domain1_dims = tuple(self.domain1_dims)
        self.domain2_dims = tuple(self.domain2_dims)
        self.magnitude = tuple(self.magnitude)

    def validate(self):
        for lo, hi in (self.domain1_dims, self.domain2_dims):
            if not 0 <= lo < hi <= self.m:
                raise ValueError(f"domain range [{lo}, {hi}) not inside [0, {self.m})")
            if self.nnz_per_sample > hi - lo:
                raise ValueError(f"nnz_per_sample={self.nnz_per_sample} exceeds domain width {hi - lo}")
        a, b = self.domain1_dims, self.domain2_dims
        if a[0] < b[1] and b[0] < a[1]:
            raise ValueError("domain ranges overlap")
        if self.nnz_per_sample < 0 or self.n_train_per_domain < 0 or self.n_test_per_domain < 0:
            raise ValueError("counts must be non-negative")
        lo, hi = self.magnitude
        if not 0 < lo <= hi:
            raise ValueError("magnitude range must satisfy 0 < lo <= hi")

    def domains(self):
        return [self.domain1_dims, self.domain2_dims]


@dataclass
class SyntheticData:
    train: list[np.ndarray] = field(default_factory=list)
    test: list[np.ndarray] = field(default_factory=list)


def _draw(rng, n, m, dims, nnz, magnitude, random_sign):
    X = np.zeros((n, m))
    lo, hi = dims
    for i in range(n):
        idx = rng.choice(np.arange(lo, hi), size=nnz, replace=False)
        vals = rng.uniform(magnitude[0], magnitude[1], size=nnz)
        if random_sign:
            vals *= rng.choice([-1.0, 1.0], size=nnz)
        X[i, idx] = vals
    return X


def generate(spec: SyntheticSpec) -> SyntheticData:
    """Train and test sets per domain; each row has exactly ``nnz_per_sample`` non-zeros."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    data = SyntheticData()
    for dims in spec.domains():
        args = (spec.m, dims, spec.nnz_per_sample, spec.magnitude, spec.random_sign)
        data.train.append(_draw(rng, spec.n_train_per_domain, *args))
        data.test.append(_draw(rng, spec.n_test_per_domain, *args))
    return data


def write_matrix_csv(path, X):
    np.savetxt(path, np.atleast_2d(X), delimiter=",", fmt="%.17g")


def write_dataset(data: SyntheticData, spec: SyntheticSpec, out_dir) -> dict:
    """Write ``train{d}.csv`` / ``test{d}.csv`` per domain plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"train": [], "test": []}
    for d, (tr, te) in enumerate(zip(data.train, data.test), start=1):
        for split, X in (("train", tr), ("test", te)):
            name = f"{split}{d}.csv"
            write_matrix_csv(out / name, X)
            files[split].append(name)
    manifest = json.loads(json.dumps({"spec": asdict(spec), "files": files}))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest
