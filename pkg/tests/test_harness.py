import csv
import json

import numpy as np
import pytest

from nodl.datagen import SyntheticSpec, generate, write_dataset
from nodl.harness import (
    RANDOM_D,
    TRACE_COLUMNS,
    ConfigError,
    CSVFormatError,
    DataConfig,
    ExperimentConfig,
    load_matrix_csv,
    run_experiment,
    verify_lemma1,
)
from nodl.learner import LearnerConfig

SMALL = dict(m=64, nnz_per_sample=8, domain1_dims=[0, 32], domain2_dims=[32, 64],
             n_train_per_domain=40, n_test_per_domain=10)


def small(**learner):
    lc = dict(k_init=12, beta_c=8, beta_d=8, c_k=10, batch_size=10, lambda_g=0.3)
    lc.update(learner)
    return ExperimentConfig(learner=LearnerConfig(**lc), data=DataConfig(synthetic=SyntheticSpec(**SMALL)),
                            variants=["ODL", "NODL"], seed=1)


def test_csv_example(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2,3\n4,5,6\n")
    X = load_matrix_csv(p)
    assert X.shape == (2, 3)
    np.testing.assert_array_equal(X, [[1, 2, 3], [4, 5, 6]])


@pytest.mark.parametrize(
    "body, row, col",
    [("1,2,3\n4,5\n", 2, None), ("1,2\n3,abc\n", 2, 2), ("1,2\nnan,1\n", 2, 1), ("1,inf\n", 1, 2)],
)
def test_csv_errors_locate_the_cell(tmp_path, body, row, col):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(CSVFormatError) as e:
        load_matrix_csv(p)
    assert (e.value.row, e.value.col) == (row, col)
    assert f"row {row}" in str(e.value)


def test_run_experiment_outputs(tmp_path):
    cfg = small()
    rep = run_experiment(cfg, out_dir=tmp_path)
    assert {(r["variant"], r["domain"]) for r in rep.final} == {
        (v, d) for v in ("ODL", "NODL", RANDOM_D) for d in (1, 2)}
    assert rep.final_k["ODL"] == 12
    assert all(v <= 1e-8 for v in rep.memory_audit.values())
    with open(tmp_path / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == TRACE_COLUMNS
    assert len(rows) == 2 * 8  # two variants, 80 samples in batches of 10
    summary = json.loads((tmp_path / "report.json").read_text())
    assert summary["config"]["learner"]["seed"] == 1
    assert (tmp_path / "dictionary_NODL.csv").exists() and (tmp_path / "dictionary_NODL.json").exists()
    # a fixed-size dictionary fitted to domain 1 has nothing to offer domain 2
    odl2 = rep.record("ODL", 2)
    assert odl2["pearson"] <= rep.record("NODL", 2)["pearson"]


def test_eval_every_records_curve():
    cfg = small()
    cfg.eval_every = 4
    cfg.variants = ["NODL"]
    rep = run_experiment(cfg)
    assert len(rep.evaluations) == 2 * 2  # batches 4 and 8, two test domains


def test_csv_data_kind(tmp_path):
    spec = SyntheticSpec(**SMALL, seed=4)
    write_dataset(generate(spec), spec, tmp_path)
    cfg = small()
    cfg.data = DataConfig(kind="csv", train=["train1.csv", "train2.csv"], test=["test1.csv", "test2.csv"])
    cfg.random_baseline = False
    rep = run_experiment(cfg, base_dir=tmp_path)
    assert len(rep.final) == 4


def test_batch_larger_than_domain_rejected():
    with pytest.raises(ConfigError):
        run_experiment(small(batch_size=50))


def test_unknown_config_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"learner": {"nope": 1}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    cfg = small()
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_lemma1_small_pass():
    cfg = small(variant="ODL", normalize_for_coding=False, beta_c=12)
    res = verify_lemma1(cfg)
    assert res.passed and res.max_offsupport_magnitude == 0.0 and res.k == 12


def test_lemma1_refuses_noncompliant_config():
    cfg = small(variant="ODL", normalize_for_coding=True)
    with pytest.raises(ConfigError, match="normalize"):
        verify_lemma1(cfg)
    with pytest.raises(ConfigError, match="variant"):
        verify_lemma1(small(variant="NODL", normalize_for_coding=False))


def test_lemma1_non_strict_reports_honestly():
    res = verify_lemma1(small(variant="NODL", normalize_for_coding=True, lambda_g=0.03), strict=False)
    # neurogenesis adds fresh random columns spanning both domains, so leakage is expected
    assert not res.passed and res.max_offsupport_magnitude > 0.0
    assert res.offsupport_nnz > 0


def test_lemma1_empty_dictionary_is_vacuous():
    res = verify_lemma1(small(variant="ODL", normalize_for_coding=False, k_init=0))
    assert res.passed and res.k == 0 and res.max_offsupport_magnitude == 0.0
