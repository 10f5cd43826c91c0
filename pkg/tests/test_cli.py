import json

import numpy as np
import pytest

from nodl.cli import main

SMALL = {
    "seed": 2,
    "learner": {"k_init": 12, "beta_c": 8, "beta_d": 8, "c_k": 10, "batch_size": 10},
    "data": {"synthetic": {"m": 64, "nnz_per_sample": 8, "domain1_dims": [0, 32], "domain2_dims": [32, 64],
                           "n_train_per_domain": 40, "n_test_per_domain": 10}},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


def test_synth_then_train_two_variants(tmp_path, cfg_path):
    data = tmp_path / "data"
    assert main(["synth", "--config", cfg_path, "--out", str(data)]) == 0
    assert (data / "train1.csv").exists() and (data / "manifest.json").exists()
    for v in ("ODL", "NODL"):
        rc = main(["train", "--config", cfg_path, "--data", str(data), "--variant", v,
                   "--out", str(tmp_path / v), "random_baseline=false"])
        assert rc == 0
        rep = json.loads((tmp_path / v / "report.json").read_text())
        assert rep["config"]["variants"] == [v] and rep["config"]["seed"] == 2
        assert rep["config"]["random_baseline"] is False


def test_train_synthetic_directly_matches_synth_csv(tmp_path, cfg_path):
    data = tmp_path / "data"
    main(["synth", "--config", cfg_path, "--out", str(data)])
    main(["train", "--config", cfg_path, "--data", str(data), "--variant", "NODL", "--out", str(tmp_path / "a")])
    main(["train", "--config", cfg_path, "--variant", "NODL", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_train_is_deterministic(tmp_path, cfg_path):
    for name in ("r1", "r2"):
        assert main(["train", "--config", cfg_path, "--variant", "NODL,ODL", "--out", str(tmp_path / name),
                     "lambda_g=0.3"]) == 0
    assert (tmp_path / "r1" / "trace.csv").read_bytes() == (tmp_path / "r2" / "trace.csv").read_bytes()


def test_seed_flag_changes_everything(tmp_path, cfg_path):
    main(["train", "--config", cfg_path, "--variant", "NODL", "--out", str(tmp_path / "a")])
    main(["train", "--config", cfg_path, "--variant", "NODL", "--seed", "3", "--out", str(tmp_path / "b")])
    rep = json.loads((tmp_path / "b" / "report.json").read_text())
    assert rep["config"]["learner"]["seed"] == 3 and rep["config"]["data"]["synthetic"]["seed"] == 3
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()


def test_lemma1(tmp_path, cfg_path, capsys):
    rc = main(["lemma1", "--config", cfg_path, "--out", str(tmp_path / "l"),
               "variant=ODL", "beta_d=8", "normalize_for_coding=false", "beta_c=12"])
    assert rc == 0
    res = json.loads((tmp_path / "l" / "lemma1.json").read_text())
    assert res["pass"] is True and res["max_offsupport_magnitude"] == 0.0
    assert "pass=true" in capsys.readouterr().out


def test_lemma1_noncompliant_is_config_error(tmp_path, cfg_path):
    assert main(["lemma1", "--config", cfg_path, "--out", str(tmp_path), "normalize_for_coding=true"]) == 2


def test_sweep_writes_one_trace_per_value(tmp_path, cfg_path):
    out = tmp_path / "sweep"
    rc = main(["sweep", "--config", cfg_path, "--variant", "NODL", "--param", "lambda_g",
               "--values", "0,0.01,0.03,0.07", "--out", str(out), "random_baseline=false"])
    assert rc == 0
    traces = sorted(out.glob("*/trace.csv"))
    assert len(traces) == 4
    summary = json.loads((out / "sweep.json").read_text())
    assert summary["values"] == [0, 0.01, 0.03, 0.07]
    for p, v in zip(sorted(out.glob("*/report.json")), sorted(summary["values"])):
        assert json.loads(p.read_text())["config"]["learner"]["lambda_g"] == v


def test_export(tmp_path, cfg_path):
    main(["synth", "--config", cfg_path, "--out", str(tmp_path / "data")])
    main(["train", "--config", cfg_path, "--variant", "NODL", "--out", str(tmp_path / "run")])
    rc = main(["export", "--dictionary", str(tmp_path / "run" / "dictionary_NODL.csv"),
               "--samples", str(tmp_path / "data" / "test2.csv"), "--out", str(tmp_path / "codes")])
    assert rc == 0
    codes = np.loadtxt(tmp_path / "codes" / "codes.csv", delimiter=",")
    meta = json.loads((tmp_path / "run" / "dictionary_NODL.json").read_text())
    assert codes.shape == (10, meta["k"])
    assert np.all(np.count_nonzero(codes, axis=1) <= meta["config"]["beta_c"] + 1)


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--variant", "NODL", "no_such_key=1"],
        ["train", "--variant", "BOGUS"],
        ["train", "--variant", "NODL", "batch_size=500"],
        ["train", "--variant", "NODL", "gamma=1.5"],
    ],
)
def test_bad_config_exits_2(tmp_path, cfg_path, argv):
    assert main(argv + ["--config", cfg_path, "--out", str(tmp_path / "x")]) == 2


def test_malformed_csv_exits_2(tmp_path, cfg_path, capsys):
    data = tmp_path / "data"
    main(["synth", "--config", cfg_path, "--out", str(data)])
    with open(data / "train2.csv", "a") as fh:
        fh.write("1,2\n")
    rc = main(["train", "--config", cfg_path, "--data", str(data), "--variant", "ODL", "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "train2.csv" in capsys.readouterr().err


def test_runtime_failure_exits_1(tmp_path, cfg_path):
    run = tmp_path / "run"
    main(["train", "--config", cfg_path, "--variant", "ODL", "--out", str(run)])
    (run / "dictionary_ODL.json").write_text("{not json")
    assert main(["export", "--dictionary", str(run / "dictionary_ODL.csv"),
                 "--samples", str(run / "trace.csv"), "--out", str(tmp_path / "c")]) == 1
