"""Command-line entry point: ``nodl {synth,train,lemma1,sweep,export}``.

Configs are JSON files shaped like :class:`nodl.harness.ExperimentConfig`.
Trailing ``key=value`` arguments override single fields; keys are either
dotted paths (``learner.gamma``) or bare field names, resolved in the order
top level, learner, data, data.synthetic.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import datagen
from .harness import ConfigError, CSVFormatError, ExperimentConfig, load_matrix_csv, run_experiment, verify_lemma1
from .learner import LearnerConfig, load_dictionary
from .numerics import SparsityTarget
from .sparse_coding import Coder

log = logging.getLogger("nodl")

SECTIONS = [(), ("learner",), ("data",), ("data", "synthetic")]


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _resolve(cfg: dict, key: str) -> tuple:
    parts = tuple(key.split("."))
    if len(parts) > 1:
        node = cfg
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node = node[p]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        return parts
    for sec in SECTIONS:
        node = cfg
        for p in sec:
            node = node[p]
        if key in node and not isinstance(node[key], dict):
            return sec + (key,)
    raise ConfigError(f"unknown config key {key!r}")


def set_key(cfg: dict, key: str, value):
    path = _resolve(cfg, key)
    node = cfg
    for p in path[:-1]:
        node = node[p]
    node[path[-1]] = value


def _merge(base: dict, extra: dict, where=""):
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where}{k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            _merge(base[k], v, f"{where}{k}.")
        else:
            base[k] = v


def build_config(args, base: dict | None = None) -> ExperimentConfig:
    cfg = base if base is not None else ExperimentConfig().to_dict()
    if getattr(args, "config", None):
        try:
            extra = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        _merge(cfg, extra)
    for item in getattr(args, "overrides", None) or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        set_key(cfg, k.strip(), _parse_value(v))
    if getattr(args, "variant", None):
        cfg["variants"] = [v.strip() for v in args.variant.split(",")]
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "data", None):
        manifest = json.loads((Path(args.data) / "manifest.json").read_text())
        base_dir = Path(args.data)
        cfg["data"]["kind"] = "csv"
        cfg["data"]["train"] = [str(base_dir / f) for f in manifest["files"]["train"]]
        cfg["data"]["test"] = [str(base_dir / f) for f in manifest["files"]["test"]]
    return ExperimentConfig.from_dict(cfg)


def cmd_synth(args) -> int:
    config = build_config(args)
    spec = datagen.SyntheticSpec(**{**config.to_dict()["data"]["synthetic"], "seed": config.seed})
    try:
        data = datagen.generate(spec)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    datagen.write_dataset(data, spec, args.out)
    print(f"wrote {len(data.train)} domains to {args.out}")
    return 0


def _print_final(report):
    for r in report.final:
        print(f"{r['variant']:>10} domain {r['domain']}: pearson={r['pearson']:.4f} "
              f"spearman={r['spearman']:.4f} mse={r['mse']:.6f}")


def cmd_train(args) -> int:
    config = build_config(args)
    report = run_experiment(config, out_dir=args.out)
    _print_final(report)
    print(f"final k: {report.final_k}")
    return 0


def lemma1_base() -> dict:
    cfg = ExperimentConfig().to_dict()
    cfg["learner"].update(variant="ODL", beta_d=50, normalize_for_coding=False)
    cfg["variants"] = ["ODL"]
    return cfg


def cmd_lemma1(args) -> int:
    config = build_config(args, base=lemma1_base())
    res = verify_lemma1(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {**res.to_dict(), "pass": res.passed, "config": config.to_dict()}
    (out / "lemma1.json").write_text(json.dumps(payload, indent=2))
    print(f"pass={str(res.passed).lower()} max_offsupport_magnitude={res.max_offsupport_magnitude!r} k={res.k}")
    return 0 if res.passed else 1


def _sweep_one(job):
    cfg_dict, out_dir = job
    report = run_experiment(ExperimentConfig.from_dict(cfg_dict), out_dir=out_dir)
    return out_dir, report.final, report.final_k


def cmd_sweep(args) -> int:
    config = build_config(args)
    base = config.to_dict()
    values = [_parse_value(v) for v in args.values.split(",")]
    jobs = []
    for v in values:
        cfg = copy.deepcopy(base)
        set_key(cfg, args.param, v)
        ExperimentConfig.from_dict(copy.deepcopy(cfg))  # fail fast before running anything
        jobs.append((cfg, str(Path(args.out) / f"{args.param}={v}")))
    workers = max(1, int(os.environ.get("NODL_THREADS", "1")))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    summary = []
    for out_dir, final, final_k in results:
        summary.append({"out": out_dir, "final": final, "final_k": final_k})
        print(f"{out_dir}: final k {final_k}")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    (Path(args.out) / "sweep.json").write_text(json.dumps({"param": args.param, "values": values, "runs": summary}, indent=2))
    return 0


def cmd_export(args) -> int:
    """Encode a sample matrix in a saved dictionary and write the codes."""
    dictionary, meta = load_dictionary(args.dictionary)
    lcfg = LearnerConfig(**meta["config"]) if meta.get("config") else LearnerConfig()
    X = load_matrix_csv(args.samples)
    if X.size and X.shape[1] != dictionary.m:
        raise ConfigError(f"samples have length {X.shape[1]}, dictionary expects {dictionary.m}")
    target = SparsityTarget(lcfg.beta_c, lcfg.eps_beta, lcfg.eps_lambda)
    codes = Coder(dictionary.D, lcfg.normalize_for_coding).encode_batch(X, target)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "codes.csv", codes, delimiter=",", fmt="%.17g")
    print(f"wrote {codes.shape[0]} codes of length {codes.shape[1]} to {out / 'codes.csv'}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nodl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, variant=True):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output directory")
        if variant:
            p.add_argument("--variant", help="variant name, or several separated by commas")
        p.add_argument("overrides", nargs="*", metavar="key=value")

    p = sub.add_parser("synth", help="write the synthetic two-domain dataset as CSV")
    common(p, variant=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train variants and write report.json, trace.csv, dictionaries")
    common(p)
    p.add_argument("--data", help="directory written by `synth` (or with a compatible manifest.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("lemma1", help="check support preservation of the fixed-size learner")
    common(p, variant=False)
    p.set_defaults(func=cmd_lemma1)

    p = sub.add_parser("sweep", help="one run per value of a single parameter")
    common(p)
    p.add_argument("--data")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="encode samples in a saved dictionary, write codes.csv")
    p.add_argument("--dictionary", required=True, help="dictionary CSV with its .json sidecar")
    p.add_argument("--samples", required=True, help="CSV, one sample per row")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CSVFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
