"""Dictionary size after each batch of the synthetic stream, for several initial sizes and variants."""

import argparse
import csv
import sys

from nodl.harness import ExperimentConfig, ExperimentReport, load_data, train_variant
from nodl.learner import LearnerConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k-init", default="5,50,200")
    ap.add_argument("--variants", default="ODL,NODL,NODL_PLUS,NODL_MINUS")
    ap.add_argument("--lambda-g", type=float, default=LearnerConfig().lambda_g)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    w = csv.writer(sys.stdout)
    w.writerow(["k_init", "variant", "batch", "domain", "k", "k_n", "killed"])
    for k0 in map(int, args.k_init.split(",")):
        cfg = ExperimentConfig(learner=LearnerConfig(k_init=k0, lambda_g=args.lambda_g), seed=args.seed, audit=False)
        data = load_data(cfg)
        for v in args.variants.split(","):
            report = ExperimentReport(config={})
            train_variant(cfg, data, v, report)
            for r in report.trace:
                w.writerow([k0, v, r["batch"], r["domain"], r["k"], r["k_n"], r["killed"]])


if __name__ == "__main__":
    main()
