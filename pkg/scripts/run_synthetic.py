"""Two-domain synthetic comparison over several seeds; prints per-domain test Pearson for each variant."""

import argparse
import statistics

from nodl.harness import RANDOM_D, ExperimentConfig, run_experiment
from nodl.learner import LearnerConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--k-init", type=int, default=LearnerConfig().k_init)
    ap.add_argument("--variants", default="ODL,NODL,NODL_PLUS,NODL_MINUS")
    ap.add_argument("--out", help="write each seed's report under this directory")
    args = ap.parse_args()

    variants = args.variants.split(",")
    scores = {}
    for seed in range(args.seeds):
        cfg = ExperimentConfig(learner=LearnerConfig(k_init=args.k_init), variants=variants, seed=seed, audit=False)
        rep = run_experiment(cfg, out_dir=f"{args.out}/seed{seed}" if args.out else None)
        for r in rep.final:
            scores.setdefault((r["variant"], r["domain"]), []).append(r["pearson"])
        print(f"seed {seed}: final k {rep.final_k} ({rep.wall_clock:.1f}s)")

    print(f"\nmedian test Pearson over {args.seeds} seeds")
    for v in variants + [RANDOM_D]:
        d1, d2 = (statistics.median(scores[(v, d)]) for d in (1, 2))
        print(f"{v:>11}  domain 1 {d1:.3f}  domain 2 {d2:.3f}")


if __name__ == "__main__":
    main()
