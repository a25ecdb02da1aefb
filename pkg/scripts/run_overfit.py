"""Overfit the seed-7, 64-example synthetic corpus and report token accuracy / BLEU."""
import argparse

from d2tgraph.experiments import overfit_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--max-steps", type=int, default=2000)
    ap.add_argument("--out-dir", help="keep the run directory here")
    args = ap.parse_args()
    r = overfit_experiment(args.seed, args.size, args.max_steps, out_dir=args.out_dir)
    print(f"token_acc={r.token_acc:.4f} bleu={r.bleu:.4f} best_step={r.best_step} seconds={r.seconds:.1f}")


if __name__ == "__main__":
    main()
