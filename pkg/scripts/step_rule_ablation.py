"""Compare the two step rules over a grid of learning rates on the stable dataset.

Constant-ratio steps either diverge or settle at roughly the Popularity level;
likelihood-weighted steps learn the personalised rules.

    python scripts/step_rule_ablation.py --samples 8000000
"""
import argparse

from run_synthetic import run


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--samples", type=int, default=2_000_000)
    ap.add_argument("--alphas", default="0.2,0.05,0.01,0.001,0.0001")
    args = ap.parse_args()

    print(f"{'step_rule':<16}{'alpha':>8}{'offset':>10}{'popularity':>12}")
    for rule in ("constant_ratio", "likelihood"):
        for alpha in (float(a) for a in args.alphas.split(",")):
            ov = {"model": {"step_rule": rule, "alpha": alpha}, "baselines": {"enabled": ["popularity"]}}
            try:
                rep = run("paper-synthetic", args.samples, ov)
                off, pop = f"{rep['offset'].mrr:.4f}", f"{rep['popularity'].mrr:.4f}"
            except FloatingPointError:
                off, pop = "diverged", "-"
            print(f"{rule:<16}{alpha:>8g}{off:>10}{pop:>12}")


if __name__ == "__main__":
    main()
