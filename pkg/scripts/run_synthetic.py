"""Stable and trending synthetic experiments, end to end in memory.

    python scripts/run_synthetic.py                    # full 8M + 8M per dataset
    python scripts/run_synthetic.py --samples 1000000  # quicker, noisier
"""
import argparse
import time

from offset_rec import config as config_mod
from offset_rec.cli import build_algorithms
from offset_rec.log import ProfileEncoder
from offset_rec.replay import ReplayProtocol, replay
from offset_rec.synth import generate


def run(preset: str, samples: int | None, overrides: dict):
    ov = {k: dict(v) for k, v in overrides.items()}
    if samples is not None:
        gen = ov.setdefault("generator", {})
        gen.update(n_samples=samples, test_samples=samples)
        if preset == "paper-trending":
            gen["trend_switch"] = samples // 2
    cfg = config_mod.load(preset=preset, overrides=ov)
    rules, after = cfg.rulesets()
    train = generate(cfg.generator_config(), rules, after)
    test = generate(cfg.generator_config(test=True), after if after is not None else rules)
    enc = ProfileEncoder(train.demographics, cfg.model.age_bucket)
    algos = build_algorithms(cfg, enc, train.n_variants)
    p = cfg.protocol
    return replay(train, algos, ReplayProtocol(p.warmup, p.warmup_unit, p.mode, p.confidence),
                  encoder=enc, test_log=test)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--samples", type=int, help="train and test size per dataset (default: preset, 8M)")
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--step-rule", choices=["likelihood", "constant_ratio"])
    ap.add_argument("--age-bucket", type=int)
    ap.add_argument("--datasets", default="paper-synthetic,paper-trending")
    args = ap.parse_args()

    model = {k: v for k, v in (("alpha", args.alpha), ("step_rule", args.step_rule),
                               ("age_bucket", args.age_bucket)) if v is not None}
    overrides = {"model": model} if model else {}
    rows = []
    for preset in args.datasets.split(","):
        t0 = time.perf_counter()
        rep = run(preset, args.samples, overrides)
        for r in rep.results.values():
            rows.append((preset, r.name, r.mrr, r.clicks_scored, r.significance_gap))
        print(f"# {preset}: {time.perf_counter() - t0:.1f}s")
    print(f"{'dataset':<18}{'algorithm':<12}{'mrr':>8}{'clicks':>9}{'gap':>8}")
    for ds, name, m, c, g in rows:
        print(f"{ds:<18}{name:<12}{m:>8.4f}{c:>9d}{g:>8.4f}")


if __name__ == "__main__":
    main()
