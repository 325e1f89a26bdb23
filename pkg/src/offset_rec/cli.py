"""Command-line entry point: ``offset-rec {generate,replay,inspect}``.

Exit codes: 0 success, 1 invalid config, 2 I/O error, 3 data or schema mismatch.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .baselines import Popularity, RandomRanker
from .errors import (CorruptSnapshot, InvalidConfig, InvalidDimensions, SchemaMismatch, UnknownFeatureValue,
                     UnknownVariant, UnorderedLog)
from .log import ProfileEncoder, read_log, write_log
from .model import Model, load_snapshot, save_snapshot
from .replay import ReplayProtocol, replay
from .synth import generate
from .trainer import OffSet, TrainerConfig, TrainerState

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA = 0, 1, 2, 3

logger = logging.getLogger("offset_rec")


def _overrides(args: argparse.Namespace) -> dict:
    o: dict[str, dict] = {}

    def put(section, key, value):
        if value is not None:
            o.setdefault(section, {})[key] = value

    put("generator", "seed", getattr(args, "seed", None))
    put("generator", "n_samples", getattr(args, "samples", None))
    put("generator", "test_samples", getattr(args, "test_samples", None))
    put("generator", "ruleset", getattr(args, "ruleset", None))
    put("generator", "trend_switch", getattr(args, "trend_switch", None))
    put("model", "alpha", getattr(args, "alpha", None))
    put("model", "seed", getattr(args, "model_seed", None))
    put("model", "step_rule", getattr(args, "step_rule", None))
    put("model", "rescale_mode", getattr(args, "rescale", None))
    put("protocol", "mode", getattr(args, "mode", None))
    put("protocol", "warmup", getattr(args, "warmup", None))
    put("protocol", "warmup_unit", getattr(args, "warmup_unit", None))
    put("paths", "log", getattr(args, "log", None))
    put("paths", "test_log", getattr(args, "test_log", None))
    put("paths", "snapshot_in", getattr(args, "snapshot_in", None))
    put("paths", "snapshot_out", getattr(args, "snapshot_out", None))
    put("paths", "report", getattr(args, "report", None))
    put("paths", "table", getattr(args, "table", None))
    if getattr(args, "algorithms", None) is not None:
        names = [a.strip() for a in args.algorithms.split(",") if a.strip()]
        o.setdefault("baselines", {})["enabled"] = [n for n in names if n != "offset"]
        o["_offset"] = "offset" in names
    return o


def _load(args) -> tuple[config_mod.ExperimentConfig, bool]:
    ov = _overrides(args)
    with_offset = ov.pop("_offset", True)
    return config_mod.load(args.config, args.preset, ov), with_offset


def _ctr_summary(log) -> str:
    ctr = log.variant_ctr()
    cells = " ".join(f"v{a}={c:.5f}" for a, c in enumerate(ctr))
    return f"samples={len(log)} clicks={log.n_clicks} ctr={log.n_clicks / max(len(log), 1):.5f} per-variant: {cells}"


def cmd_generate(args) -> int:
    cfg, _ = _load(args)
    base = Path(args.config).parent if args.config else None
    rules, after = cfg.rulesets(base)
    train = generate(cfg.generator_config(), rules, after)
    write_log(cfg.paths.log, train)
    print(f"{cfg.paths.log}: {_ctr_summary(train)}")
    if cfg.generator.test_samples > 0 and cfg.paths.test_log:
        test = generate(cfg.generator_config(test=True), after if after is not None else rules)
        write_log(cfg.paths.test_log, test)
        print(f"{cfg.paths.test_log}: {_ctr_summary(test)}")
    return EXIT_OK


def build_algorithms(cfg: config_mod.ExperimentConfig, encoder: ProfileEncoder, n_variants: int,
                     with_offset: bool = True) -> list:
    m = cfg.model
    algos = []
    if with_offset:
        tcfg = TrainerConfig(m.alpha, m.gamma, m.mu_update_cadence, m.mu_initial, m.rescale_mode, m.step_rule)
        if cfg.paths.snapshot_in:
            model, state, _ = load_snapshot(cfg.paths.snapshot_in)
            if model.n_variants != n_variants:
                raise SchemaMismatch(f"snapshot has {model.n_variants} variants, log has {n_variants}")
        else:
            model = Model.initialize(encoder.schema, n_variants, m.s, m.o, m.seed, m.init_center,
                                     m.init_spread, m.bound_b)
            state = TrainerState.fresh(tcfg)
        algos.append(OffSet(model, tcfg, state))
    b = cfg.baselines
    for name in b.enabled:
        if name == "popularity":
            algos.append(Popularity(n_variants, b.decay_factor, b.decay_cadence))
        elif name == "random":
            algos.append(RandomRanker(n_variants, b.random_seed))
    if not algos:
        raise InvalidConfig("no algorithms enabled")
    return algos


def cmd_replay(args) -> int:
    cfg, with_offset = _load(args)
    p = cfg.protocol
    protocol = ReplayProtocol(p.warmup, p.warmup_unit, p.mode, p.confidence)
    log = read_log(cfg.paths.log)
    test = read_log(cfg.paths.test_log) if p.mode == "train_test" else None
    encoder = ProfileEncoder(log.demographics, cfg.model.age_bucket)
    algos = build_algorithms(cfg, encoder, log.n_variants, with_offset)
    report = replay(log, algos, protocol, encoder=encoder, test_log=test)
    text = report.to_text()
    sys.stdout.write(report.to_text(include_runtime=True))
    if cfg.paths.report:
        Path(cfg.paths.report).write_text(text)
    if cfg.paths.table:
        Path(cfg.paths.table).write_text(report.to_table())
    if cfg.paths.snapshot_out:
        off = next((a for a in algos if isinstance(a, OffSet)), None)
        if off is None:
            raise InvalidConfig("snapshot_out given but offset is not among the algorithms")
        save_snapshot(cfg.paths.snapshot_out, off.model, off.state, off.config)
    return EXIT_OK


def inspect_text(path: str | Path) -> str:
    model, state, tcfg = load_snapshot(path)
    lay = model.layout
    lines = [
        f"snapshot: {path}",
        f"features: {', '.join(f'{f.name}({len(f.values)})' for f in model.schema.features)}",
        f"layout: K={lay.K} s={lay.s} o={lay.o} D={lay.D} d={lay.d} seed={lay.seed}",
        f"variants: {model.n_variants}",
        f"bound_b: {model.bound_b}",
        "max-norm per family:",
        f"  variants: {np.abs(model.variants).max():.6g}",
    ]
    for k, f in enumerate(model.schema.features):
        lines.append(f"  {f.name}: {np.abs(model.feature_vectors(k)).max():.6g}")
    lines += [
        f"mu: {state.mu!r}",
        f"total_impressions: {state.total_impressions}",
        f"total_clicks: {state.total_clicks}",
        f"window: clicks={state.window_clicks} nonclicks={state.window_nonclicks}",
        f"config: " + " ".join(f"{k}={v}" for k, v in tcfg.to_dict().items()),
    ]
    return "\n".join(lines) + "\n"


def cmd_inspect(args) -> int:
    sys.stdout.write(inspect_text(args.snapshot))
    return EXIT_OK


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment config, layered over the preset")
    p.add_argument("--preset", help="shipped preset to start from (default: paper-synthetic; "
                                    f"available: {', '.join(config_mod.preset_names())})")
    p.add_argument("--seed", type=int, help="generator seed (generator.seed)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="offset-rec", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic train (and test) logs")
    _common(g)
    g.add_argument("--samples", type=int, help="training log size (generator.n_samples)")
    g.add_argument("--test-samples", type=int, help="test log size, 0 for none")
    g.add_argument("--ruleset", help="table2_stable, table2_trending or a YAML rule file")
    g.add_argument("--trend-switch", type=int, help="0-based index where the final rule set takes over")
    g.add_argument("--log", help="training log output path")
    g.add_argument("--test-log", help="test log output path")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("replay", help="replay logs through the algorithms and report MRR")
    _common(r)
    r.add_argument("--alpha", type=float, help="learning rate (model.alpha)")
    r.add_argument("--model-seed", type=int, help="model init and layout seed (model.seed)")
    r.add_argument("--step-rule", choices=["likelihood", "constant_ratio"])
    r.add_argument("--rescale", choices=["off", "linf_clip"])
    r.add_argument("--mode", choices=["online", "train_test"])
    r.add_argument("--warmup", type=int)
    r.add_argument("--warmup-unit", choices=["clicks", "observations"])
    r.add_argument("--algorithms", help="comma list from offset,popularity,random")
    r.add_argument("--log", help="log (training log in train_test mode)")
    r.add_argument("--test-log")
    r.add_argument("--snapshot-in", help="resume OFF-Set from this snapshot")
    r.add_argument("--snapshot-out", help="save the final OFF-Set model here")
    r.add_argument("--report", help="key-value report output path")
    r.add_argument("--table", help="tab-separated result table output path")
    r.set_defaults(func=cmd_replay)

    i = sub.add_parser("inspect", help="summarize a model snapshot")
    i.add_argument("snapshot")
    i.set_defaults(func=cmd_inspect)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidConfig, InvalidDimensions) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaMismatch, UnorderedLog, UnknownVariant, UnknownFeatureValue, CorruptSnapshot) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:
        print(f"training error: {exc}; try a smaller --alpha", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
