"""Experiment configuration: nested dataclasses loaded from YAML.

Sections: ``generator``, ``model``, ``baselines``, ``protocol``, ``paths``.
Missing keys take the dataclass defaults; unknown keys are errors.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .errors import InvalidConfig
from .log import Demographics
from .synth import RULESETS, GeneratorConfig, RuleSet


@dataclass
class GeneratorSection:
    seed: int = 0
    n_samples: int = 8_000_000
    # test log size; 0 disables it. The test log uses ``test_seed`` and the
    # final rule set, with no switch.
    test_samples: int = 8_000_000
    test_seed: int | None = None
    ruleset: str = "table2_stable"
    # rule set active before ``trend_switch``; defaults to table2_stable when
    # ``ruleset`` is table2_trending
    ruleset_before_switch: str | None = None
    trend_switch: int | None = None
    birth_year_min: int = 1930
    birth_year_max: int = 2005
    birth_year_weights: list[float] | None = None
    geo_weights: list[float] | None = None
    gender_weights: list[float] | None = None


@dataclass
class ModelSection:
    s: int = 2
    o: int = 4
    alpha: float = 0.05
    gamma: float = 0.02
    mu_update_cadence: int = 1000
    mu_initial: float = -0.01
    bound_b: float = 1.0
    rescale_mode: str = "off"
    step_rule: str = "likelihood"
    seed: int = 0
    init_center: float = 0.5
    init_spread: float = 0.1
    age_bucket: int = 1


@dataclass
class BaselineSection:
    enabled: list[str] = field(default_factory=lambda: ["popularity", "random"])
    decay_factor: float = 0.5
    decay_cadence: int = 1_000_000
    random_seed: int = 0


@dataclass
class ProtocolSection:
    mode: str = "train_test"
    warmup: int = 0
    warmup_unit: str = "clicks"
    confidence: float = 0.95


@dataclass
class PathsSection:
    log: str | None = "train.tsv"
    test_log: str | None = "test.tsv"
    snapshot_in: str | None = None
    snapshot_out: str | None = None
    report: str | None = "report.txt"
    table: str | None = None


@dataclass
class ExperimentConfig:
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    model: ModelSection = field(default_factory=ModelSection)
    baselines: BaselineSection = field(default_factory=BaselineSection)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    paths: PathsSection = field(default_factory=PathsSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def demographics(self) -> Demographics:
        g = self.generator
        return Demographics(g.birth_year_min, g.birth_year_max)

    def rulesets(self, base_dir: Path | None = None) -> tuple[RuleSet, RuleSet | None]:
        """``(rules, rules_after_switch)`` as consumed by ``synth.generate``."""
        g = self.generator
        final = load_ruleset(g.ruleset, base_dir)
        if g.trend_switch is None:
            return final, None
        before_name = g.ruleset_before_switch
        if before_name is None:
            if g.ruleset != "table2_trending":
                raise InvalidConfig("generator.ruleset_before_switch is required with a trend_switch")
            before_name = "table2_stable"
        return load_ruleset(before_name, base_dir), final

    def generator_config(self, test: bool = False) -> GeneratorConfig:
        g = self.generator
        w = {k: None if getattr(g, k) is None else tuple(getattr(g, k))
             for k in ("birth_year_weights", "geo_weights", "gender_weights")}
        if test:
            seed = g.test_seed if g.test_seed is not None else g.seed + 1
            return GeneratorConfig(seed, g.test_samples, self.demographics(), **w)
        return GeneratorConfig(g.seed, g.n_samples, self.demographics(), trend_switch=g.trend_switch, **w)


def load_ruleset(name: str, base_dir: Path | None = None) -> RuleSet:
    if name in RULESETS:
        return RULESETS[name]()
    path = Path(name)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise InvalidConfig(f"rule set {name!r} is neither a built-in ({', '.join(RULESETS)}) nor a file") from None
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidConfig(f"{path}: expected a mapping with 'variants' and 'rules'")
    return RuleSet.from_dict(data)


_SECTIONS = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _section_cls(name: str):
    return {"generator": GeneratorSection, "model": ModelSection, "baselines": BaselineSection,
            "protocol": ProtocolSection, "paths": PathsSection}[name]


def merge(base: dict, override: dict) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k].update(v)
        else:
            out[k] = v
    return out


def from_dict(d: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise InvalidConfig("config must be a mapping of sections")
    unknown = set(d) - set(_SECTIONS)
    if unknown:
        raise InvalidConfig(f"unknown config sections {sorted(unknown)}")
    sections = {}
    for name in _SECTIONS:
        cls = _section_cls(name)
        raw = d.get(name) or {}
        if not isinstance(raw, dict):
            raise InvalidConfig(f"{name}: expected a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        bad = set(raw) - known
        if bad:
            raise InvalidConfig(f"{name}: unknown fields {sorted(bad)}")
        sections[name] = cls(**raw)
    cfg = ExperimentConfig(**sections)
    validate(cfg)
    return cfg


def _expect(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise InvalidConfig(f"{where}: {msg}")


def validate(cfg: ExperimentConfig) -> None:
    """Field-level type and range checks; deeper checks happen when the
    section is turned into its runtime object."""
    ints = {"generator": ("seed", "n_samples", "test_samples", "birth_year_min", "birth_year_max"),
            "model": ("s", "o", "mu_update_cadence", "seed", "age_bucket"),
            "baselines": ("decay_cadence", "random_seed"),
            "protocol": ("warmup",)}
    for sec, names in ints.items():
        for n in names:
            v = getattr(getattr(cfg, sec), n)
            _expect(isinstance(v, int) and not isinstance(v, bool), f"{sec}.{n}", f"expected an integer, got {v!r}")
    for n in ("alpha", "gamma", "mu_initial", "bound_b", "init_center", "init_spread"):
        v = getattr(cfg.model, n)
        _expect(isinstance(v, (int, float)) and not isinstance(v, bool), f"model.{n}", f"expected a number, got {v!r}")
    g = cfg.generator
    _expect(g.n_samples >= 0, "generator.n_samples", "must be >= 0")
    _expect(g.test_samples >= 0, "generator.test_samples", "must be >= 0")
    _expect(g.birth_year_min <= g.birth_year_max, "generator.birth_year_min", "must not exceed birth_year_max")
    if g.trend_switch is not None:
        _expect(isinstance(g.trend_switch, int) and 1 <= g.trend_switch <= g.n_samples,
                "generator.trend_switch", f"must be an integer in [1, n_samples], got {g.trend_switch!r}")
    m = cfg.model
    _expect(m.s >= 0 and m.o >= 0 and m.s + m.o >= 1, "model.s/o", "need s, o >= 0 and s + o >= 1")
    _expect(m.age_bucket >= 1, "model.age_bucket", "must be >= 1")
    _expect(m.bound_b > 0, "model.bound_b", "must be positive")
    b = cfg.baselines
    _expect(isinstance(b.enabled, list), "baselines.enabled", "expected a list")
    for name in b.enabled:
        _expect(name in ("popularity", "random"), "baselines.enabled", f"unknown baseline {name!r}")
    _expect(0 < b.decay_factor <= 1, "baselines.decay_factor", "must be in (0, 1]")
    _expect(b.decay_cadence >= 1, "baselines.decay_cadence", "must be >= 1")
    p = cfg.protocol
    _expect(p.mode in ("online", "train_test"), "protocol.mode", f"unknown mode {p.mode!r}")
    _expect(p.warmup_unit in ("clicks", "observations"), "protocol.warmup_unit", f"unknown unit {p.warmup_unit!r}")
    _expect(p.warmup >= 0, "protocol.warmup", "must be >= 0")
    _expect(0 < p.confidence < 1, "protocol.confidence", "must be in (0, 1)")


def read_yaml(path: str | Path) -> dict:
    """Parse a YAML config; syntax errors carry the line and column."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark is not None else str(path)
        raise InvalidConfig(f"{where}: {getattr(exc, 'problem', exc)}") from exc
    return data or {}


def preset_names() -> list[str]:
    files = resources.files("offset_rec") / "presets"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def read_preset(name: str) -> dict:
    res = resources.files("offset_rec") / "presets" / f"{name}.yaml"
    if not res.is_file():
        raise InvalidConfig(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return yaml.safe_load(res.read_text()) or {}


def load(config_path: str | Path | None = None, preset: str | None = None,
         overrides: dict | None = None) -> ExperimentConfig:
    """Preset (default ``paper-synthetic``), then the config file, then overrides."""
    data = read_preset(preset or "paper-synthetic")
    if config_path is not None:
        data = merge(data, read_yaml(config_path))
    if overrides:
        data = merge(data, overrides)
    return from_dict(data)
