"""Rule-based synthetic click logs.

Each rule adds a CTR lift to every (user, variant) pair it matches; lifts of
all matching rules accumulate.  ``table2_stable_rules`` is the five-variant
preset with a global base rate, a mild global preference for one variant and
four strong (decade, state) -> variant preferences.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidConfig
from .log import Demographics, ObservationLog


@dataclass(frozen=True)
class User:
    birth_year: int
    geo: str
    gender: str


@dataclass(frozen=True)
class Rule:
    """A CTR lift applied to matching pairs; ``None`` fields match everything.

    ``age_range`` is an inclusive birth-year interval.
    """

    ctr_lift: float
    age_range: tuple[int, int] | None = None
    geo: str | None = None
    gender: str | None = None
    variant: int | None = None

    def matches(self, user: User, variant: int) -> bool:
        if self.age_range is not None and not self.age_range[0] <= user.birth_year <= self.age_range[1]:
            return False
        if self.geo is not None and user.geo != self.geo:
            return False
        if self.gender is not None and user.gender != self.gender:
            return False
        return self.variant is None or self.variant == variant

    def to_dict(self) -> dict:
        d = {"lift": self.ctr_lift}
        if self.age_range is not None:
            d["age"] = list(self.age_range)
        for k in ("geo", "gender", "variant"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Rule:
        unknown = set(d) - {"lift", "age", "geo", "gender", "variant"}
        if unknown:
            raise InvalidConfig(f"unknown rule fields {sorted(unknown)}")
        if "lift" not in d:
            raise InvalidConfig(f"rule {d} has no lift")
        age = d.get("age")
        if age is not None:
            if len(age) != 2:
                raise InvalidConfig(f"rule age must be [first_year, last_year], got {age}")
            age = (int(age[0]), int(age[1]))
        variant = d.get("variant")
        return cls(float(d["lift"]), age, d.get("geo"), d.get("gender"),
                   None if variant is None else int(variant))


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    n_variants: int

    def ctr_table(self, demo: Demographics) -> np.ndarray:
        """True CTR for every (birth year, geo, gender, variant) cell."""
        years = np.arange(demo.birth_year_min, demo.birth_year_max + 1)
        shape = (len(years), len(demo.geos), len(demo.genders), self.n_variants)
        table = np.zeros(shape)
        for r in self.rules:
            m_age = np.ones(len(years), bool) if r.age_range is None else \
                (years >= r.age_range[0]) & (years <= r.age_range[1])
            m_geo = np.array([r.geo is None or g == r.geo for g in demo.geos])
            m_gen = np.array([r.gender is None or g == r.gender for g in demo.genders])
            m_var = np.array([r.variant is None or a == r.variant for a in range(self.n_variants)])
            mask = m_age[:, None, None, None] & m_geo[None, :, None, None] \
                & m_gen[None, None, :, None] & m_var[None, None, None, :]
            table += r.ctr_lift * mask
        return table

    def validate(self, demo: Demographics) -> None:
        if self.n_variants < 1:
            raise InvalidConfig("rule set needs at least one variant")
        for i, r in enumerate(self.rules):
            if not 0.0 <= r.ctr_lift <= 1.0:
                raise InvalidConfig(f"rule {i}: lift {r.ctr_lift} outside [0, 1]")
            if r.variant is not None and not 0 <= r.variant < self.n_variants:
                raise InvalidConfig(f"rule {i}: variant {r.variant} outside 0..{self.n_variants - 1}")
            if r.geo is not None and r.geo not in demo.geos:
                raise InvalidConfig(f"rule {i}: unknown geo {r.geo!r}")
            if r.gender is not None and r.gender not in demo.genders:
                raise InvalidConfig(f"rule {i}: unknown gender {r.gender!r}")
            if r.age_range is not None and r.age_range[0] > r.age_range[1]:
                raise InvalidConfig(f"rule {i}: empty age range {r.age_range}")
        peak = self.ctr_table(demo).max()
        if peak > 1.0:
            raise InvalidConfig(f"accumulated CTR reaches {peak:.4f} > 1 for some user/variant pair")

    def to_dict(self) -> dict:
        return {"variants": self.n_variants, "rules": [r.to_dict() for r in self.rules]}

    @classmethod
    def from_dict(cls, d: dict) -> RuleSet:
        if "variants" not in d:
            raise InvalidConfig("rule set needs a 'variants' count")
        return cls(tuple(Rule.from_dict(r) for r in d.get("rules", [])), int(d["variants"]))


def true_ctr(user: User, variant: int, rules: RuleSet) -> float:
    return sum(r.ctr_lift for r in rules.rules if r.matches(user, variant))


def table2_stable_rules() -> RuleSet:
    return RuleSet(
        (
            Rule(0.001),
            Rule(0.01, variant=2),
            Rule(0.30, age_range=(1980, 1989), geo="NY", variant=0),
            Rule(0.30, age_range=(1950, 1959), geo="NY", variant=1),
            Rule(0.30, age_range=(1980, 1989), geo="AZ", variant=1),
            Rule(0.30, age_range=(1950, 1959), geo="AZ", variant=0),
        ),
        n_variants=5,
    )


def table2_trending_rules() -> RuleSet:
    """Stable rules with the global preference moved from variant 2 to 3."""
    stable = table2_stable_rules()
    rules = list(stable.rules)
    rules[1] = replace(rules[1], variant=3)
    return RuleSet(tuple(rules), stable.n_variants)


RULESETS = {"table2_stable": table2_stable_rules, "table2_trending": table2_trending_rules}


@dataclass(frozen=True)
class GeneratorConfig:
    """Sampling setup. Weights default to uniform; ``trend_switch`` is the
    0-based sample index from which the second rule set applies."""

    seed: int = 0
    n_samples: int = 1000
    demographics: Demographics = field(default_factory=Demographics)
    birth_year_weights: tuple[float, ...] | None = None
    geo_weights: tuple[float, ...] | None = None
    gender_weights: tuple[float, ...] | None = None
    trend_switch: int | None = None

    def validate(self) -> None:
        if self.n_samples < 0:
            raise InvalidConfig(f"n_samples must be >= 0, got {self.n_samples}")
        if self.trend_switch is not None and not 1 <= self.trend_switch <= self.n_samples:
            raise InvalidConfig(f"trend_switch {self.trend_switch} outside [1, {self.n_samples}]")
        demo = self.demographics
        for name, w, n in (("birth_year_weights", self.birth_year_weights, demo.n_years),
                           ("geo_weights", self.geo_weights, len(demo.geos)),
                           ("gender_weights", self.gender_weights, len(demo.genders))):
            if w is None:
                continue
            if len(w) != n:
                raise InvalidConfig(f"{name} has {len(w)} entries, expected {n}")
            if min(w) < 0 or sum(w) <= 0:
                raise InvalidConfig(f"{name} must be non-negative with a positive sum")


def _draw(rng: np.random.Generator, n_cats: int, weights, size: int) -> np.ndarray:
    if weights is None:
        return rng.integers(n_cats, size=size)
    p = np.asarray(weights, dtype=float)
    return rng.choice(n_cats, size=size, p=p / p.sum())


def generate(cfg: GeneratorConfig, rules: RuleSet, rules_after_switch: RuleSet | None = None) -> ObservationLog:
    """Sample ``cfg.n_samples`` observations; deterministic in ``cfg.seed``."""
    cfg.validate()
    demo = cfg.demographics
    rules.validate(demo)
    if cfg.trend_switch is not None:
        if rules_after_switch is None:
            raise InvalidConfig("trend_switch set but no rule set for after the switch")
        rules_after_switch.validate(demo)
        if rules_after_switch.n_variants != rules.n_variants:
            raise InvalidConfig("rule sets before and after the switch disagree on variant count")

    n = cfg.n_samples
    rng = np.random.default_rng(cfg.seed)
    year = _draw(rng, demo.n_years, cfg.birth_year_weights, n)
    geo = _draw(rng, len(demo.geos), cfg.geo_weights, n)
    gender = _draw(rng, len(demo.genders), cfg.gender_weights, n)
    variant = rng.integers(rules.n_variants, size=n)
    coin = rng.random(n)

    ctr = rules.ctr_table(demo)[year, geo, gender, variant]
    if cfg.trend_switch is not None:
        k = cfg.trend_switch
        ctr[k:] = rules_after_switch.ctr_table(demo)[year[k:], geo[k:], gender[k:], variant[k:]]

    return ObservationLog(
        demographics=demo,
        n_variants=rules.n_variants,
        timestamp=np.arange(1, n + 1, dtype=np.int64),
        birth_year=(year + demo.birth_year_min).astype(np.int16),
        geo=geo.astype(np.int16),
        gender=gender.astype(np.int8),
        variant=variant.astype(np.int16),
        reward=(coin < ctr).astype(np.int8),
    )
