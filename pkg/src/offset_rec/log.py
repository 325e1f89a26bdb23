"""Observation logs: in-memory columns and the tab-separated file format.

File layout::

    #offset-log<TAB>version=1<TAB>variants=5<TAB>birth_years=1930-2005<TAB>geo=AL,AK,...<TAB>gender=male,female,unknown
    1<TAB>1984<TAB>NY<TAB>female<TAB>0<TAB>1
    ...

Columns: timestamp, birth_year, geo, gender, variant_id, reward (0/1).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd

from .errors import SchemaMismatch, UnknownFeatureValue
from .model import Feature, FeatureSchema, UserProfile
from .trainer import Observation

LOG_MAGIC = "#offset-log"
LOG_VERSION = 1
COLUMNS = ("timestamp", "birth_year", "geo", "gender", "variant", "reward")

US_STATES = (
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA",
    "HI", "ID", "IL", "IN", "IA", "KS", "KY", "LA", "ME", "MD",
    "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ",
    "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC",
    "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY",
)
GENDERS = ("male", "female", "unknown")


@dataclass(frozen=True)
class Demographics:
    birth_year_min: int = 1930
    birth_year_max: int = 2005
    geos: tuple[str, ...] = US_STATES
    genders: tuple[str, ...] = GENDERS

    @property
    def n_years(self) -> int:
        return self.birth_year_max - self.birth_year_min + 1


@dataclass(eq=False)
class ObservationLog:
    """Columnar, timestamp-ordered observations. ``geo``/``gender`` hold indices
    into the demographics tuples."""

    demographics: Demographics
    n_variants: int
    timestamp: np.ndarray
    birth_year: np.ndarray
    geo: np.ndarray
    gender: np.ndarray
    variant: np.ndarray
    reward: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamp)

    def __getitem__(self, sl: slice) -> ObservationLog:
        if not isinstance(sl, slice):
            raise TypeError("ObservationLog supports slicing only")
        return ObservationLog(self.demographics, self.n_variants,
                              *(getattr(self, c)[sl] for c in COLUMNS))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ObservationLog):
            return NotImplemented
        return (self.demographics == other.demographics and self.n_variants == other.n_variants
                and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in COLUMNS))

    @property
    def n_clicks(self) -> int:
        return int(self.reward.sum())

    def is_ordered(self) -> bool:
        return bool(np.all(np.diff(self.timestamp) >= 0))

    def concat(self, other: ObservationLog) -> ObservationLog:
        if (self.demographics, self.n_variants) != (other.demographics, other.n_variants):
            raise SchemaMismatch("cannot concatenate logs with different schemas")
        return ObservationLog(self.demographics, self.n_variants,
                              *(np.concatenate([getattr(self, c), getattr(other, c)]) for c in COLUMNS))

    def variant_ctr(self) -> np.ndarray:
        imps = np.bincount(self.variant, minlength=self.n_variants)
        clicks = np.bincount(self.variant, weights=self.reward, minlength=self.n_variants)
        with np.errstate(invalid="ignore", divide="ignore"):
            return clicks / imps


class ProfileEncoder:
    """Maps raw demographics to model feature ids (age, geo, gender).

    Birth years are grouped into buckets of ``age_bucket`` consecutive years
    counted from ``birth_year_min``; the default of 1 keeps every year distinct.
    """

    def __init__(self, demographics: Demographics, age_bucket: int = 1):
        if age_bucket < 1:
            raise ValueError("age_bucket must be >= 1")
        self.demographics = demographics
        self.age_bucket = age_bucket
        lo, hi = demographics.birth_year_min, demographics.birth_year_max
        labels = []
        for start in range(lo, hi + 1, age_bucket):
            end = min(start + age_bucket - 1, hi)
            labels.append(str(start) if start == end else f"{start}-{end}")
        self.schema = FeatureSchema((
            Feature("age", tuple(labels)),
            Feature("geo", demographics.geos),
            Feature("gender", demographics.genders),
        ))

    def age_id(self, birth_year):
        return (birth_year - self.demographics.birth_year_min) // self.age_bucket

    def encode(self, log: ObservationLog) -> np.ndarray:
        if log.demographics != self.demographics:
            raise SchemaMismatch("log demographics differ from the encoder's")
        out = np.empty((len(log), 3), dtype=np.int64)
        out[:, 0] = self.age_id(log.birth_year.astype(np.int64))
        out[:, 1] = log.geo
        out[:, 2] = log.gender
        return out

    def encode_user(self, birth_year: int, geo: str, gender: str) -> UserProfile:
        demo = self.demographics
        if not demo.birth_year_min <= birth_year <= demo.birth_year_max:
            raise UnknownFeatureValue(f"birth year {birth_year} outside domain")
        if geo not in demo.geos or gender not in demo.genders:
            raise UnknownFeatureValue(f"unknown geo/gender {geo!r}/{gender!r}")
        return UserProfile((self.age_id(birth_year), demo.geos.index(geo), demo.genders.index(gender)))

    def observations(self, log: ObservationLog) -> Iterator[Observation]:
        profiles = self.encode(log)
        for n in range(len(log)):
            yield Observation(int(log.timestamp[n]), UserProfile(tuple(profiles[n])),
                              int(log.variant[n]), bool(log.reward[n]))


def _header(log: ObservationLog) -> str:
    demo = log.demographics
    fields = [
        LOG_MAGIC,
        f"version={LOG_VERSION}",
        f"variants={log.n_variants}",
        f"birth_years={demo.birth_year_min}-{demo.birth_year_max}",
        "geo=" + ",".join(demo.geos),
        "gender=" + ",".join(demo.genders),
    ]
    return "\t".join(fields)


def write_log(path: str | Path, log: ObservationLog) -> None:
    demo = log.demographics
    frame = pd.DataFrame({
        "timestamp": log.timestamp,
        "birth_year": log.birth_year,
        "geo": pd.Categorical.from_codes(log.geo, categories=list(demo.geos)),
        "gender": pd.Categorical.from_codes(log.gender, categories=list(demo.genders)),
        "variant": log.variant,
        "reward": log.reward,
    })
    with open(path, "w", newline="") as fh:
        fh.write(_header(log) + "\n")
        frame.to_csv(fh, sep="\t", header=False, index=False, lineterminator="\n")


def _parse_header(line: str, path) -> tuple[Demographics, int]:
    parts = line.rstrip("\n").split("\t")
    if not parts or parts[0] != LOG_MAGIC:
        raise SchemaMismatch(f"{path}: missing {LOG_MAGIC} header")
    try:
        kv = dict(p.split("=", 1) for p in parts[1:])
        if int(kv["version"]) != LOG_VERSION:
            raise SchemaMismatch(f"{path}: unsupported log version {kv['version']}")
        lo, hi = (int(x) for x in kv["birth_years"].split("-"))
        demo = Demographics(lo, hi, tuple(kv["geo"].split(",")), tuple(kv["gender"].split(",")))
        return demo, int(kv["variants"])
    except (KeyError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: malformed header ({exc})") from exc


def read_log(path: str | Path) -> ObservationLog:
    with open(path) as fh:
        demo, n_variants = _parse_header(fh.readline(), path)
        try:
            frame = pd.read_csv(
                fh, sep="\t", header=None, names=list(COLUMNS),
                dtype={"timestamp": np.int64, "birth_year": np.int16, "geo": str,
                       "gender": str, "variant": np.int16, "reward": np.int8},
                keep_default_na=False, na_filter=False,
            )
        except pd.errors.EmptyDataError:
            frame = pd.DataFrame({c: pd.Series([], dtype=object if c in ("geo", "gender") else np.int64)
                                  for c in COLUMNS})
        except (ValueError, pd.errors.ParserError) as exc:
            raise SchemaMismatch(f"{path}: malformed row ({exc})") from exc
    geo = pd.Categorical(frame["geo"], categories=list(demo.geos)).codes
    gender = pd.Categorical(frame["gender"], categories=list(demo.genders)).codes
    if len(frame) and (geo.min() < 0 or gender.min() < 0):
        raise SchemaMismatch(f"{path}: geo/gender value not declared in header")
    by = frame["birth_year"].to_numpy().astype(np.int16)
    var = frame["variant"].to_numpy().astype(np.int16)
    rew = frame["reward"].to_numpy().astype(np.int8)
    if len(frame):
        if by.min() < demo.birth_year_min or by.max() > demo.birth_year_max:
            raise SchemaMismatch(f"{path}: birth year outside header range")
        if var.min() < 0 or var.max() >= n_variants:
            raise SchemaMismatch(f"{path}: variant id outside 0..{n_variants - 1}")
        if not np.isin(rew, (0, 1)).all():
            raise SchemaMismatch(f"{path}: reward must be 0 or 1")
    return ObservationLog(demo, n_variants, frame["timestamp"].to_numpy().astype(np.int64), by,
                          geo.astype(np.int16), gender.astype(np.int8), var, rew)
