"""Feature schema, user profiles, and the latent-factor model.

The model keeps all feature-value vectors in one packed ``(sum |F_k|, d)``
array with per-feature row offsets, so compiled kernels can address a
profile's vectors as ``values[offsets[k] + profile[k]]``.
"""
from __future__ import annotations

import copy
import json
import math
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import CorruptSnapshot, InvalidCounts, InvalidDimensions, UnknownFeatureValue, UnknownVariant
from .layout import IndexLayout, build_layout

SNAPSHOT_FORMAT = "offset-rec-snapshot"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Feature:
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        if not self.values:
            raise InvalidDimensions(f"feature {self.name!r} has an empty value domain")
        if len(set(self.values)) != len(self.values):
            raise InvalidDimensions(f"feature {self.name!r} has duplicate values")

    def id_of(self, value: str) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise UnknownFeatureValue(f"{self.name}={value!r}") from None


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        if not self.features:
            raise InvalidDimensions("schema needs at least one feature")

    @property
    def K(self) -> int:
        return len(self.features)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(f.values) for f in self.features)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def profile(self, **values: str) -> UserProfile:
        """Build a profile from value labels, e.g. ``schema.profile(geo="NY", ...)``."""
        missing = set(self.names) - set(values)
        if missing:
            raise UnknownFeatureValue(f"missing features {sorted(missing)}")
        return UserProfile(tuple(f.id_of(values[f.name]) for f in self.features))

    def to_dict(self) -> dict:
        return {"features": [{"name": f.name, "values": list(f.values)} for f in self.features]}

    @classmethod
    def from_dict(cls, d: dict) -> FeatureSchema:
        return cls(tuple(Feature(f["name"], tuple(f["values"])) for f in d["features"]))


@dataclass(frozen=True)
class UserProfile:
    """One value id per feature."""

    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(x) for x in self.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)


def random_profile(schema: FeatureSchema, rng: np.random.Generator) -> UserProfile:
    return UserProfile(tuple(int(rng.integers(n)) for n in schema.sizes))


class Model:
    """Feature-value vectors, ad-variant vectors and the L-inf cap ``bound_b``.

    Instances are mutated in place by the trainer; use :meth:`copy` for a
    snapshot that is safe to hand to another thread.
    """

    def __init__(self, schema: FeatureSchema, layout: IndexLayout, values: np.ndarray,
                 variants: np.ndarray, bound_b: float = 1.0):
        if layout.K != schema.K:
            raise InvalidDimensions(f"layout has K={layout.K}, schema has K={schema.K}")
        self.schema = schema
        self.layout = layout
        self.offsets = np.concatenate([[0], np.cumsum(schema.sizes)]).astype(np.int64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        variants = np.ascontiguousarray(variants, dtype=np.float64)
        if values.shape != (self.offsets[-1], layout.d):
            raise InvalidDimensions(f"values shape {values.shape} != {(int(self.offsets[-1]), layout.d)}")
        if variants.ndim != 2 or variants.shape[1] != layout.D or variants.shape[0] < 1:
            raise InvalidDimensions(f"variants shape {variants.shape} incompatible with D={layout.D}")
        if not bound_b > 0:
            raise InvalidDimensions("bound_b must be positive")
        self.values = values
        self.variants = variants
        self.bound_b = float(bound_b)

    @classmethod
    def initialize(cls, schema: FeatureSchema, n_variants: int, s: int = 2, o: int = 4,
                   seed: int = 0, init_center: float = 0.5, init_spread: float = 0.1,
                   bound_b: float = 1.0) -> Model:
        """Random model with entries uniform in ``[center - spread, center + spread]``."""
        layout = build_layout(schema.K, s, o, seed)
        rng = np.random.default_rng(seed)
        lo, hi = init_center - init_spread, init_center + init_spread
        values = rng.uniform(lo, hi, size=(sum(schema.sizes), layout.d))
        variants = rng.uniform(lo, hi, size=(n_variants, layout.D))
        return cls(schema, layout, values, variants, bound_b)

    @property
    def n_variants(self) -> int:
        return self.variants.shape[0]

    def feature_vectors(self, k: int) -> np.ndarray:
        """View of the ``(|F_k|, d)`` block for feature ``k``."""
        return self.values[self.offsets[k]:self.offsets[k + 1]]

    def feature_vector(self, k: int, value_id: int) -> np.ndarray:
        if not 0 <= value_id < self.schema.sizes[k]:
            raise UnknownFeatureValue(f"feature {k} has no value id {value_id}")
        return self.values[self.offsets[k] + value_id]

    def check_profile(self, profile: UserProfile) -> np.ndarray:
        p = profile.as_array()
        if p.shape != (self.schema.K,):
            raise UnknownFeatureValue(f"profile has {p.size} values, schema has K={self.schema.K}")
        if np.any(p < 0) or np.any(p >= np.asarray(self.schema.sizes)):
            raise UnknownFeatureValue(f"profile {profile.values} outside schema sizes {self.schema.sizes}")
        return p

    def check_variant(self, variant: int) -> int:
        if not 0 <= variant < self.n_variants:
            raise UnknownVariant(f"variant {variant} not in 0..{self.n_variants - 1}")
        return int(variant)

    def copy(self) -> Model:
        return copy.deepcopy(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Model):
            return NotImplemented
        return (
            self.schema == other.schema
            and self.layout == other.layout
            and self.bound_b == other.bound_b
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.variants, other.variants)
        )


def compose_user_vector(profile: UserProfile, model: Model) -> np.ndarray:
    p = model.check_profile(profile)
    out = np.empty(model.layout.D)
    lay = model.layout
    _kernels.compose_into(model.values, model.offsets, lay.feature_slots, p, out)
    return out


def score_all(profile: UserProfile, model: Model) -> np.ndarray:
    """Scores of every variant for one profile."""
    u = compose_user_vector(profile, model)
    out = np.empty(model.n_variants)
    _kernels.scores_into(model.variants, u, out)
    return out


def score(profile: UserProfile, variant: int, model: Model) -> float:
    return float(score_all(profile, model)[model.check_variant(variant)])


def rank_variants(profile: UserProfile, model: Model) -> list[int]:
    """Variant ids, best first; ties broken by ascending id."""
    s = score_all(profile, model)
    return sorted(range(model.n_variants), key=lambda a: (-s[a], a))


def score_bound(n_total: int, n_clicks: int) -> float:
    """Largest |score| for which the softmax click probability stays in (0, 1]."""
    if not 0 < n_clicks <= n_total:
        raise InvalidCounts(f"need 0 < clicks <= total, got clicks={n_clicks}, total={n_total}")
    return 0.5 * math.log(n_total / n_clicks)


# -- snapshots ---------------------------------------------------------------

def save_snapshot(path: str | Path, model: Model, state=None, config=None) -> None:
    """Write model, trainer state and trainer config to a versioned ``.npz``."""
    from .trainer import TrainerConfig, TrainerState

    state = state if state is not None else TrainerState()
    config = config if config is not None else TrainerConfig()
    lay = model.layout
    meta = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "schema": model.schema.to_dict(),
        "layout": {"K": lay.K, "s": lay.s, "o": lay.o, "seed": lay.seed},
        "n_variants": model.n_variants,
        "bound_b": model.bound_b,
        "state": state.to_dict(),
        "config": config.to_dict(),
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
            feature_slots=lay.feature_slots,
            values=model.values,
            variants=model.variants,
            mu=np.array([state.mu]),
        )


def load_snapshot(path: str | Path):
    """Inverse of :func:`save_snapshot`; returns ``(model, state, config)``."""
    from .trainer import TrainerConfig, TrainerState

    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in ("meta", "feature_slots", "values", "variants", "mu")}
    except (zipfile.BadZipFile, EOFError, ValueError, OSError, KeyError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise CorruptSnapshot(f"{path}: {exc}") from exc
    try:
        meta = json.loads(arrays["meta"].tobytes().decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptSnapshot(f"{path}: unreadable header") from exc
    if meta.get("format") != SNAPSHOT_FORMAT:
        raise CorruptSnapshot(f"{path}: not a snapshot file")
    if meta.get("version") != SNAPSHOT_VERSION:
        raise CorruptSnapshot(f"{path}: unsupported snapshot version {meta.get('version')}")
    try:
        schema = FeatureSchema.from_dict(meta["schema"])
        lay = meta["layout"]
        layout = build_layout(lay["K"], lay["s"], lay["o"], lay["seed"])
        if not np.array_equal(layout.feature_slots, arrays["feature_slots"]):
            raise CorruptSnapshot(f"{path}: slot table does not match layout seed")
        if arrays["variants"].shape[0] != meta["n_variants"]:
            raise CorruptSnapshot(f"{path}: variant count mismatch")
        model = Model(schema, layout, arrays["values"], arrays["variants"], meta["bound_b"])
        state = TrainerState.from_dict(meta["state"])
        # the JSON float is informational; the array copy is authoritative
        state.mu = float(arrays["mu"][0])
        config = TrainerConfig.from_dict(meta["config"])
    except (KeyError, TypeError, InvalidDimensions) as exc:
        raise CorruptSnapshot(f"{path}: {exc}") from exc
    return model, state, config


