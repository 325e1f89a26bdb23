"""Non-personalized rankers: decayed global popularity and uniform random."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from . import _kernels
from .errors import InvalidConfig
from .model import UserProfile
from .trainer import Observation


@runtime_checkable
class RankingAlgorithm(Protocol):
    name: str
    n_variants: int

    def rank(self, profile: UserProfile) -> list[int]: ...

    def observe(self, obs: Observation) -> RankingAlgorithm: ...

    def process(self, profiles: np.ndarray, variants: np.ndarray, rewards: np.ndarray,
                score_mask: np.ndarray) -> np.ndarray: ...


class SequentialRanker:
    """Supplies ``process`` as a plain rank-then-observe loop.

    Subclasses with a faster block path must return the same ranks and end in
    the same state as this loop.
    """

    name = "sequential"
    n_variants: int

    def rank(self, profile: UserProfile) -> list[int]:
        raise NotImplementedError

    def observe(self, obs: Observation):
        raise NotImplementedError

    def process(self, profiles, variants, rewards, score_mask, timestamps=None) -> np.ndarray:
        ranks = np.zeros(len(variants), dtype=np.int64)
        for n in range(len(variants)):
            p = UserProfile(tuple(profiles[n]))
            v = int(variants[n])
            if score_mask[n]:
                ranks[n] = self.rank(p).index(v) + 1
            ts = n if timestamps is None else int(timestamps[n])
            self.observe(Observation(ts, p, v, bool(rewards[n])))
        return ranks


@dataclass
class PopularityState:
    """Decayed click/impression accumulators per variant.

    CTR of a variant is ``(clicks + prior_clicks) / (impressions + prior_impressions)``.
    """

    n_variants: int
    decay_factor: float = 0.5
    decay_cadence: int = 1_000_000
    prior_clicks: float = 1.0
    prior_impressions: float = 100.0
    clicks: np.ndarray = field(default=None)
    impressions: np.ndarray = field(default=None)
    since_decay: int = 0

    def __post_init__(self):
        if not 0 < self.decay_factor <= 1:
            raise InvalidConfig(f"decay_factor must be in (0, 1], got {self.decay_factor}")
        if self.decay_cadence < 1:
            raise InvalidConfig("decay_cadence must be >= 1")
        if self.clicks is None:
            self.clicks = np.zeros(self.n_variants)
        if self.impressions is None:
            self.impressions = np.zeros(self.n_variants)

    def ctr(self) -> np.ndarray:
        return (self.clicks + self.prior_clicks) / (self.impressions + self.prior_impressions)

    def decay(self, factor: float) -> None:
        self.clicks *= factor
        self.impressions *= factor


def popularity_rank(state: PopularityState, profile: UserProfile | None = None) -> list[int]:
    """Variants by descending smoothed CTR, ties by ascending id; ``profile`` is ignored."""
    ctr = state.ctr()
    return sorted(range(state.n_variants), key=lambda a: (-ctr[a], a))


def popularity_observe(state: PopularityState, obs: Observation) -> PopularityState:
    state.impressions[obs.variant] += 1.0
    if obs.reward:
        state.clicks[obs.variant] += 1.0
    state.since_decay += 1
    if state.since_decay == state.decay_cadence:
        state.since_decay = 0
        state.decay(state.decay_factor)
    return state


class Popularity(SequentialRanker):
    name = "popularity"

    def __init__(self, n_variants: int, decay_factor: float = 0.5, decay_cadence: int = 1_000_000,
                 prior_clicks: float = 1.0, prior_impressions: float = 100.0):
        self.state = PopularityState(n_variants, decay_factor, decay_cadence, prior_clicks, prior_impressions)

    @property
    def n_variants(self) -> int:
        return self.state.n_variants

    def rank(self, profile: UserProfile) -> list[int]:
        return popularity_rank(self.state, profile)

    def observe(self, obs: Observation) -> Popularity:
        popularity_observe(self.state, obs)
        return self

    def process(self, profiles, variants, rewards, score_mask, timestamps=None) -> np.ndarray:
        st = self.state
        ranks = np.zeros(len(variants), dtype=np.int64)
        since = np.array([st.since_decay], dtype=np.int64)
        _kernels.popularity_run(
            st.clicks, st.impressions, since, float(st.decay_factor), int(st.decay_cadence),
            float(st.prior_clicks), float(st.prior_impressions),
            np.ascontiguousarray(variants, dtype=np.int64), np.ascontiguousarray(rewards, dtype=np.int8),
            np.ascontiguousarray(score_mask, dtype=np.bool_), ranks,
        )
        st.since_decay = int(since[0])
        return ranks


def random_rank(profile: UserProfile | None, rng: np.random.Generator, n_variants: int) -> list[int]:
    return [int(a) for a in rng.permutation(n_variants)]


def expected_random_mrr(n_variants: int) -> float:
    """MRR of a uniform random permutation: the mean of 1/r over r = 1..L."""
    return sum(1.0 / r for r in range(1, n_variants + 1)) / n_variants


class RandomRanker(SequentialRanker):
    name = "random"

    def __init__(self, n_variants: int, seed: int = 0):
        self.n_variants = n_variants
        self.rng = np.random.default_rng(seed)

    def rank(self, profile: UserProfile) -> list[int]:
        return random_rank(profile, self.rng, self.n_variants)

    def observe(self, obs: Observation) -> RandomRanker:
        return self

    def process(self, profiles, variants, rewards, score_mask, timestamps=None) -> np.ndarray:
        # observe() is a no-op, so only scored rows touch the generator
        ranks = np.zeros(len(variants), dtype=np.int64)
        for n in np.flatnonzero(score_mask):
            perm = self.rng.permutation(self.n_variants)
            ranks[n] = int(np.flatnonzero(perm == variants[n])[0]) + 1
        return ranks
