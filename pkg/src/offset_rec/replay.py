"""Temporal replay of observation logs with reciprocal-rank scoring.

Only clicks are scored.  Each scored click is ranked by every algorithm
before any of them trains on it; non-clicks (and warm-up rows) only train.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import EmptyInput, InvalidConfig, SchemaMismatch, UnknownVariant, UnorderedLog
from .log import ObservationLog, ProfileEncoder

logger = logging.getLogger(__name__)

CHUNK = 1_000_000


def mrr(reciprocal_ranks: Sequence[float]) -> float:
    rr = np.asarray(reciprocal_ranks, dtype=float)
    if rr.size == 0:
        raise EmptyInput("mrr of an empty list")
    return float(rr.mean())


def hoeffding_gap(n_clicks: int, confidence: float = 0.95) -> float:
    """Smallest MRR difference between two algorithms, each scored on
    ``n_clicks`` clicks, that Hoeffding's bound calls significant."""
    if not 0 < confidence < 1:
        raise InvalidConfig(f"confidence must be in (0, 1), got {confidence}")
    if n_clicks < 1:
        raise InvalidConfig(f"n_clicks must be >= 1, got {n_clicks}")
    return 2.0 * math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n_clicks))


@dataclass(frozen=True)
class ReplayProtocol:
    """``online``: the first ``warmup`` clicks (or observations) only train,
    later clicks are scored then trained on.  ``train_test``: a whole training
    log is replayed unscored, then every click of a test log is scored."""

    warmup: int = 0
    warmup_unit: Literal["clicks", "observations"] = "clicks"
    mode: Literal["online", "train_test"] = "online"
    confidence: float = 0.95

    def __post_init__(self):
        if self.warmup < 0:
            raise InvalidConfig("warmup must be >= 0")
        if self.warmup_unit not in ("clicks", "observations"):
            raise InvalidConfig(f"unknown warmup_unit {self.warmup_unit!r}")
        if self.mode not in ("online", "train_test"):
            raise InvalidConfig(f"unknown mode {self.mode!r}")

    def scored_rows(self, rewards: np.ndarray) -> np.ndarray:
        """Mask of rows scored under the online protocol."""
        mask = rewards.astype(bool).copy()
        if self.warmup_unit == "observations":
            mask[: self.warmup] = False
        elif self.warmup > 0:
            clicks = np.flatnonzero(mask)
            cut = clicks[self.warmup - 1] + 1 if len(clicks) >= self.warmup else len(mask)
            mask[:cut] = False
        return mask


@dataclass
class AlgorithmResult:
    name: str
    clicks_scored: int
    mrr: float
    significance_gap: float
    rank_histogram: list[int]
    runtime: float = 0.0
    ranks: np.ndarray = field(default=None, repr=False)

    @property
    def flagged(self) -> bool:
        return self.clicks_scored == 0


@dataclass
class ReplayReport:
    mode: str
    observations: int
    results: dict[str, AlgorithmResult]

    def __getitem__(self, name: str) -> AlgorithmResult:
        return self.results[name]

    def to_text(self, include_runtime: bool = False) -> str:
        lines = ["[replay]", f"mode = {self.mode}", f"observations = {self.observations}"]
        for r in self.results.values():
            lines += ["", f"[{r.name}]", f"clicks_scored = {r.clicks_scored}", f"mrr = {r.mrr!r}",
                      f"significance_gap = {r.significance_gap!r}",
                      "rank_histogram = " + ",".join(map(str, r.rank_histogram))]
            if r.flagged:
                lines.append("flag = no-clicks-scored")
            if include_runtime:
                lines.append(f"runtime_s = {r.runtime:.3f}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        rows = ["algorithm\tmrr\tclicks_scored\tgap"]
        rows += [f"{r.name}\t{r.mrr!r}\t{r.clicks_scored}\t{r.significance_gap!r}" for r in self.results.values()]
        return "\n".join(rows) + "\n"


def _check(log: ObservationLog, algorithms, encoder: ProfileEncoder) -> None:
    if not log.is_ordered():
        raise UnorderedLog("log timestamps must be non-decreasing")
    for algo in algorithms:
        if len(log) and int(log.variant.max()) >= algo.n_variants:
            raise UnknownVariant(f"log references variant {int(log.variant.max())}, "
                                 f"{algo.name} knows {algo.n_variants}")
        model = getattr(algo, "model", None)
        if model is not None and model.schema != encoder.schema:
            raise SchemaMismatch(f"{algo.name}: model schema differs from the log encoding")


def replay(log: ObservationLog, algorithms: Sequence, protocol: ReplayProtocol = ReplayProtocol(),
           encoder: ProfileEncoder | None = None, test_log: ObservationLog | None = None,
           chunk_size: int = CHUNK) -> ReplayReport:
    """Feed ``log`` (then ``test_log`` in train_test mode) through every algorithm.

    Algorithms are processed one after another over each chunk; they share no
    state, so each sees exactly the stream it would see alone.
    """
    names = [a.name for a in algorithms]
    if len(set(names)) != len(names):
        raise InvalidConfig(f"duplicate algorithm names {names}")
    if protocol.mode == "train_test":
        if test_log is None:
            raise InvalidConfig("train_test mode needs a test log")
        phases = [(log, np.zeros(len(log), dtype=bool)), (test_log, test_log.reward.astype(bool))]
    else:
        if test_log is not None:
            raise InvalidConfig("a test log is only used in train_test mode")
        phases = [(log, protocol.scored_rows(log.reward))]

    encoder = encoder if encoder is not None else ProfileEncoder(log.demographics)
    for part, _ in phases:
        _check(part, algorithms, encoder)

    collected: dict[str, list[np.ndarray]] = {n: [] for n in names}
    runtime = dict.fromkeys(names, 0.0)
    total = 0
    for part, mask in phases:
        for lo in range(0, len(part), chunk_size):
            hi = min(lo + chunk_size, len(part))
            profiles = encoder.encode(part[lo:hi])
            variants = part.variant[lo:hi].astype(np.int64)
            rewards = part.reward[lo:hi]
            m = mask[lo:hi]
            ts = part.timestamp[lo:hi]
            for algo in algorithms:
                t0 = time.perf_counter()
                ranks = algo.process(profiles, variants, rewards, m, timestamps=ts)
                runtime[algo.name] += time.perf_counter() - t0
                collected[algo.name].append(ranks[m])
            total += hi - lo
            logger.debug("replayed %d observations", total)

    results = {}
    for algo in algorithms:
        ranks = np.concatenate(collected[algo.name]) if collected[algo.name] else np.zeros(0, np.int64)
        n = len(ranks)
        hist = np.bincount(ranks, minlength=algo.n_variants + 1)[1:].tolist()
        results[algo.name] = AlgorithmResult(
            name=algo.name,
            clicks_scored=n,
            mrr=mrr(1.0 / ranks) if n else float("nan"),
            significance_gap=hoeffding_gap(n, protocol.confidence) if n else float("nan"),
            rank_histogram=hist,
            runtime=runtime[algo.name],
            ranks=ranks,
        )
    return ReplayReport(protocol.mode, total, results)
