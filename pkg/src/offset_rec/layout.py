"""Assignment of latent indices to features and feature pairs."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import InvalidDimensions, LengthMismatch


@dataclass(frozen=True, eq=False)
class IndexLayout:
    """Partition of ``0..D-1`` into standalone slots and pairwise overlap slots.

    ``feature_slots[j]`` lists the ``d`` indices feature ``j`` writes into:
    its ``s`` standalone indices first, then one block of ``o`` indices per
    other feature in ascending feature order.
    """

    K: int
    s: int
    o: int
    seed: int
    feature_slots: np.ndarray  # (K, d) int64
    standalone_slots: np.ndarray  # (K, s) int64
    pair_slots: dict[tuple[int, int], np.ndarray]
    # partner feature (or -1) and its slot position for every (j, t)
    partner_feat: np.ndarray = field(repr=False)
    partner_pos: np.ndarray = field(repr=False)

    @property
    def D(self) -> int:
        return self.K * self.s + self.K * (self.K - 1) // 2 * self.o

    @property
    def d(self) -> int:
        return self.s + (self.K - 1) * self.o

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(combinations(range(self.K), 2))

    def owners(self) -> list[tuple[int, ...]]:
        """Owning feature(s) for each latent index."""
        own: list[list[int]] = [[] for _ in range(self.D)]
        for j in range(self.K):
            for i in self.feature_slots[j]:
                own[int(i)].append(j)
        return [tuple(x) for x in own]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndexLayout):
            return NotImplemented
        return (
            (self.K, self.s, self.o, self.seed) == (other.K, other.s, other.o, other.seed)
            and np.array_equal(self.feature_slots, other.feature_slots)
        )


def build_layout(K: int, s: int, o: int, seed: int = 0) -> IndexLayout:
    """Build a seeded layout for ``K`` features.

    The seed only permutes which physical index lands in which slot; the
    ownership structure depends on ``(K, s, o)`` alone.

    >>> lay = build_layout(3, 2, 4)
    >>> lay.D, lay.d
    (18, 10)
    """
    if K < 1 or s < 0 or o < 0 or s + o < 1:
        raise InvalidDimensions(f"need K>=1, s>=0, o>=0, s+o>=1; got K={K}, s={s}, o={o}")
    pairs = list(combinations(range(K), 2))
    D = K * s + len(pairs) * o
    if D == 0:
        # K=1 with s=0: nothing to own
        raise InvalidDimensions(f"layout K={K}, s={s}, o={o} has no latent entries")
    perm = np.random.default_rng(seed).permutation(D).astype(np.int64)

    standalone = perm[: K * s].reshape(K, s)
    rest = perm[K * s:]
    pair_slots = {p: rest[n * o:(n + 1) * o].copy() for n, p in enumerate(pairs)}

    d = s + (K - 1) * o
    slots = np.empty((K, d), dtype=np.int64)
    partner_feat = np.full((K, d), -1, dtype=np.int64)
    partner_pos = np.full((K, d), -1, dtype=np.int64)
    for j in range(K):
        slots[j, :s] = standalone[j]
        for b, k in enumerate(x for x in range(K) if x != j):
            lo = s + b * o
            slots[j, lo:lo + o] = pair_slots[(min(j, k), max(j, k))]
            partner_feat[j, lo:lo + o] = k
    # position of each shared index inside the partner's slot list
    for j in range(K):
        for t in range(s, d):
            k = partner_feat[j, t]
            partner_pos[j, t] = int(np.flatnonzero(slots[k] == slots[j, t])[0])

    return IndexLayout(K, s, o, seed, slots, standalone, pair_slots, partner_feat, partner_pos)


def extend_feature_vector(v: np.ndarray, j: int, layout: IndexLayout) -> np.ndarray:
    """Place ``v`` at feature ``j``'s slots inside a length-D vector of ones."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (layout.d,):
        raise LengthMismatch(f"expected length {layout.d}, got shape {v.shape}")
    out = np.ones(layout.D)
    out[layout.feature_slots[j]] = v
    return out
