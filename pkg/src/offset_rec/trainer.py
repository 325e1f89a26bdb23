"""One-pass stochastic gradient ascent over observations.

Two step rules are available:

``likelihood`` (default)
    click step ``alpha * (1 - PC)``, non-click step ``-alpha * PC``, where
    ``PC = rate * exp(S) / E[exp(S)]`` is the softmax click probability of the
    pair. ``rate`` comes from the smoothed step ratio ``mu`` and ``E[exp(S)]``
    is a smoothed per-window mean over impressions, both refreshed every
    ``mu_update_cadence`` impressions.

``constant_ratio``
    click step ``alpha``, non-click step ``alpha * mu``.  Cheaper, but the
    objective it ascends is unbounded: without rescaling the parameters
    diverge on long streams.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Literal

import numpy as np

from . import _kernels
from .errors import InvalidConfig, InvalidCounts, UnknownFeatureValue, UnknownVariant
from .model import Model, UserProfile, rank_variants

StepRule = Literal["likelihood", "constant_ratio"]
RescaleMode = Literal["off", "linf_clip"]

_RULES = {"constant_ratio": _kernels.RULE_CONSTANT_RATIO, "likelihood": _kernels.RULE_LIKELIHOOD}


@dataclass(frozen=True)
class TrainerConfig:
    alpha: float = 0.05
    gamma: float = 0.02
    mu_update_cadence: int = 1000
    mu_initial: float = -0.01
    rescale_mode: RescaleMode = "off"
    step_rule: StepRule = "likelihood"

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidConfig(f"alpha must be > 0, got {self.alpha}")
        if not 0 < self.gamma <= 1:
            raise InvalidConfig(f"gamma must be in (0, 1], got {self.gamma}")
        if int(self.mu_update_cadence) != self.mu_update_cadence or self.mu_update_cadence < 1:
            raise InvalidConfig(f"mu_update_cadence must be a positive integer, got {self.mu_update_cadence}")
        if not self.mu_initial < 0:
            raise InvalidConfig(f"mu_initial must be negative, got {self.mu_initial}")
        if self.rescale_mode not in ("off", "linf_clip"):
            raise InvalidConfig(f"unknown rescale_mode {self.rescale_mode!r}")
        if self.step_rule not in _RULES:
            raise InvalidConfig(f"unknown step_rule {self.step_rule!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainerConfig:
        return cls(**d)


@dataclass
class TrainerState:
    mu: float = -0.01
    window_clicks: int = 0
    window_nonclicks: int = 0
    total_clicks: int = 0
    total_impressions: int = 0
    # smoothed mean of exp(score) and the running sum for the open window
    exp_mean: float = 0.0
    window_exp_sum: float = 0.0

    @classmethod
    def fresh(cls, cfg: TrainerConfig) -> TrainerState:
        return cls(mu=cfg.mu_initial)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainerState:
        return cls(**d)

    # packing for the compiled kernels
    def _pack(self) -> tuple[np.ndarray, np.ndarray]:
        f = np.array([self.mu, self.exp_mean, self.window_exp_sum], dtype=np.float64)
        c = np.array([self.window_clicks, self.window_nonclicks,
                      self.total_clicks, self.total_impressions], dtype=np.int64)
        return f, c

    def _unpack(self, f: np.ndarray, c: np.ndarray) -> None:
        self.mu = float(f[_kernels.MU])
        self.exp_mean = float(f[_kernels.EXP_MEAN])
        self.window_exp_sum = float(f[_kernels.WINDOW_EXP_SUM])
        self.window_clicks = int(c[_kernels.WINDOW_CLICKS])
        self.window_nonclicks = int(c[_kernels.WINDOW_NONCLICKS])
        self.total_clicks = int(c[_kernels.TOTAL_CLICKS])
        self.total_impressions = int(c[_kernels.TOTAL_IMPRESSIONS])


@dataclass(frozen=True)
class Observation:
    timestamp: int
    profile: UserProfile
    variant: int
    reward: bool


def step_ratio(n_clicks: int, n_nonclicks: int) -> float:
    """Ratio of the non-click step to the click step under a uniform click prior."""
    if n_nonclicks <= 0 or n_clicks < 0:
        raise InvalidCounts(f"need clicks >= 0 and non-clicks > 0, got {n_clicks}, {n_nonclicks}")
    return -n_clicks / n_nonclicks


def update_mu(state: TrainerState, cfg: TrainerConfig) -> TrainerState:
    """Smooth the current window's step ratio into ``state.mu`` and reset the window.

    A window with no non-clicks leaves ``mu`` unchanged.
    """
    f, c = state._pack()
    _kernels.refresh_mu(f, c, cfg.gamma)
    state._unpack(f, c)
    return state


def rescale(model: Model) -> Model:
    """Scale each factor family (all variant vectors; each feature's value
    vectors) by one positive constant so its max-norm is at most ``bound_b``.

    Only the variant-family scaling is guaranteed to leave every ranking
    unchanged; scaling one feature's family rescales that feature's slots of
    the user vector but not the others.
    """
    _kernels.linf_rescale(model.values, model.offsets, model.variants, model.bound_b)
    return model


def _run(model: Model, state: TrainerState, cfg: TrainerConfig, profiles: np.ndarray,
         variants: np.ndarray, rewards: np.ndarray, score_mask: np.ndarray | None = None) -> np.ndarray:
    n = len(variants)
    if score_mask is None:
        score_mask = np.zeros(n, dtype=np.bool_)
    ranks = np.zeros(n, dtype=np.int64)
    if n == 0:
        return ranks
    lay = model.layout
    f, c = state._pack()
    try:
        _kernels.offset_run(
            model.values, model.offsets, lay.feature_slots, lay.partner_feat, lay.partner_pos,
            model.variants, f, c, float(cfg.alpha), float(cfg.gamma), int(cfg.mu_update_cadence),
            _RULES[cfg.step_rule], cfg.rescale_mode == "linf_clip", model.bound_b,
            np.ascontiguousarray(profiles, dtype=np.int64),
            np.ascontiguousarray(variants, dtype=np.int64),
            np.ascontiguousarray(rewards, dtype=np.int8),
            np.ascontiguousarray(score_mask, dtype=np.bool_),
            ranks,
        )
    finally:
        state._unpack(f, c)
    return ranks


def update(model: Model, state: TrainerState, obs: Observation, cfg: TrainerConfig) -> tuple[Model, TrainerState]:
    """Apply one observation in place and return ``(model, state)``."""
    p = model.check_profile(obs.profile)
    v = model.check_variant(obs.variant)
    _run(model, state, cfg, p[None, :], np.array([v]), np.array([1 if obs.reward else 0]))
    return model, state


def score_gradient(profile: UserProfile, variant: int, model: Model) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the score w.r.t. the profile's K value vectors and the variant vector.

    Returns ``(grad_values, grad_variant)`` with shapes ``(K, d)`` and ``(D,)``.
    """
    p = model.check_profile(profile)
    v = model.check_variant(variant)
    lay = model.layout
    u = np.empty(lay.D)
    _kernels.compose_into(model.values, model.offsets, lay.feature_slots, p, u)
    grad = np.empty((lay.K, lay.d))
    _kernels.feature_gradients(model.values, model.offsets, lay.feature_slots, lay.partner_feat,
                               lay.partner_pos, p, model.variants[v], grad)
    return grad, u


class OffSet:
    """Online latent-factor ranker over feature sets."""

    name = "offset"

    def __init__(self, model: Model, config: TrainerConfig | None = None, state: TrainerState | None = None):
        self.model = model
        self.config = config if config is not None else TrainerConfig()
        self.state = state if state is not None else TrainerState.fresh(self.config)

    @property
    def n_variants(self) -> int:
        return self.model.n_variants

    def rank(self, profile: UserProfile) -> list[int]:
        return rank_variants(profile, self.model)

    def observe(self, obs: Observation) -> OffSet:
        update(self.model, self.state, obs, self.config)
        return self

    def train(self, observations: Iterable[Observation]) -> OffSet:
        for obs in observations:
            self.observe(obs)
        return self

    def process(self, profiles: np.ndarray, variants: np.ndarray, rewards: np.ndarray,
                score_mask: np.ndarray, timestamps: np.ndarray | None = None) -> np.ndarray:
        """Rank-then-train over a block; returns ranks (0 where not scored)."""
        if len(variants) and (variants.min() < 0 or variants.max() >= self.n_variants):
            raise UnknownVariant(f"log variant outside 0..{self.n_variants - 1}")
        sizes = np.asarray(self.model.schema.sizes)
        if len(profiles) and (np.any(profiles < 0) or np.any(profiles >= sizes)):
            raise UnknownFeatureValue("log profile outside schema")
        return _run(self.model, self.state, self.config, profiles, variants, rewards, score_mask)
