"""Online latent-factor ranking for perpetually cold users, with a synthetic
click-log generator, baselines and a temporal replay harness."""
from .baselines import Popularity, RandomRanker, RankingAlgorithm, expected_random_mrr
from .errors import OffsetError
from .layout import IndexLayout, build_layout, extend_feature_vector
from .log import Demographics, ObservationLog, ProfileEncoder, read_log, write_log
from .model import (Feature, FeatureSchema, Model, UserProfile, compose_user_vector, load_snapshot,
                    rank_variants, save_snapshot, score, score_all, score_bound)
from .replay import ReplayProtocol, ReplayReport, hoeffding_gap, mrr, replay
from .synth import GeneratorConfig, Rule, RuleSet, generate, table2_stable_rules, table2_trending_rules, true_ctr
from .trainer import Observation, OffSet, TrainerConfig, TrainerState, score_gradient, step_ratio, update, update_mu

__all__ = [
    "Demographics", "Feature", "FeatureSchema", "GeneratorConfig", "IndexLayout", "Model", "Observation",
    "ObservationLog", "OffSet", "OffsetError", "Popularity", "ProfileEncoder", "RandomRanker",
    "RankingAlgorithm", "ReplayProtocol", "ReplayReport", "Rule", "RuleSet", "TrainerConfig", "TrainerState",
    "UserProfile", "build_layout", "compose_user_vector", "expected_random_mrr", "extend_feature_vector",
    "generate", "hoeffding_gap", "load_snapshot", "mrr", "rank_variants", "read_log", "replay",
    "save_snapshot", "score", "score_all", "score_bound", "score_gradient", "step_ratio",
    "table2_stable_rules", "table2_trending_rules", "true_ctr", "update", "update_mu", "write_log",
]
