"""Contextual-bandit query rewriting for question answering pipelines.

Ten bandit policies (linear-contextual and context-blind) choose among
prompt-based rewrite strategies per query; a composite of judge verdict,
fuzzy token overlap, and unigram precision scores each attempt. Everything
runs offline against a linear synthetic environment, or against a live
chat-completions endpoint with record/replay caching.
"""

from .arms import REWRITE_ARMS, NO_REWRITE, RewriteArm, apply_rewrite, arm_roster, render_prompt
from .bandits import POLICY_REGISTRY, make_policy
from .config import ExperimentConfig, load_config, save_config
from .datasets import DatasetRecord, load_dataset, save_dataset
from .errors import (
    CacheMissError,
    ConfigurationError,
    ContractError,
    ProtocolError,
    RewriteLabError,
    TransportError,
)
from .features import FEATURE_NAMES, FEATURE_SCHEMA, ContextVector, tag_features
from .gateway import ChatRequest, ChatResponse, Gateway, build_gateway
from .rewards import (
    RewardBreakdown,
    RewardWeights,
    bleu1,
    composite_reward,
    fuzzy_token_set,
    judge_answer,
    roc_auc,
    simplex_sweep,
)
from .runner import (
    RunSummary,
    construct_dataset,
    run_experiment,
    run_static_policy,
    simulate_policy,
    simulate_static_arm,
)
from .synthetic import EnvSpec, LinearSyntheticEnv, SyntheticLLM, canonical_env_spec

__version__ = "0.1.0"

__all__ = [
    "CacheMissError",
    "ChatRequest",
    "ChatResponse",
    "ConfigurationError",
    "ContextVector",
    "ContractError",
    "DatasetRecord",
    "EnvSpec",
    "ExperimentConfig",
    "FEATURE_NAMES",
    "FEATURE_SCHEMA",
    "Gateway",
    "LinearSyntheticEnv",
    "NO_REWRITE",
    "POLICY_REGISTRY",
    "ProtocolError",
    "REWRITE_ARMS",
    "RewardBreakdown",
    "RewardWeights",
    "RewriteArm",
    "RewriteLabError",
    "RunSummary",
    "SyntheticLLM",
    "TransportError",
    "apply_rewrite",
    "arm_roster",
    "bleu1",
    "build_gateway",
    "canonical_env_spec",
    "composite_reward",
    "construct_dataset",
    "fuzzy_token_set",
    "judge_answer",
    "load_config",
    "load_dataset",
    "make_policy",
    "render_prompt",
    "roc_auc",
    "run_experiment",
    "run_static_policy",
    "save_config",
    "save_dataset",
    "simplex_sweep",
    "simulate_policy",
    "simulate_static_arm",
    "tag_features",
]
