"""Experiment configuration: one flat document, keys mirror field names."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigurationError
from .rewards import RewardWeights

DEFAULT_MODELS = {
    "tagger": "gpt-4o-2024-11-20",
    "rewriter": "gpt-4o-2024-11-20",
    "answerer": "gpt-4o-2024-08-06",
    "judge": "gpt-4o-2024-11-20",
}

GATEWAY_MODES = ("live", "record", "replay", "synthetic")
ENV_NAMES = ("canonical", "dominant")


@dataclass
class ExperimentConfig:
    """Everything a run needs; load from YAML or JSON with `load_config`."""

    # Policy and horizon.
    policy: str = "linucb"
    policy_params: dict = field(default_factory=dict)
    n_rounds: int = 100
    seeds: tuple[int, ...] = (0,)
    include_no_rewrite: bool = False
    include_bias: bool = True

    # Reward shaping.
    weight_llm: float = 0.6
    weight_fuzz: float = 0.3
    weight_bleu: float = 0.1
    entropy_weight: float = 0.1

    # Data and outputs.
    dataset_path: str | None = None
    output_dir: str = "runs/latest"
    evaluate_all_arms: bool = False
    max_failed_round_fraction: float = 0.01

    # Gateway.
    gateway_mode: str = "synthetic"
    endpoint: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    models: dict = field(default_factory=lambda: dict(DEFAULT_MODELS))
    cache_path: str | None = None
    strict_replay: bool = True
    max_concurrent: int = 4
    max_per_minute: int = 60

    # Answer decoding.
    answer_temperature: float = 0.2
    answer_top_p: float = 1.0

    # Synthetic environment.
    env_name: str = "canonical"

    # Dataset construction.
    perturbation_overlap_min: float = 0.3

    def __post_init__(self) -> None:
        if self.gateway_mode not in GATEWAY_MODES:
            raise ConfigurationError(
                f"gateway_mode must be one of {GATEWAY_MODES}, got {self.gateway_mode!r}"
            )
        if self.env_name not in ENV_NAMES:
            raise ConfigurationError(f"env_name must be one of {ENV_NAMES}")
        if self.n_rounds < 1:
            raise ConfigurationError("n_rounds must be >= 1")
        if not self.seeds:
            raise ConfigurationError("seeds must be nonempty")
        self.seeds = tuple(int(s) for s in self.seeds)
        if any(s < 0 for s in self.seeds):
            raise ConfigurationError("seeds must be >= 0")
        if not 0.0 <= self.max_failed_round_fraction < 1.0:
            raise ConfigurationError("max_failed_round_fraction must lie in [0, 1)")
        if not 0.0 <= self.entropy_weight:
            raise ConfigurationError("entropy_weight must be >= 0")
        if not 0.0 <= self.perturbation_overlap_min <= 1.0:
            raise ConfigurationError("perturbation_overlap_min must lie in [0, 1]")
        unknown = set(self.models) - set(DEFAULT_MODELS)
        if unknown:
            raise ConfigurationError(f"unknown model purposes: {sorted(unknown)}")
        merged = dict(DEFAULT_MODELS)
        merged.update(self.models)
        self.models = merged
        # Raises if weights are invalid.
        self.reward_weights()

    def reward_weights(self) -> RewardWeights:
        return RewardWeights(llm=self.weight_llm, fuzz=self.weight_fuzz, bleu=self.weight_bleu)

    def n_arms(self) -> int:
        return 6 if self.include_no_rewrite else 5

    def context_dim(self) -> int:
        from .features import context_dim

        return context_dim(self.include_bias)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["seeds"] = list(self.seeds)
        return out


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a YAML (or JSON) config document and apply CLI overrides."""
    with open(path) as handle:
        payload = yaml.safe_load(handle)
    if payload is None:
        payload = {}
    if not isinstance(payload, dict):
        raise ConfigurationError(f"config {path} must be a mapping at top level")
    if overrides:
        payload.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    if "seeds" in payload:
        payload["seeds"] = tuple(payload["seeds"])
    return ExperimentConfig(**payload)


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        yaml.safe_dump(config.as_dict(), handle, sort_keys=True)
