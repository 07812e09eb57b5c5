"""Shared plumbing for bandit policies.

Every policy owns its RNG (seeded at construction) and consumes draws in a
fixed order, so a rerun from the same seed reproduces arm choices and traces
bit for bit. Ties in scores always resolve to the lowest arm index.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ..errors import ConfigurationError, ContractError


@dataclass(frozen=True)
class SelectionTrace:
    """Record of one arm selection.

    `draws` holds the raw RNG scalars consumed by the decision where the
    policy uses O(K) of them; policies that consume larger noise blocks
    (contextual Thompson sampling) leave it empty and rely on the seed for
    exact replay. `probs` is set only for policies that sample from an
    explicit distribution.
    """

    arm: int
    scores: tuple[float, ...]
    probs: tuple[float, ...] | None = None
    draws: tuple[float, ...] = field(default=())

    def as_dict(self) -> dict:
        out: dict = {"arm": self.arm, "scores": list(self.scores)}
        if self.probs is not None:
            out["probs"] = list(self.probs)
        if self.draws:
            out["draws"] = list(self.draws)
        return out


class BanditPolicy(abc.ABC):
    """Interface shared by all policies: select an arm, then observe a reward.

    The caller alternates `select` and `update` for the same round; no state
    changes between the two, so importance weights recomputed at update time
    match the sampling distribution used at selection time.
    """

    name: ClassVar[str]
    contextual: ClassVar[bool]

    def __init__(self, n_arms: int, seed: int = 0) -> None:
        if n_arms < 2:
            raise ConfigurationError(f"n_arms must be >= 2, got {n_arms}")
        self.n_arms = int(n_arms)
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)

    @abc.abstractmethod
    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        """Choose an arm for the current round."""

    @abc.abstractmethod
    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        """Incorporate the observed reward for the chosen arm only."""

    def theta_matrix(self) -> np.ndarray:
        """Per-arm coefficient estimates, rows in arm order (contextual only)."""
        raise ContractError(f"policy {self.name!r} has no per-arm coefficients")

    def _check_arm(self, arm: int) -> None:
        if not 0 <= arm < self.n_arms:
            raise ContractError(f"arm index {arm} out of range [0, {self.n_arms})")

    def _check_reward(self, reward: float) -> float:
        r = float(reward)
        if not np.isfinite(r) or not 0.0 <= r <= 1.0:
            raise ContractError(f"reward must lie in [0, 1], got {reward!r}")
        return r


class ContextualPolicy(BanditPolicy):
    """Base for linear policies over a fixed-dimension context."""

    contextual: ClassVar[bool] = True

    def __init__(self, n_arms: int, dim: int, seed: int = 0) -> None:
        super().__init__(n_arms, seed=seed)
        if dim < 1:
            raise ConfigurationError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)

    def _check_context(self, context: np.ndarray | None) -> np.ndarray:
        if context is None:
            raise ContractError(f"policy {self.name!r} requires a context vector")
        x = np.asarray(context, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ContractError(f"context must have shape ({self.dim},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ContractError("context contains non-finite values")
        return x


def sample_categorical(rng: np.random.Generator, probs: np.ndarray) -> tuple[int, float]:
    """Inverse-CDF draw; returns (index, consumed uniform).

    Explicit cumulative-sum sampling keeps the draw reproducible across
    numpy versions and lets traces record the single uniform used.
    """
    u = float(rng.random())
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, len(probs) - 1), u


def gumbel_from_uniform(u: np.ndarray, eta: float) -> np.ndarray:
    """Map uniforms in (0,1) to Gumbel(0, 1/eta) perturbations."""
    return -np.log(-np.log(u)) / eta
