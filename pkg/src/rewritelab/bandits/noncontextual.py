"""Policies that ignore the query context."""
from __future__ import annotations

from typing import ClassVar

import numpy as np

from ..errors import ConfigurationError
from .base import BanditPolicy, SelectionTrace, gumbel_from_uniform, sample_categorical

# Above this magnitude the raw EXP3 weights are renormalized by their max;
# the sampling distribution is scale-invariant so behaviour is unchanged.
WEIGHT_RENORM_THRESHOLD = 1e100


def exp3_probabilities(weights: np.ndarray, gamma: float) -> np.ndarray:
    """Mixture of the weight-proportional distribution and the uniform one."""
    w = np.asarray(weights, dtype=np.float64)
    return (1.0 - gamma) * w / w.sum() + gamma / w.size


def exp3_multiplier(gamma: float, n_arms: int, prob: float, reward: float) -> float:
    """Multiplicative weight update for the pulled arm."""
    return float(np.exp(gamma * reward / (n_arms * prob)))


class Exp3(BanditPolicy):
    """Exponential-weights bandit with gamma-mixed sampling."""

    name: ClassVar[str] = "exp3"
    contextual: ClassVar[bool] = False

    def __init__(self, n_arms: int, gamma: float = 0.1, seed: int = 0) -> None:
        super().__init__(n_arms, seed=seed)
        if not 0.0 < gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {gamma}")
        self.gamma = float(gamma)
        self.weights = np.ones(self.n_arms, dtype=np.float64)

    def probabilities(self) -> np.ndarray:
        return exp3_probabilities(self.weights, self.gamma)

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        probs = self.probabilities()
        arm, u = sample_categorical(self.rng, probs)
        return SelectionTrace(
            arm=arm,
            scores=tuple(self.weights),
            probs=tuple(probs),
            draws=(u,),
        )

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        r = self._check_reward(reward)
        p = self.probabilities()[arm]
        self.weights[arm] *= exp3_multiplier(self.gamma, self.n_arms, p, r)
        top = self.weights.max()
        if top > WEIGHT_RENORM_THRESHOLD:
            self.weights /= top


class FollowPerturbedLeader(BanditPolicy):
    """Follow the perturbed leader over cumulative rewards."""

    name: ClassVar[str] = "ftpl"
    contextual: ClassVar[bool] = False

    def __init__(self, n_arms: int, eta: float = 1.0, seed: int = 0) -> None:
        super().__init__(n_arms, seed=seed)
        if eta <= 0.0:
            raise ConfigurationError(f"eta must be > 0, got {eta}")
        self.eta = float(eta)
        self.totals = np.zeros(self.n_arms, dtype=np.float64)

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        u = self.rng.random(self.n_arms)
        scores = self.totals + gumbel_from_uniform(u, self.eta)
        arm = int(np.argmax(scores))
        return SelectionTrace(arm=arm, scores=tuple(scores), draws=tuple(u))

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        self.totals[arm] += self._check_reward(reward)


class GaussianThompson(BanditPolicy):
    """Thompson sampling with independent Gaussian posteriors per arm.

    Scalar special case of the linear-Gaussian update with a constant
    regressor of 1: standard normal prior, known noise scale.
    """

    name: ClassVar[str] = "ts-nc"
    contextual: ClassVar[bool] = False

    def __init__(self, n_arms: int, sigma_noise: float = 0.5, seed: int = 0) -> None:
        super().__init__(n_arms, seed=seed)
        if sigma_noise <= 0.0:
            raise ConfigurationError(f"sigma_noise must be > 0, got {sigma_noise}")
        self.sigma_noise = float(sigma_noise)
        self.means = np.zeros(self.n_arms, dtype=np.float64)
        self.precisions = np.ones(self.n_arms, dtype=np.float64)

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        z = self.rng.standard_normal(self.n_arms)
        samples = self.means + z / np.sqrt(self.precisions)
        arm = int(np.argmax(samples))
        return SelectionTrace(arm=arm, scores=tuple(samples), draws=tuple(z))

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        r = self._check_reward(reward)
        noise_precision = 1.0 / self.sigma_noise**2
        old = self.precisions[arm]
        self.precisions[arm] = old + noise_precision
        self.means[arm] = (old * self.means[arm] + r * noise_precision) / self.precisions[arm]

    def posterior(self, arm: int) -> tuple[float, float]:
        """(mean, variance) of the arm's current posterior."""
        self._check_arm(arm)
        return float(self.means[arm]), float(1.0 / self.precisions[arm])
