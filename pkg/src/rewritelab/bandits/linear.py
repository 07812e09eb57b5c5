"""Contextual-linear policies over a shared per-arm design.

The ridge-based policies keep per-arm Gram matrices A = lambda*I + sum(x x^T)
and reward sums b = sum(r x). Inverses are maintained by Sherman-Morrison
rank-1 updates with a full refactorization every `REFRESH_EVERY` updates per
arm, which keeps drift against a dense solve far below the 1e-8 contract.
"""
from __future__ import annotations

from typing import ClassVar

import numpy as np

from ..errors import ConfigurationError
from .base import ContextualPolicy, SelectionTrace, gumbel_from_uniform, sample_categorical

REFRESH_EVERY = 1000


def klucb_exploration_bound(t: int, n_pulls: int, c: float) -> float:
    """Nonnegative per-arm exploration budget used by the KL-flavoured LinUCB."""
    raw = (np.log(t) + c * np.log(np.log(t + 1.0))) / max(1, n_pulls)
    return float(max(raw, 0.0))


def ftrl_weights(
    z: np.ndarray, n: np.ndarray, alpha: float, beta: float, l1: float, l2: float
) -> np.ndarray:
    """Closed-form per-coordinate weights of FTRL-proximal.

    Coordinates whose accumulated gradient stays within the l1 dead zone are
    exactly zero.
    """
    w = np.zeros_like(z)
    active = np.abs(z) > l1
    denom = (beta + np.sqrt(n[active])) / alpha + l2
    w[active] = -(z[active] - np.sign(z[active]) * l1) / denom
    return w


class _RidgeArms:
    """Per-arm ridge statistics with incrementally maintained inverses."""

    def __init__(self, n_arms: int, dim: int, ridge: float) -> None:
        if ridge <= 0.0:
            raise ConfigurationError(f"ridge must be > 0, got {ridge}")
        self.ridge = float(ridge)
        eye = np.eye(dim, dtype=np.float64)
        self.gram = np.repeat(eye[None, :, :] * self.ridge, n_arms, axis=0)
        self.gram_inv = np.repeat(eye[None, :, :] / self.ridge, n_arms, axis=0)
        self.target = np.zeros((n_arms, dim), dtype=np.float64)
        self.theta = np.zeros((n_arms, dim), dtype=np.float64)
        self._since_refresh = np.zeros(n_arms, dtype=np.int64)

    def observe(self, arm: int, x: np.ndarray, reward: float) -> None:
        self.gram[arm] += np.outer(x, x)
        self.target[arm] += reward * x
        inv_x = self.gram_inv[arm] @ x
        self.gram_inv[arm] -= np.outer(inv_x, inv_x) / (1.0 + float(x @ inv_x))
        self._since_refresh[arm] += 1
        if self._since_refresh[arm] >= REFRESH_EVERY:
            self.gram_inv[arm] = np.linalg.inv(self.gram[arm])
            self._since_refresh[arm] = 0
        self.theta[arm] = self.gram_inv[arm] @ self.target[arm]


class LinUCB(ContextualPolicy):
    """Upper-confidence selection over per-arm ridge regressions."""

    name: ClassVar[str] = "linucb"

    def __init__(
        self,
        n_arms: int,
        dim: int,
        alpha: float = 1.0,
        ridge: float = 1.0,
        seed: int = 0,
    ) -> None:
        super().__init__(n_arms, dim, seed=seed)
        if alpha < 0.0:
            raise ConfigurationError(f"alpha must be >= 0, got {alpha}")
        self.alpha = float(alpha)
        self.arms = _RidgeArms(self.n_arms, self.dim, ridge)

    def scores(self, x: np.ndarray) -> np.ndarray:
        means = self.arms.theta @ x
        widths = np.sqrt(np.maximum(np.einsum("i,aij,j->a", x, self.arms.gram_inv, x), 0.0))
        return means + self.alpha * widths

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        x = self._check_context(context)
        scores = self.scores(x)
        return SelectionTrace(arm=int(np.argmax(scores)), scores=tuple(scores))

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        x = self._check_context(context)
        self.arms.observe(arm, x, self._check_reward(reward))

    def theta_matrix(self) -> np.ndarray:
        return self.arms.theta.copy()


class KLLinUCB(ContextualPolicy):
    """LinUCB with a count-based, KL-UCB-style exploration budget."""

    name: ClassVar[str] = "linucb-kl"

    def __init__(
        self,
        n_arms: int,
        dim: int,
        c: float = 3.0,
        ridge: float = 1.0,
        seed: int = 0,
    ) -> None:
        super().__init__(n_arms, dim, seed=seed)
        if c <= 0.0:
            raise ConfigurationError(f"c must be > 0, got {c}")
        self.c = float(c)
        self.arms = _RidgeArms(self.n_arms, self.dim, ridge)
        self.counts = np.zeros(self.n_arms, dtype=np.int64)
        self._rounds_observed = 0

    def scores(self, x: np.ndarray, t: int) -> np.ndarray:
        means = self.arms.theta @ x
        variances = np.maximum(np.einsum("i,aij,j->a", x, self.arms.gram_inv, x), 0.0)
        bounds = np.array(
            [klucb_exploration_bound(t, int(n), self.c) for n in self.counts]
        )
        return means + np.sqrt(2.0 * variances * bounds)

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        x = self._check_context(context)
        scores = self.scores(x, self._rounds_observed + 1)
        return SelectionTrace(arm=int(np.argmax(scores)), scores=tuple(scores))

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        x = self._check_context(context)
        self.arms.observe(arm, x, self._check_reward(reward))
        self.counts[arm] += 1
        self._rounds_observed += 1

    def theta_matrix(self) -> np.ndarray:
        return self.arms.theta.copy()


class FTRLProximal(ContextualPolicy):
    """Per-arm FTRL-proximal regression; selection is greedy on predicted reward."""

    name: ClassVar[str] = "ftrl"

    def __init__(
        self,
        n_arms: int,
        dim: int,
        alpha: float = 1.0,
        beta: float = 1.0,
        l1: float = 0.01,
        l2: float = 0.0,
        seed: int = 0,
    ) -> None:
        super().__init__(n_arms, dim, seed=seed)
        if alpha <= 0.0:
            raise ConfigurationError(f"alpha must be > 0, got {alpha}")
        if beta < 0.0:
            raise ConfigurationError(f"beta must be >= 0, got {beta}")
        if l1 < 0.0:
            raise ConfigurationError(f"l1 must be >= 0, got {l1}")
        if l2 < 0.0:
            raise ConfigurationError(f"l2 must be >= 0, got {l2}")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.l1 = float(l1)
        self.l2 = float(l2)
        self.z = np.zeros((self.n_arms, self.dim), dtype=np.float64)
        self.n = np.zeros((self.n_arms, self.dim), dtype=np.float64)

    def weights(self, arm: int) -> np.ndarray:
        self._check_arm(arm)
        return ftrl_weights(self.z[arm], self.n[arm], self.alpha, self.beta, self.l1, self.l2)

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        x = self._check_context(context)
        scores = np.array([float(self.weights(a) @ x) for a in range(self.n_arms)])
        return SelectionTrace(arm=int(np.argmax(scores)), scores=tuple(scores))

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        x = self._check_context(context)
        r = self._check_reward(reward)
        w = self.weights(arm)
        gradient = (float(w @ x) - r) * x
        sigma = (np.sqrt(self.n[arm] + gradient**2) - np.sqrt(self.n[arm])) / self.alpha
        self.z[arm] += gradient - sigma * w
        self.n[arm] += gradient**2

    def theta_matrix(self) -> np.ndarray:
        return np.vstack([self.weights(a) for a in range(self.n_arms)])


class EpsilonGreedyFTRL(ContextualPolicy):
    """Per-arm ridge regression with epsilon-uniform exploration."""

    name: ClassVar[str] = "eps-ftrl"

    def __init__(
        self,
        n_arms: int,
        dim: int,
        epsilon: float = 0.1,
        ridge: float = 1.0,
        seed: int = 0,
    ) -> None:
        super().__init__(n_arms, dim, seed=seed)
        if not 0.0 <= epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {epsilon}")
        self.epsilon = float(epsilon)
        self.arms = _RidgeArms(self.n_arms, self.dim, ridge)

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        x = self._check_context(context)
        scores = self.arms.theta @ x
        u = float(self.rng.random())
        if u < self.epsilon:
            v = float(self.rng.random())
            arm = min(int(v * self.n_arms), self.n_arms - 1)
            draws = (u, v)
        else:
            arm = int(np.argmax(scores))
            draws = (u,)
        return SelectionTrace(arm=arm, scores=tuple(scores), draws=draws)

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        x = self._check_context(context)
        self.arms.observe(arm, x, self._check_reward(reward))

    def theta_matrix(self) -> np.ndarray:
        return self.arms.theta.copy()


class LinearExp3(ContextualPolicy):
    """Softmax-over-linear-scores bandit with importance-weighted updates."""

    name: ClassVar[str] = "linexp3"

    def __init__(
        self,
        n_arms: int,
        dim: int,
        eta: float = 0.1,
        gamma: float = 0.1,
        seed: int = 0,
    ) -> None:
        super().__init__(n_arms, dim, seed=seed)
        if eta <= 0.0:
            raise ConfigurationError(f"eta must be > 0, got {eta}")
        if not 0.0 <= gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {gamma}")
        self.eta = float(eta)
        self.gamma = float(gamma)
        self.theta = np.zeros((self.n_arms, self.dim), dtype=np.float64)

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        logits = self.theta @ x
        stable = np.exp(logits - logits.max())
        return (1.0 - self.gamma) * stable / stable.sum() + self.gamma / self.n_arms

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        x = self._check_context(context)
        probs = self.probabilities(x)
        arm, u = sample_categorical(self.rng, probs)
        return SelectionTrace(
            arm=arm,
            scores=tuple(self.theta @ x),
            probs=tuple(probs),
            draws=(u,),
        )

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        x = self._check_context(context)
        r = self._check_reward(reward)
        p = self.probabilities(x)[arm]
        self.theta[arm] += self.eta * (r / p) * x

    def theta_matrix(self) -> np.ndarray:
        return self.theta.copy()


class LinearFTPL(ContextualPolicy):
    """Perturbed-leader selection on per-arm linear scores.

    Updates accumulate reward-weighted contexts directly; there is no
    separate learning rate.
    """

    name: ClassVar[str] = "linftpl"

    def __init__(self, n_arms: int, dim: int, eta: float = 1.0, seed: int = 0) -> None:
        super().__init__(n_arms, dim, seed=seed)
        if eta <= 0.0:
            raise ConfigurationError(f"eta must be > 0, got {eta}")
        self.eta = float(eta)
        self.theta = np.zeros((self.n_arms, self.dim), dtype=np.float64)

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        x = self._check_context(context)
        u = self.rng.random(self.n_arms)
        scores = self.theta @ x + gumbel_from_uniform(u, self.eta)
        return SelectionTrace(arm=int(np.argmax(scores)), scores=tuple(scores), draws=tuple(u))

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        x = self._check_context(context)
        self.theta[arm] += self._check_reward(reward) * x

    def theta_matrix(self) -> np.ndarray:
        return self.theta.copy()


class LinearThompson(ContextualPolicy):
    """Thompson sampling over per-arm Gaussian posteriors on coefficients.

    Standard normal prior per arm; the precision gains x x^T / sigma^2 per
    observation and the mean solves the usual Bayesian ridge recursion.
    """

    name: ClassVar[str] = "ts-c"

    def __init__(
        self, n_arms: int, dim: int, sigma_noise: float = 0.5, seed: int = 0
    ) -> None:
        super().__init__(n_arms, dim, seed=seed)
        if sigma_noise <= 0.0:
            raise ConfigurationError(f"sigma_noise must be > 0, got {sigma_noise}")
        self.sigma_noise = float(sigma_noise)
        eye = np.eye(self.dim, dtype=np.float64)
        self.mu = np.zeros((self.n_arms, self.dim), dtype=np.float64)
        self.precision = np.repeat(eye[None, :, :], self.n_arms, axis=0)
        self.cov = np.repeat(eye[None, :, :], self.n_arms, axis=0)
        self._chol = np.repeat(eye[None, :, :], self.n_arms, axis=0)

    def select(self, context: np.ndarray | None = None) -> SelectionTrace:
        x = self._check_context(context)
        z = self.rng.standard_normal((self.n_arms, self.dim))
        scores = np.empty(self.n_arms, dtype=np.float64)
        for a in range(self.n_arms):
            theta_draw = self.mu[a] + self._chol[a] @ z[a]
            scores[a] = float(theta_draw @ x)
        return SelectionTrace(arm=int(np.argmax(scores)), scores=tuple(scores))

    def update(self, arm: int, context: np.ndarray | None, reward: float) -> None:
        self._check_arm(arm)
        x = self._check_context(context)
        r = self._check_reward(reward)
        noise_precision = 1.0 / self.sigma_noise**2
        stat = self.precision[arm] @ self.mu[arm] + r * noise_precision * x
        self.precision[arm] += noise_precision * np.outer(x, x)
        cov = np.linalg.inv(self.precision[arm])
        cov = (cov + cov.T) / 2.0
        self.cov[arm] = cov
        self._chol[arm] = np.linalg.cholesky(cov)
        self.mu[arm] = cov @ stat

    def posterior(self, arm: int) -> tuple[np.ndarray, np.ndarray]:
        """(mean, covariance) of the arm's coefficient posterior."""
        self._check_arm(arm)
        return self.mu[arm].copy(), self.cov[arm].copy()

    def theta_matrix(self) -> np.ndarray:
        return self.mu.copy()
