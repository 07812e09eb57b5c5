"""Run-level metrics: entropy-adjusted reward, regret, wins, and context
diagnostics.

Natural logarithms throughout. Quantities that condition on an arm with no
pulls are reported as NaN rather than 0, so genuinely missing evidence stays
visible downstream.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError
from .features import FEATURE_NAMES, NUM_FEATURES

DEFAULT_ENTROPY_WEIGHT = 0.1
KL_SMOOTHING = 1e-3


def normalized_entropy(counts: Sequence[float]) -> float:
    """Shannon entropy of the empirical arm distribution, normalized by ln K."""
    arr = np.asarray(counts, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ContractError("normalized entropy needs at least two arms")
    if np.any(arr < 0):
        raise ContractError("counts must be nonnegative")
    total = arr.sum()
    if total <= 0:
        raise ContractError("counts must not all be zero")
    p = arr / total
    nonzero = p[p > 0]
    return float(-(nonzero * np.log(nonzero)).sum() / np.log(arr.size))


def entropy_series(arms: Sequence[int], n_arms: int) -> np.ndarray:
    """Normalized entropy of cumulative arm frequencies after each round."""
    if n_arms < 2:
        raise ContractError("n_arms must be >= 2")
    counts = np.zeros(n_arms, dtype=np.float64)
    out = np.empty(len(arms), dtype=np.float64)
    for t, arm in enumerate(arms):
        if not 0 <= arm < n_arms:
            raise ContractError(f"arm index {arm} out of range [0, {n_arms})")
        counts[arm] += 1
        out[t] = normalized_entropy(counts)
    return out


def exploration_adjusted_reward(
    arms: Sequence[int],
    rewards: Sequence[float],
    n_arms: int,
    entropy_weight: float = DEFAULT_ENTROPY_WEIGHT,
) -> float:
    """Total reward plus the entropy bonus accumulated per round."""
    if len(arms) != len(rewards):
        raise ContractError("arms and rewards must have equal length")
    if len(arms) == 0:
        raise ContractError("need at least one round")
    series = entropy_series(arms, n_arms)
    return float(np.sum(np.asarray(rewards, dtype=np.float64) + entropy_weight * series))


def cumulative_regret(
    rewards: Sequence[float], oracles: Sequence[float | None]
) -> np.ndarray:
    """Running sum of (best realized reward - obtained reward) per round."""
    if len(rewards) != len(oracles):
        raise ContractError("rewards and oracles must have equal length")
    gaps = []
    for t, (reward, oracle) in enumerate(zip(rewards, oracles), start=1):
        if oracle is None:
            raise ContractError(
                f"round {t} has no oracle reward; run with evaluate-all-arms "
                "enabled or use the synthetic environment"
            )
        gaps.append(float(oracle) - float(reward))
    return np.cumsum(gaps)


@dataclass(frozen=True)
class WinRate:
    """Percentages of query-level wins, losses, and ties versus a baseline."""

    win: float
    loss: float
    tie: float
    n: int


def win_rate(
    policy: Sequence[tuple[str, float]],
    baseline: Sequence[tuple[str, float]],
) -> WinRate:
    """Strict per-query comparison; a tie counts as neither win nor loss."""
    if len(policy) != len(baseline) or len(policy) == 0:
        raise ContractError("win rate needs equal-length nonempty runs")
    wins = losses = ties = 0
    for (pid, pr), (bid, br) in zip(policy, baseline):
        if pid != bid:
            raise ContractError(f"query ids are misaligned: {pid!r} vs {bid!r}")
        if pr > br:
            wins += 1
        elif pr < br:
            losses += 1
        else:
            ties += 1
    n = len(policy)
    return WinRate(win=100.0 * wins / n, loss=100.0 * losses / n, tie=100.0 * ties / n, n=n)


@dataclass(frozen=True)
class AccuracyTable:
    """Per-policy dataset wins (ties split) and macro-averaged accuracy."""

    policies: tuple[str, ...]
    datasets: tuple[str, ...]
    accuracy: dict[str, dict[str, float]]
    wins: dict[str, float]
    macro_average: dict[str, float]


def accuracy_table(scores: Mapping[str, Mapping[str, float]]) -> AccuracyTable:
    """Summarize a dataset-by-policy accuracy matrix.

    Within each dataset the best policy earns one win; an m-way tie for best
    splits the win as 1/m each. Wins therefore sum to the dataset count.
    """
    if not scores:
        raise ContractError("accuracy table needs at least one dataset")
    datasets = tuple(scores.keys())
    policies = tuple(scores[datasets[0]].keys())
    if len(policies) < 2:
        raise ContractError("accuracy table needs at least two policies")
    for name in datasets:
        if tuple(scores[name].keys()) != policies:
            raise ContractError(f"dataset {name!r} does not cover every policy")
    wins = {p: 0.0 for p in policies}
    for name in datasets:
        row = scores[name]
        best = max(row.values())
        leaders = [p for p in policies if row[p] == best]
        for p in leaders:
            wins[p] += 1.0 / len(leaders)
    macro = {
        p: float(np.mean([scores[name][p] for name in datasets])) for p in policies
    }
    accuracy = {name: dict(scores[name]) for name in datasets}
    return AccuracyTable(
        policies=policies,
        datasets=datasets,
        accuracy=accuracy,
        wins=wins,
        macro_average=macro,
    )


def _validate_rounds(
    arms: Sequence[int], features: Sequence[Sequence[int]], n_arms: int
) -> tuple[np.ndarray, np.ndarray]:
    arm_arr = np.asarray(arms, dtype=np.int64)
    feat_arr = np.asarray(features, dtype=np.float64)
    if arm_arr.ndim != 1 or arm_arr.size == 0:
        raise ContractError("need at least one round")
    if feat_arr.shape != (arm_arr.size, NUM_FEATURES):
        raise ContractError(
            f"features must have shape ({arm_arr.size}, {NUM_FEATURES}), got {feat_arr.shape}"
        )
    if np.any(arm_arr < 0) or np.any(arm_arr >= n_arms):
        raise ContractError("arm index out of range")
    if not np.isin(feat_arr, (0.0, 1.0)).all():
        raise ContractError("features must be binary")
    return arm_arr, feat_arr


def feature_uplift(
    arms: Sequence[int],
    features: Sequence[Sequence[int]],
    rewards: Sequence[float],
    n_arms: int,
) -> np.ndarray:
    """Mean reward difference when a feature is on versus off, per (arm, feature).

    Entries are NaN whenever either conditional set under that arm is empty.
    """
    arm_arr, feat_arr = _validate_rounds(arms, features, n_arms)
    reward_arr = np.asarray(rewards, dtype=np.float64)
    if reward_arr.shape != arm_arr.shape:
        raise ContractError("rewards must align with arms")
    out = np.full((n_arms, NUM_FEATURES), np.nan)
    for arm in range(n_arms):
        mask = arm_arr == arm
        if not mask.any():
            continue
        feats = feat_arr[mask]
        rew = reward_arr[mask]
        for i in range(NUM_FEATURES):
            on = rew[feats[:, i] == 1.0]
            off = rew[feats[:, i] == 0.0]
            if on.size and off.size:
                out[arm, i] = on.mean() - off.mean()
    return out


def per_feature_variance(
    arms: Sequence[int],
    features: Sequence[Sequence[int]],
    n_arms: int,
) -> np.ndarray:
    """Bernoulli variance p(1-p) of each feature among rounds won by each arm.

    Rows of arms never pulled are NaN; a feature constant under an arm gives 0.
    """
    arm_arr, feat_arr = _validate_rounds(arms, features, n_arms)
    out = np.full((n_arms, NUM_FEATURES), np.nan)
    for arm in range(n_arms):
        mask = arm_arr == arm
        if not mask.any():
            continue
        p = feat_arr[mask].mean(axis=0)
        out[arm] = p * (1.0 - p)
    return out


def _bernoulli_kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(
        np.sum(p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q)))
    )


def inter_arm_context_kl(
    arms: Sequence[int],
    features: Sequence[Sequence[int]],
    n_arms: int,
    smoothing: float = KL_SMOOTHING,
) -> np.ndarray:
    """Symmetric KL between per-arm context distributions.

    Each arm's contexts are modelled as independent per-feature Bernoullis
    with add-epsilon smoothing, so arms without pulls are still defined
    (every smoothed rate is then 1/2). The matrix is symmetric with a zero
    diagonal.
    """
    if smoothing <= 0:
        raise ContractError("smoothing must be positive")
    arm_arr, feat_arr = _validate_rounds(arms, features, n_arms)
    rates = np.empty((n_arms, NUM_FEATURES))
    for arm in range(n_arms):
        mask = arm_arr == arm
        count = feat_arr[mask].sum(axis=0) if mask.any() else np.zeros(NUM_FEATURES)
        n = int(mask.sum())
        rates[arm] = (count + smoothing) / (n + 2.0 * smoothing)
    out = np.zeros((n_arms, n_arms))
    for a in range(n_arms):
        for b in range(a + 1, n_arms):
            value = _bernoulli_kl(rates[a], rates[b]) + _bernoulli_kl(rates[b], rates[a])
            out[a, b] = value
            out[b, a] = value
    return out


def per_arm_theta_export(policy, include_bias: bool = True) -> dict[str, list]:
    """Coefficient estimates of a contextual policy, labelled by feature name.

    Non-contextual policies raise a contract error from `theta_matrix`.
    """
    matrix = policy.theta_matrix()
    labels = list(FEATURE_NAMES) + (["bias"] if include_bias else [])
    if matrix.shape[1] != len(labels):
        raise ContractError(
            f"policy dimension {matrix.shape[1]} does not match the "
            f"{len(labels)}-coordinate feature schema"
        )
    return {
        "labels": labels,
        "theta": [[float(v) for v in row] for row in matrix],
    }
