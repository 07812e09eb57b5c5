"""Bandit policies and their registry."""
from __future__ import annotations

from ..errors import ConfigurationError
from .base import BanditPolicy, ContextualPolicy, SelectionTrace
from .linear import (
    EpsilonGreedyFTRL,
    FTRLProximal,
    KLLinUCB,
    LinearExp3,
    LinearFTPL,
    LinearThompson,
    LinUCB,
)
from .noncontextual import Exp3, FollowPerturbedLeader, GaussianThompson

POLICY_REGISTRY: dict[str, type[BanditPolicy]] = {
    cls.name: cls
    for cls in (
        Exp3,
        FollowPerturbedLeader,
        GaussianThompson,
        LinUCB,
        KLLinUCB,
        FTRLProximal,
        EpsilonGreedyFTRL,
        LinearExp3,
        LinearFTPL,
        LinearThompson,
    )
}


def make_policy(
    name: str,
    n_arms: int,
    dim: int | None = None,
    seed: int = 0,
    **params,
) -> BanditPolicy:
    """Instantiate a policy by registry name, validating its hyperparameters."""
    try:
        cls = POLICY_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(POLICY_REGISTRY))
        raise ConfigurationError(f"unknown policy {name!r}; known: {known}")
    try:
        if cls.contextual:
            if dim is None:
                raise ConfigurationError(f"policy {name!r} requires a context dimension")
            return cls(n_arms, dim, seed=seed, **params)
        return cls(n_arms, seed=seed, **params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for policy {name!r}: {exc}")


__all__ = [
    "BanditPolicy",
    "ContextualPolicy",
    "SelectionTrace",
    "Exp3",
    "FollowPerturbedLeader",
    "GaussianThompson",
    "LinUCB",
    "KLLinUCB",
    "FTRLProximal",
    "EpsilonGreedyFTRL",
    "LinearExp3",
    "LinearFTPL",
    "LinearThompson",
    "POLICY_REGISTRY",
    "make_policy",
]
