"""Offline linear-reward environment and its chat-completion adapter.

The numeric side draws Bernoulli feature contexts and realizes every arm's
noisy reward each round, so exact per-round regret is always available. The
chat adapter (`SyntheticLLM`) lets the full text pipeline (tag, rewrite,
answer, judge) run against the same environment with zero network traffic.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Collection, Mapping, Sequence

import numpy as np

from .arms import RewriteArm, arm_roster
from .datasets import DatasetRecord
from .errors import ConfigurationError, ContractError, ProtocolError
from .features import NUM_FEATURES, ContextVector
from .gateway import ChatRequest, ChatResponse


@dataclass(frozen=True)
class EnvSpec:
    """Defines a linear-Gaussian reward model over binary feature contexts.

    `theta` has one row per arm over `dim` coordinates; when `include_bias`
    is set the last coordinate multiplies a constant 1. Construction proves,
    by interval arithmetic over all binary contexts, that every noiseless
    reward lies in [0, 1].
    """

    n_arms: int
    dim: int
    theta: tuple[tuple[float, ...], ...]
    context_p: tuple[float, ...]
    noise_sigma: float
    include_bias: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_arms < 2:
            raise ConfigurationError(f"n_arms must be >= 2, got {self.n_arms}")
        n_features = self.dim - (1 if self.include_bias else 0)
        if n_features < 1:
            raise ConfigurationError(f"dim {self.dim} leaves no feature coordinates")
        matrix = np.asarray(self.theta, dtype=np.float64)
        if matrix.shape != (self.n_arms, self.dim):
            raise ConfigurationError(
                f"theta must have shape ({self.n_arms}, {self.dim}), got {matrix.shape}"
            )
        probs = np.asarray(self.context_p, dtype=np.float64)
        if probs.shape != (n_features,):
            raise ConfigurationError(
                f"context_p must have {n_features} entries, got {probs.shape}"
            )
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ConfigurationError("context_p entries must lie in [0, 1]")
        if self.noise_sigma < 0.0:
            raise ConfigurationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        for arm in range(self.n_arms):
            features = matrix[arm, :n_features]
            base = matrix[arm, -1] if self.include_bias else 0.0
            lowest = base + features[features < 0].sum()
            highest = base + features[features > 0].sum()
            if lowest < -1e-12 or highest > 1.0 + 1e-12:
                worst = np.where(features < 0, 1, 0) if lowest < 0 else np.where(
                    features > 0, 1, 0
                )
                raise ConfigurationError(
                    f"arm {arm}: noiseless reward range [{lowest:.6g}, {highest:.6g}] "
                    f"leaves [0, 1] at context {worst.tolist()}"
                )

    @property
    def n_features(self) -> int:
        return self.dim - (1 if self.include_bias else 0)

    def theta_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=np.float64)

    @classmethod
    def build(
        cls,
        theta: Sequence[Sequence[float]],
        context_p: float | Sequence[float],
        noise_sigma: float,
        include_bias: bool = True,
        seed: int = 0,
    ) -> "EnvSpec":
        matrix = np.asarray(theta, dtype=np.float64)
        n_arms, dim = matrix.shape
        n_features = dim - (1 if include_bias else 0)
        if np.isscalar(context_p):
            probs = tuple([float(context_p)] * n_features)
        else:
            probs = tuple(float(p) for p in context_p)
        return cls(
            n_arms=n_arms,
            dim=dim,
            theta=tuple(tuple(float(v) for v in row) for row in matrix),
            context_p=probs,
            noise_sigma=float(noise_sigma),
            include_bias=include_bias,
            seed=seed,
        )


@dataclass(frozen=True)
class EnvDraw:
    """One round of the environment: context plus every arm's outcome.

    `oracle` is the best realized reward this round; a policy only ever
    observes `realized[chosen]`.
    """

    t: int
    features: tuple[int, ...]
    x: np.ndarray
    means: np.ndarray
    realized: np.ndarray
    oracle: float


class LinearSyntheticEnv:
    """Draws contexts and noisy linear rewards per the spec's reward model."""

    def __init__(self, spec: EnvSpec) -> None:
        self.spec = spec
        self.theta = spec.theta_array()
        self.context_p = np.asarray(spec.context_p, dtype=np.float64)
        self.rng = np.random.default_rng(spec.seed)
        self.rounds = 0
        self.oracle_total = 0.0

    def draw(self) -> EnvDraw:
        features = (self.rng.random(self.spec.n_features) < self.context_p).astype(np.int64)
        x = features.astype(np.float64)
        if self.spec.include_bias:
            x = np.append(x, 1.0)
        means = self.theta @ x
        noise = self.rng.standard_normal(self.spec.n_arms) * self.spec.noise_sigma
        realized = np.clip(means + noise, 0.0, 1.0)
        oracle = float(realized.max())
        self.rounds += 1
        self.oracle_total += oracle
        return EnvDraw(
            t=self.rounds,
            features=tuple(int(f) for f in features),
            x=x,
            means=means,
            realized=realized,
            oracle=oracle,
        )

    def generate(self, n_rounds: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized batch of rounds: (contexts, means, realized, oracle).

        Consumes the generator in one block per array, so the stream differs
        from repeated `draw()` calls; use one style per experiment.
        """
        if n_rounds < 1:
            raise ContractError("n_rounds must be >= 1")
        feats = (
            self.rng.random((n_rounds, self.spec.n_features)) < self.context_p
        ).astype(np.float64)
        if self.spec.include_bias:
            contexts = np.hstack([feats, np.ones((n_rounds, 1))])
        else:
            contexts = feats
        means = contexts @ self.theta.T
        noise = self.rng.standard_normal((n_rounds, self.spec.n_arms)) * self.spec.noise_sigma
        realized = np.clip(means + noise, 0.0, 1.0)
        oracle = realized.max(axis=1)
        self.rounds += n_rounds
        self.oracle_total += float(oracle.sum())
        return contexts, means, realized, oracle


def canonical_env_spec(seed: int = 0, n_arms: int = 5) -> EnvSpec:
    """Context-dependent benchmark: arm a is strong when feature a is on and
    feature a+5 is off, so the best arm changes with the context while every
    arm's marginal mean is identical. Context-blind policies cannot separate
    the arms; contextual ones can."""
    if not 2 <= n_arms <= 6:
        raise ConfigurationError("canonical env supports 2..6 arms")
    dim = NUM_FEATURES + 1
    theta = np.zeros((n_arms, dim))
    theta[:, -1] = 0.5
    for arm in range(n_arms):
        theta[arm, arm] = 0.3
        theta[arm, arm + 5] = -0.2
    return EnvSpec.build(theta, context_p=0.3, noise_sigma=0.05, seed=seed)


def dominant_arm_env_spec(seed: int = 0, gap: float = 0.2, n_arms: int = 5) -> EnvSpec:
    """Stationary benchmark: one arm's mean beats the rest by `gap`,
    independent of the context (signal rides on the bias coordinate)."""
    if not 0.0 < gap <= 0.5:
        raise ConfigurationError("gap must lie in (0, 0.5]")
    dim = NUM_FEATURES + 1
    theta = np.zeros((n_arms, dim))
    theta[:, -1] = 0.5
    theta[0, -1] = 0.5 + gap
    return EnvSpec.build(theta, context_p=0.3, noise_sigma=0.1, seed=seed)


_PERTURB_INDEX = re.compile(r"variant #(\d+)")
_ARM_MARKER = re.compile(r"\[ARM:([A-Za-z]+)\]")
_PERTURB_MARKER = re.compile(r"\[PERTURB:(\d+)\]")

EQUIVALENCE_MARKER = "semantically equivalent"


class SyntheticLLM:
    """Chat adapter that answers every pipeline purpose from the environment.

    Tagger calls report the current draw's features; rewriter calls echo the
    query behind an arm or perturbation marker; answerer calls return the
    bound record's reference with probability equal to the acting arm's mean
    reward (or per-record tables during dataset construction); judge calls
    grade by exact string comparison against the parsed prompt sections.

    `failing_perturbations` and `unanswerable_ids` exist so tests can
    engineer dataset-construction outcomes precisely.
    """

    def __init__(
        self,
        env: LinearSyntheticEnv,
        include_no_rewrite: bool = False,
        failing_perturbations: Mapping[str, Collection[int]] | None = None,
        unanswerable_ids: Collection[str] | None = None,
    ) -> None:
        self.env = env
        self.arms: tuple[RewriteArm, ...] = arm_roster(include_no_rewrite)
        if env.spec.n_arms != len(self.arms):
            raise ConfigurationError(
                f"env has {env.spec.n_arms} arms but roster has {len(self.arms)}"
            )
        self.failing_perturbations = {
            k: frozenset(v) for k, v in (failing_perturbations or {}).items()
        }
        self.unanswerable_ids = frozenset(unanswerable_ids or ())
        self.current_record: DatasetRecord | None = None
        self.current_draw: EnvDraw | None = None

    def begin_round(self, record: DatasetRecord) -> EnvDraw:
        """Bind a record and draw this round's context and rewards."""
        self.current_record = record
        self.current_draw = self.env.draw()
        return self.current_draw

    def bind_record(self, record: DatasetRecord) -> None:
        """Bind a record without drawing (dataset-construction mode)."""
        self.current_record = record
        self.current_draw = None

    def distractor(self) -> str:
        record = self._record()
        text = f"INCORRECT ANSWER {record.id}"
        if text in record.references:
            text += " (alt)"
        return text

    def chat(self, request: ChatRequest) -> ChatResponse:
        if request.purpose == "tagger":
            content = self._tag()
        elif request.purpose == "rewriter":
            content = self._rewrite(request)
        elif request.purpose == "answerer":
            content = self._answer(request)
        elif request.purpose == "judge":
            content = self._judge(request)
        else:
            raise ProtocolError(f"synthetic adapter cannot serve purpose {request.purpose!r}")
        return ChatResponse(content=content, usage={"prompt_tokens": 0, "completion_tokens": 0})

    def _record(self) -> DatasetRecord:
        if self.current_record is None:
            raise ProtocolError("synthetic adapter has no bound record")
        return self.current_record

    def _draw(self) -> EnvDraw:
        if self.current_draw is None:
            raise ProtocolError("synthetic adapter has no active round")
        return self.current_draw

    def _tag(self) -> str:
        draw = self._draw()
        flags = ContextVector(draw.features).as_mapping()
        return json.dumps(flags)

    def _rewrite(self, request: ChatRequest) -> str:
        record = self._record()
        system = request.messages[0]["content"]
        perturb = _PERTURB_INDEX.search(system)
        if perturb is not None:
            return f"[PERTURB:{perturb.group(1)}] {record.query}"
        for arm, marker in _ARM_PROMPT_MARKERS:
            if marker in system:
                return f"[ARM:{arm}] {record.query}"
        raise ProtocolError("synthetic adapter cannot identify the rewrite arm")

    def _arm_index(self, name: str) -> int:
        for arm in self.arms:
            if arm.name == name:
                return self.arms.index(arm)
        raise ProtocolError(f"synthetic adapter does not know arm {name!r}")

    def _answer_draw(self, t: int, arm_index: int) -> float:
        # Keyed on (env seed, round, arm) instead of env.rng so answer calls
        # never advance the env stream; resume replay relies on that.
        rng = np.random.default_rng((self.env.spec.seed, t, arm_index))
        return float(rng.random())

    def _answer(self, request: ChatRequest) -> str:
        record = self._record()
        body = request.messages[-1]["content"]
        arm_match = _ARM_MARKER.search(body)
        if arm_match is not None:
            draw = self._draw()
            index = self._arm_index(arm_match.group(1))
            mean = float(np.clip(draw.means[index], 0.0, 1.0))
            correct = self._answer_draw(draw.t, index) < mean
            return record.references[0] if correct else self.distractor()
        perturb_match = _PERTURB_MARKER.search(body)
        if perturb_match is not None:
            failing = self.failing_perturbations.get(record.id, frozenset())
            if int(perturb_match.group(1)) in failing:
                return self.distractor()
            return record.references[0]
        if self.current_draw is not None:
            # A bare query during a round can only be the identity arm.
            draw = self._draw()
            index = self._arm_index("NoRewrite")
            mean = float(np.clip(draw.means[index], 0.0, 1.0))
            correct = self._answer_draw(draw.t, index) < mean
            return record.references[0] if correct else self.distractor()
        if record.id in self.unanswerable_ids:
            return self.distractor()
        return record.references[0]

    def _judge(self, request: ChatRequest) -> str:
        system = request.messages[0]["content"]
        body = request.messages[-1]["content"]
        if EQUIVALENCE_MARKER in system:
            return self._judge_equivalence(body)
        return self._judge_answer(body)

    def _judge_equivalence(self, body: str) -> str:
        original = _section(body, "Original query:")
        rewritten = _section(body, "Rewritten query:")
        stripped = _PERTURB_MARKER.sub("", rewritten).strip()
        return "CORRECT" if stripped == original.strip() else "INCORRECT"

    def _judge_answer(self, body: str) -> str:
        references = _section(body, "Reference answers:")
        candidate = _section(body, "Candidate answer:")
        accepted = {line[2:].strip() for line in references.splitlines() if line.startswith("- ")}
        return "CORRECT" if candidate.strip() in accepted else "INCORRECT"


# Substrings unique to each rewrite arm's template, used to recognize which
# arm a prompt came from without re-rendering templates.
_ARM_PROMPT_MARKERS = (
    ("Paraphrase", "Rephrase it to improve clarity"),
    ("Simplify", "Simplify it by removing nested clauses"),
    ("Disambiguate", "Resolve vague references"),
    ("Expand", "Expand it by making implicit context explicit"),
    ("ClarifyTerms", "Identify domain-specific jargon"),
)


def _section(body: str, header: str) -> str:
    """Text of one labelled prompt section, up to the next blank line."""
    start = body.find(header)
    if start < 0:
        raise ProtocolError(f"judge prompt is missing section {header!r}")
    rest = body[start + len(header):]
    chunk = rest.split("\n\n", 1)[0]
    return chunk.strip()
