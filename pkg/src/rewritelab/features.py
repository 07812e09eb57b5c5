"""Binary linguistic features of a query and their LLM-based tagger.

Every query is described by 17 binary features in a fixed canonical order.
The feature vector doubles as the bandit context: `encode_context` maps it
to a float array, appending a constant bias coordinate by default.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError, ProtocolError


@dataclass(frozen=True)
class FeatureDescriptor:
    """Name, one-line definition, and one-line example of a binary feature."""

    name: str
    definition: str
    example: str


FEATURE_SCHEMA: tuple[FeatureDescriptor, ...] = (
    FeatureDescriptor(
        "Anaphora",
        "Presence of pronouns or references requiring external context.",
        "What about that one?",
    ),
    FeatureDescriptor(
        "Subordination",
        "Measures the presence of multiple subordinate clauses",
        "While I was walking home, I saw a cat that looked just like my friend's.",
    ),
    FeatureDescriptor(
        "Mismatch",
        "Mismatch between the query’s intended output and its actual structure.",
        "Find me this paragraph in this document",
    ),
    FeatureDescriptor(
        "Presupposition",
        "Unstated assumptions embedded in the query.",
        "Who is the musician that developed neural networks?",
    ),
    FeatureDescriptor(
        "Pragmatics",
        "Captures context-dependent meanings beyond literal interpretation.",
        "Can you pass the salt?",
    ),
    FeatureDescriptor(
        "Rarity",
        "Use of rare or niche terminology.",
        "What are the ramifications of quantum decoherence?",
    ),
    FeatureDescriptor(
        "Negation",
        "Presence of negation words (not, never).",
        "Is it not possible to do this?",
    ),
    FeatureDescriptor(
        "Superlative",
        "Detection of superlative expressions (biggest, fastest).",
        "What is the fastest algorithm?",
    ),
    FeatureDescriptor(
        "Polysemy",
        "Presence of ambiguous words with multiple related meanings.",
        "Explain how a bank operates.",
    ),
    FeatureDescriptor(
        "Answerability",
        "Assesses whether the query has a verifiable answer.",
        "What is the exact number of galaxies?",
    ),
    FeatureDescriptor(
        "Excessive",
        "Evaluates whether a query is overloaded with information, potentially "
        "distracting the model.",
        "Can you explain how convolutional neural networks work, including all "
        "mathematical formulas?",
    ),
    FeatureDescriptor(
        "Subjectivity",
        "Query requires the degree of opinion or personal bias",
        "What is the best programming language?",
    ),
    FeatureDescriptor(
        "Ambiguity",
        "Highly ambiguous context, task, and wording",
        "Tell me about history.",
    ),
    FeatureDescriptor(
        "Grounding",
        "Evaluates how clearly the query’s purpose is expressed.",
        "How does reinforcement learning optimize control in robotics?",
    ),
    FeatureDescriptor(
        "Constraints",
        "Identifies explicit constraints (time, location, conditions) provided "
        "in the query.",
        "What was the inflation rate in the US in 2023?",
    ),
    FeatureDescriptor(
        "Entities",
        "Checks for the inclusion of verifiable named entities.",
        "Who founded OpenAI?",
    ),
    FeatureDescriptor(
        "Specialization",
        "Determines whether the query belongs to a specialized domain (e.g., "
        "finance, law).",
        "What are the legal implications of the GDPR ruling?",
    ),
)

FEATURE_NAMES: tuple[str, ...] = tuple(d.name for d in FEATURE_SCHEMA)
NUM_FEATURES: int = len(FEATURE_SCHEMA)


def context_dim(include_bias: bool = True) -> int:
    return NUM_FEATURES + (1 if include_bias else 0)


@dataclass(frozen=True)
class ContextVector:
    """An assignment of the 17 binary features, in schema order."""

    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.values) != NUM_FEATURES:
            raise ContractError(
                f"context vector needs {NUM_FEATURES} entries, got {len(self.values)}"
            )
        if any(v not in (0, 1) for v in self.values):
            raise ContractError("context vector entries must be 0 or 1")

    @classmethod
    def from_mapping(cls, flags: Mapping[str, object]) -> "ContextVector":
        values = []
        for name in FEATURE_NAMES:
            if name not in flags:
                raise ProtocolError(f"feature mapping is missing key {name!r}")
            values.append(1 if _as_flag(flags[name], name) else 0)
        return cls(tuple(values))

    def as_mapping(self) -> dict[str, bool]:
        return {name: bool(v) for name, v in zip(FEATURE_NAMES, self.values)}

    def encode(self, include_bias: bool = True) -> np.ndarray:
        vec = np.array(self.values, dtype=np.float64)
        if include_bias:
            vec = np.append(vec, 1.0)
        return vec

    @classmethod
    def decode(cls, vec: Sequence[float], include_bias: bool = True) -> "ContextVector":
        arr = np.asarray(vec, dtype=np.float64)
        expected = context_dim(include_bias)
        if arr.shape != (expected,):
            raise ContractError(f"expected shape ({expected},), got {arr.shape}")
        if include_bias:
            if arr[-1] != 1.0:
                raise ContractError("bias coordinate must be exactly 1.0")
            arr = arr[:-1]
        values = []
        for v in arr:
            if v not in (0.0, 1.0):
                raise ContractError("feature coordinates must be exactly 0.0 or 1.0")
            values.append(int(v))
        return cls(tuple(values))


def encode_context(flags: ContextVector, include_bias: bool = True) -> np.ndarray:
    return flags.encode(include_bias=include_bias)


def _as_flag(value: object, name: str) -> bool:
    if isinstance(value, bool):
        return value
    if value in (0, 1):
        return bool(value)
    raise ProtocolError(f"feature {name!r} has non-boolean value {value!r}")


def _schema_lines() -> str:
    lines = []
    for d in FEATURE_SCHEMA:
        lines.append(f'- {d.name}: {d.definition} Example: "{d.example}"')
    return "\n".join(lines)


TAGGER_SYSTEM_PROMPT = (
    "You are a careful linguistic analyst. You will be given a user query. "
    "Decide for each of the 17 binary features below whether the query "
    "exhibits it (true) or not (false).\n\n"
    "Features:\n"
    f"{_schema_lines()}\n\n"
    "Respond with a single JSON object whose keys are exactly the 17 feature "
    "names above and whose values are JSON booleans. Output nothing else."
)

TAGGER_USER_TEMPLATE = "Query: {query}"

_JSON_OBJECT = re.compile(r"\{.*\}", re.DOTALL)


def _parse_feature_payload(text: str) -> ContextVector:
    cleaned = text.strip()
    if cleaned.startswith("```"):
        cleaned = re.sub(r"^```[a-zA-Z]*\n?", "", cleaned)
        cleaned = re.sub(r"\n?```$", "", cleaned).strip()
    try:
        payload = json.loads(cleaned)
    except json.JSONDecodeError:
        # One lenient reparse: take the outermost brace-delimited span.
        match = _JSON_OBJECT.search(cleaned)
        if match is None:
            raise ProtocolError(f"tagger response is not JSON: {text[:200]!r}")
        try:
            payload = json.loads(match.group(0))
        except json.JSONDecodeError:
            raise ProtocolError(f"tagger response is not JSON: {text[:200]!r}")
    if not isinstance(payload, dict):
        raise ProtocolError("tagger response is not a JSON object")
    return ContextVector.from_mapping(payload)


def tag_features(query: str, gateway) -> ContextVector:
    """Tag a query with all 17 features in a single structured LLM call."""
    from .gateway import ChatRequest

    request = ChatRequest(
        model=gateway.model_for("tagger"),
        messages=(
            {"role": "system", "content": TAGGER_SYSTEM_PROMPT},
            {"role": "user", "content": TAGGER_USER_TEMPLATE.format(query=query)},
        ),
        temperature=0.0,
        top_p=1.0,
        structured=True,
        purpose="tagger",
    )
    response = gateway.chat(request)
    return _parse_feature_payload(response.content)


@dataclass(frozen=True)
class StabilityReport:
    """Agreement of repeated tagger runs against their modal vector."""

    n_runs: int
    modal: ContextVector
    per_feature: dict[str, float]
    full_vector: float


def stability_audit(query: str, gateway, n_runs: int) -> StabilityReport:
    """Re-tag a query `n_runs` times and measure agreement rates.

    The reference is the modal full vector; ties pick the lexicographically
    smallest candidate. Full-vector agreement can never exceed the smallest
    per-feature agreement.
    """
    if n_runs < 2:
        raise ContractError("stability audit needs n_runs >= 2")
    runs = [tag_features(query, gateway).values for _ in range(n_runs)]
    counts = Counter(runs)
    top = max(counts.values())
    modal_values = min(v for v, c in counts.items() if c == top)
    per_feature = {
        name: sum(run[i] == modal_values[i] for run in runs) / n_runs
        for i, name in enumerate(FEATURE_NAMES)
    }
    full = sum(run == modal_values for run in runs) / n_runs
    return StabilityReport(
        n_runs=n_runs,
        modal=ContextVector(modal_values),
        per_feature=per_feature,
        full_vector=full,
    )
