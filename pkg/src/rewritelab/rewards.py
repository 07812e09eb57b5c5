"""Composite factuality reward and its component scorers.

An answer is scored as a convex combination of a binary LLM verdict, a
token-set fuzzy similarity, and a clipped unigram precision. The weights
default to (0.6, 0.3, 0.1) and must form a simplex.
"""
from __future__ import annotations

import csv
import re
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigurationError, ContractError, ProtocolError

WEIGHT_TOLERANCE = 1e-9


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation off token edges."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def bleu1(candidate: str, references: str | Sequence[str]) -> float:
    """Clipped unigram precision of the candidate against the best reference.

    An empty candidate scores 0. With several references the maximum
    per-reference precision is returned.
    """
    refs = [references] if isinstance(references, str) else list(references)
    if not refs:
        raise ContractError("bleu1 needs at least one reference")
    cand = tokenize(candidate)
    if not cand:
        return 0.0
    cand_counts = Counter(cand)
    best = 0.0
    for ref in refs:
        ref_counts = Counter(tokenize(ref))
        clipped = sum(min(c, ref_counts[tok]) for tok, c in cand_counts.items())
        best = max(best, clipped / len(cand))
    return min(best, 1.0)


def _indel_distance(a: str, b: str) -> int:
    """Insertion/deletion edit distance, len(a) + len(b) - 2 * LCS."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                current.append(previous[j - 1])
            else:
                current.append(1 + min(previous[j], current[-1]))
        previous = current
    return previous[-1]


def _indel_similarity(a: str, b: str) -> float:
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 1.0 - _indel_distance(a, b) / total


def fuzzy_token_set(candidate: str, reference: str) -> float:
    """Token-set similarity in [0, 1].

    Both sides are reduced to sorted deduplicated token sets. With I the
    joined sorted intersection, A = I plus the candidate-only tokens and
    B = I plus the reference-only tokens, the score is the best normalized
    indel similarity among the pairs (A, B), (I, A), (I, B).
    """
    cand = sorted(set(tokenize(candidate)))
    ref = sorted(set(tokenize(reference)))
    if not cand and not ref:
        return 1.0
    if not cand or not ref:
        return 0.0
    inter = sorted(set(cand) & set(ref))
    cand_only = sorted(set(cand) - set(ref))
    ref_only = sorted(set(ref) - set(cand))
    joined_inter = " ".join(inter)
    joined_a = " ".join(inter + cand_only)
    joined_b = " ".join(inter + ref_only)
    return max(
        _indel_similarity(joined_a, joined_b),
        _indel_similarity(joined_inter, joined_a),
        _indel_similarity(joined_inter, joined_b),
    )


@dataclass(frozen=True)
class RewardWeights:
    """Convex weights over (LLM verdict, fuzzy similarity, unigram precision)."""

    llm: float = 0.6
    fuzz: float = 0.3
    bleu: float = 0.1

    def __post_init__(self) -> None:
        for field_name in ("llm", "fuzz", "bleu"):
            value = getattr(self, field_name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"weight {field_name!r} must lie in [0, 1]")
        if abs(self.llm + self.fuzz + self.bleu - 1.0) > WEIGHT_TOLERANCE:
            raise ConfigurationError("reward weights must sum to 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.llm, self.fuzz, self.bleu)


DEFAULT_WEIGHTS = RewardWeights()


@dataclass(frozen=True)
class RewardBreakdown:
    """Component scores and their weighted total for one answer."""

    llm: float
    fuzz: float
    bleu: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {"llm": self.llm, "fuzz": self.fuzz, "bleu": self.bleu, "total": self.total}


def composite_reward(
    s_llm: float,
    s_fuzz: float,
    s_bleu: float,
    weights: RewardWeights = DEFAULT_WEIGHTS,
) -> RewardBreakdown:
    """Weighted sum of the three component scores, each required in [0, 1]."""
    for label, value in (("s_llm", s_llm), ("s_fuzz", s_fuzz), ("s_bleu", s_bleu)):
        if not 0.0 <= value <= 1.0:
            raise ContractError(f"{label} must lie in [0, 1], got {value!r}")
    total = weights.llm * s_llm + weights.fuzz * s_fuzz + weights.bleu * s_bleu
    return RewardBreakdown(llm=float(s_llm), fuzz=float(s_fuzz), bleu=float(s_bleu), total=float(total))


JUDGE_SYSTEM_PROMPT = (
    "You are grading an answer to a question against one or more reference "
    "answers. Decide whether the answer is factually correct: it must convey "
    "the same fact as at least one reference answer. Respond with exactly "
    "CORRECT or INCORRECT."
)

JUDGE_USER_TEMPLATE = (
    "Question:\n{question}\n\n"
    "Reference answers:\n{references}\n\n"
    "Candidate answer:\n{candidate}"
)

_VERDICT = re.compile(r"\b(INCORRECT|CORRECT)\b")


def parse_verdict(text: str) -> int:
    """Map a judge reply to 1 (CORRECT) or 0 (INCORRECT); anything else fails."""
    match = _VERDICT.search(text.strip().upper())
    if match is None:
        raise ProtocolError(f"judge verdict is unparseable: {text[:200]!r}")
    return 0 if match.group(1) == "INCORRECT" else 1


def format_judge_messages(
    question: str, references: str | Sequence[str], candidate: str
) -> tuple[dict, dict]:
    refs = [references] if isinstance(references, str) else list(references)
    if not refs:
        raise ContractError("judge needs at least one reference answer")
    listing = "\n".join(f"- {r}" for r in refs)
    user = JUDGE_USER_TEMPLATE.format(
        question=question, references=listing, candidate=candidate
    )
    return (
        {"role": "system", "content": JUDGE_SYSTEM_PROMPT},
        {"role": "user", "content": user},
    )


def judge_answer(
    question: str,
    references: str | Sequence[str],
    candidate: str,
    gateway,
) -> tuple[int, str]:
    """Binary LLM verdict on an answer; returns (score, raw reply)."""
    from .gateway import ChatRequest

    request = ChatRequest(
        model=gateway.model_for("judge"),
        messages=format_judge_messages(question, references, candidate),
        temperature=0.0,
        top_p=1.0,
        purpose="judge",
    )
    response = gateway.chat(request)
    return parse_verdict(response.content), response.content


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a correct item outscores a wrong one, ties counted half.

    Computed from tie-averaged ranks (Mann-Whitney U). Requires both classes
    to be present.
    """
    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape or s.ndim != 1:
        raise ContractError("scores and labels must be equal-length 1-d sequences")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ContractError("roc_auc needs both correct and wrong items")
    ranks = rankdata(s)
    u = float(ranks[y].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class SweepCell:
    """One weight assignment of the simplex sweep and its AUC."""

    alpha: float
    beta: float
    gamma: float
    auc: float
    top1pct: bool


def simplex_sweep(
    components: Sequence[Sequence[float]],
    labels: Sequence[int],
    grid_step: float = 0.05,
) -> list[SweepCell]:
    """AUC of the composite reward over a full simplex grid of weights.

    `components` holds per-item (llm, fuzz, bleu) scores. Cells are returned
    sorted by AUC descending; the top-1% flag marks cells whose AUC is within
    one percent of the sweep's AUC range from the maximum.
    """
    if grid_step <= 0.0 or grid_step > 1.0:
        raise ConfigurationError(f"grid_step must lie in (0, 1], got {grid_step}")
    steps = round(1.0 / grid_step)
    if abs(steps * grid_step - 1.0) > WEIGHT_TOLERANCE:
        raise ConfigurationError(f"grid_step {grid_step} does not evenly divide 1")
    matrix = np.asarray(components, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != 3:
        raise ContractError("components must be an (n, 3) table of scores")
    cells = []
    for i in range(steps, -1, -1):
        for j in range(steps - i, -1, -1):
            k = steps - i - j
            alpha, beta, gamma = i / steps, j / steps, k / steps
            combined = matrix @ np.array([alpha, beta, gamma])
            cells.append((alpha, beta, gamma, roc_auc(combined, labels)))
    aucs = np.array([c[3] for c in cells])
    cutoff = aucs.max() - 0.01 * (aucs.max() - aucs.min())
    result = [
        SweepCell(alpha=a, beta=b, gamma=g, auc=auc, top1pct=bool(auc >= cutoff))
        for (a, b, g, auc) in cells
    ]
    result.sort(key=lambda c: (-c.auc, c.alpha, c.beta, c.gamma))
    return result


def write_sweep_csv(cells: Iterable[SweepCell], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["alpha", "beta", "gamma", "auc", "top1pct_flag"])
        for cell in cells:
            writer.writerow(
                [
                    format(cell.alpha, ".2f"),
                    format(cell.beta, ".2f"),
                    format(cell.gamma, ".2f"),
                    repr(cell.auc),
                    int(cell.top1pct),
                ]
            )


@dataclass(frozen=True)
class AgreementStats:
    """Raw agreement, Cohen's kappa, and Matthews correlation."""

    agreement: float
    kappa: float
    mcc: float


def agreement_stats(a: Sequence[int], b: Sequence[int]) -> AgreementStats:
    """Chance-corrected agreement between two binary sequences.

    Kappa is defined as 0 when expected agreement is 1 (both sequences
    constant and identical); MCC is 0 when its denominator vanishes.
    """
    x = np.asarray(a, dtype=np.int64)
    y = np.asarray(b, dtype=np.int64)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ContractError("agreement needs two equal-length nonempty sequences")
    if not (np.isin(x, (0, 1)).all() and np.isin(y, (0, 1)).all()):
        raise ContractError("agreement sequences must be binary")
    n = x.size
    tp = int(np.sum((x == 1) & (y == 1)))
    tn = int(np.sum((x == 0) & (y == 0)))
    fp = int(np.sum((x == 0) & (y == 1)))
    fn = int(np.sum((x == 1) & (y == 0)))
    p_o = (tp + tn) / n
    p_yes = ((tp + fn) / n) * ((tp + fp) / n)
    p_no = ((tn + fp) / n) * ((tn + fn) / n)
    p_e = p_yes + p_no
    kappa = 0.0 if abs(1.0 - p_e) < 1e-12 else (p_o - p_e) / (1.0 - p_e)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = 0.0 if denom == 0 else (tp * tn - fp * fn) / np.sqrt(denom)
    return AgreementStats(agreement=p_o, kappa=float(kappa), mcc=float(mcc))
