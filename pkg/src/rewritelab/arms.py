"""Rewrite strategies an experiment can choose between.

Each strategy carries a fixed system-prompt template with a single
`{original_query}` placeholder. The identity strategy (`NoRewrite`) has no
template and never touches the gateway. Template text is versioned here and
pinned byte-for-byte by golden tests; do not reflow or "fix" punctuation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ConfigurationError, ContractError, ProtocolError

PROMPT_PLACEHOLDER = "{original_query}"

PARAPHRASE_TEMPLATE = (
    "You are a rewriting module. You will be given a user query: "
    "{original_query}. Rephrase it to improve clarity and introduce lexical "
    "diversity while strictly preserving semantic meaning, entities "
    "(including casing/accents), numbers, units, and constraints. Do not add "
    "or remove information. Output only the rewritten query."
)

SIMPLIFY_TEMPLATE = (
    "You are a rewriting module. You will be given a user query: "
    "{original_query}. Simplify it by removing nested clauses and complex "
    "syntax. Use short, concrete phrasing (S–V–O order), keep all entities, "
    "numbers, units, and constraints, and avoid changing intent. Do not "
    "invent details. Output only the simplified query."
)

DISAMBIGUATE_TEMPLATE = (
    "You are a rewriting module. You will be given a user query: "
    "{original_query}. Resolve vague references by replacing ambiguous "
    "pronouns (e.g., it/they/this) and temporal expressions with explicit, "
    "context-grounded referents and normalized dates. If a referent cannot "
    "be determined from the query alone, insert a bracketed placeholder "
    "(e.g., [ENTITY], [DATE]) rather than guessing. Preserve the original "
    "intent. Output only the disambiguated query."
)

EXPAND_TEMPLATE = (
    "You are a rewriting module. You will be given a user query: "
    "{original_query}. Expand it by making implicit context explicit and "
    "adding salient, non-speculative attributes (e.g., scope, timeframe, "
    "location, units) that are entailed by the query. If crucial specifics "
    "are missing, insert neutral bracketed placeholders (e.g., [TIMEFRAME], "
    "[LOCATION]) instead of fabricating facts. Preserve the original intent "
    "and constraints. Output only the expanded query."
)

CLARIFY_TERMS_TEMPLATE = (
    "You are a rewriting module. You will be given a user query: "
    "{original_query}. Identify domain-specific jargon or terms of art and "
    "add concise parenthetical glosses (e.g., “term (brief definition)”) "
    "where the meaning is standard and unambiguous. If uncertain, use a "
    "bracketed clarification placeholder (e.g., [DEFINE: TERM]) rather than "
    "guessing. Do not alter intent, entities, or constraints. Output only "
    "the clarified query."
)


@dataclass(frozen=True)
class RewriteArm:
    """A named rewrite strategy; `template` is None for the identity arm."""

    index: int
    name: str
    template: str | None


REWRITE_ARMS: tuple[RewriteArm, ...] = (
    RewriteArm(0, "Paraphrase", PARAPHRASE_TEMPLATE),
    RewriteArm(1, "Simplify", SIMPLIFY_TEMPLATE),
    RewriteArm(2, "Disambiguate", DISAMBIGUATE_TEMPLATE),
    RewriteArm(3, "Expand", EXPAND_TEMPLATE),
    RewriteArm(4, "ClarifyTerms", CLARIFY_TERMS_TEMPLATE),
)

NO_REWRITE = RewriteArm(5, "NoRewrite", None)

REWRITE_TEMPERATURE = 0.2
REWRITE_TOP_P = 1.0


def arm_roster(include_no_rewrite: bool = False) -> tuple[RewriteArm, ...]:
    """The enabled arms in index order."""
    if include_no_rewrite:
        return REWRITE_ARMS + (NO_REWRITE,)
    return REWRITE_ARMS


def arm_by_name(name: str, include_no_rewrite: bool = True) -> RewriteArm:
    for arm in arm_roster(include_no_rewrite):
        if arm.name == name:
            return arm
    raise ConfigurationError(f"unknown rewrite arm {name!r}")


def render_prompt(arm: RewriteArm, query: str) -> str:
    """Substitute the query into the arm's template in a single pass.

    Plain string replacement, so braces inside the query stay literal and
    are never re-expanded.
    """
    if arm.template is None:
        raise ContractError(f"arm {arm.name!r} has no prompt template")
    if not query:
        raise ContractError("query must be nonempty")
    return arm.template.replace(PROMPT_PLACEHOLDER, query)


_FENCE = re.compile(r"^```[a-zA-Z]*\n?|\n?```$")
_LABEL = re.compile(r"^rewritten query:\s*", re.IGNORECASE)


def sanitize_rewrite(raw: str) -> str:
    """Normalize a rewriter reply: drop code fences and a leading label."""
    text = raw.strip()
    text = _FENCE.sub("", text).strip()
    text = _LABEL.sub("", text).strip()
    return text


@dataclass(frozen=True)
class RewriteResult:
    """Outcome of applying one rewrite arm to a query."""

    arm: RewriteArm
    original: str
    rewritten: str
    raw: str


def apply_rewrite(arm: RewriteArm, query: str, gateway) -> RewriteResult:
    """Produce the arm's rewritten query.

    The identity arm returns the query untouched without any gateway call;
    other arms issue exactly one rewriter call and sanitize the reply. An
    empty rewrite after sanitation is a protocol error.
    """
    if arm.template is None:
        return RewriteResult(arm=arm, original=query, rewritten=query, raw="")
    from .gateway import ChatRequest

    request = ChatRequest(
        model=gateway.model_for("rewriter"),
        messages=({"role": "system", "content": render_prompt(arm, query)},),
        temperature=REWRITE_TEMPERATURE,
        top_p=REWRITE_TOP_P,
        purpose="rewriter",
    )
    response = gateway.chat(request)
    rewritten = sanitize_rewrite(response.content)
    if not rewritten:
        raise ProtocolError(f"arm {arm.name!r} produced an empty rewrite")
    return RewriteResult(arm=arm, original=query, rewritten=rewritten, raw=response.content)
