"""Experiment loops: online runs, static baselines, numeric simulations, and
dataset construction.

Round logs are JSON lines written before the next round begins, contain no
wall-clock data, and serialize with sorted keys, so a rerun from the same
seed reproduces the file byte for byte. `--resume` replays logged rounds
through the policy (consuming the same RNG draws) instead of snapshotting
generator state.
"""
from __future__ import annotations

import dataclasses
import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .arms import RewriteArm, apply_rewrite, arm_roster, sanitize_rewrite
from .bandits import make_policy
from .config import ExperimentConfig
from .datasets import DatasetRecord, load_dataset, sample_order, save_dataset
from .errors import (
    ConfigurationError,
    ContractError,
    ProtocolError,
    TransportError,
)
from .features import tag_features
from .gateway import ChatRequest, Gateway, build_gateway
from .metrics import cumulative_regret, exploration_adjusted_reward
from .rewards import RewardBreakdown, bleu1, composite_reward, fuzzy_token_set, judge_answer
from .synthetic import (
    EnvSpec,
    LinearSyntheticEnv,
    SyntheticLLM,
    canonical_env_spec,
    dominant_arm_env_spec,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

ANSWER_SYSTEM_PROMPT = (
    "You are a precise question answering assistant. Give only the answer, "
    "with no explanation or preamble."
)

PERTURB_SYSTEM_TEMPLATE = (
    "You are a rewriting module. Produce lexical variant #{index} of the "
    "user query: reword it substantially while strictly preserving its "
    "meaning, entities (including casing/accents), numbers, units, and "
    "constraints. Do not add or remove information. Output only the "
    "rewritten query."
)

EQUIVALENCE_SYSTEM_PROMPT = (
    "You are checking whether a rewritten query is semantically equivalent "
    "to the original query: same intent, same entities, same constraints, "
    "different wording only. Respond with exactly CORRECT if they are "
    "semantically equivalent, or INCORRECT otherwise."
)

EQUIVALENCE_USER_TEMPLATE = "Original query:\n{original}\n\nRewritten query:\n{rewritten}"

N_PERTURBATIONS = 5
MIN_INCORRECT_PERTURBATIONS = 1
MAX_INCORRECT_PERTURBATIONS = 3


def _json_line(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def format_answer_messages(record: DatasetRecord, query_text: str) -> tuple[dict, dict]:
    """Scenario-aware answer prompt; `query_text` may be a rewritten query."""
    if record.scenario == "extractive":
        if not record.context:
            raise ContractError(f"record {record.id!r} is extractive but has no context")
        user = (
            f"Passage:\n{record.context}\n\nQuestion:\n{query_text}\n\n"
            "Answer using only the passage."
        )
    elif record.scenario == "multiple-choice":
        letters = [chr(ord("A") + i) for i in range(len(record.choices))]
        listing = "\n".join(f"{l}) {c}" for l, c in zip(letters, record.choices))
        user = (
            f"Question:\n{query_text}\n\nChoices:\n{listing}\n\n"
            "Respond with exactly one choice letter."
        )
    elif record.scenario == "boolean":
        user = f"Question:\n{query_text}\n\nRespond with exactly yes or no."
    else:
        user = f"Question:\n{query_text}"
    return (
        {"role": "system", "content": ANSWER_SYSTEM_PROMPT},
        {"role": "user", "content": user},
    )


def build_env_spec(config: ExperimentConfig, seed: int) -> EnvSpec:
    if config.env_name == "canonical":
        return canonical_env_spec(seed=seed, n_arms=config.n_arms())
    return dominant_arm_env_spec(seed=seed, n_arms=config.n_arms())


def build_run_gateway(
    config: ExperimentConfig, seed: int
) -> tuple[Gateway, SyntheticLLM | None]:
    """Gateway for one run; in synthetic mode also returns the environment
    adapter so the runner can advance it round by round."""
    if config.gateway_mode == "synthetic":
        env = LinearSyntheticEnv(build_env_spec(config, seed))
        adapter = SyntheticLLM(env, include_no_rewrite=config.include_no_rewrite)
        gateway = build_gateway("synthetic", config.models, synthetic=adapter)
        return gateway, adapter
    mode = config.gateway_mode
    if mode == "replay" and not config.strict_replay:
        mode = "record"
    gateway = build_gateway(
        mode,
        config.models,
        endpoint=config.endpoint,
        api_key_env=config.api_key_env,
        cache_path=config.cache_path,
        max_concurrent=config.max_concurrent,
        max_per_minute=config.max_per_minute,
    )
    return gateway, None


def _answer_query(
    record: DatasetRecord, query_text: str, gateway: Gateway, config: ExperimentConfig
) -> str:
    request = ChatRequest(
        model=gateway.model_for("answerer"),
        messages=format_answer_messages(record, query_text),
        temperature=config.answer_temperature,
        top_p=config.answer_top_p,
        purpose="answerer",
    )
    return gateway.chat(request).content


def _score_answer(
    record: DatasetRecord, answer: str, verdict: int, config: ExperimentConfig
) -> RewardBreakdown:
    fuzz = max(fuzzy_token_set(answer, ref) for ref in record.references)
    bleu = bleu1(answer, record.references)
    return composite_reward(verdict, fuzz, bleu, config.reward_weights())


@dataclass
class RunSummary:
    """Aggregate of one seeded run."""

    policy: str
    seed: int
    n_rounds: int
    n_failed: int
    arm_counts: dict[str, int]
    mean_reward: float
    accuracy: float
    adjusted_reward: float
    regret_final: float | None
    log_path: str

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class _RoundFailure(Exception):
    """Wraps a stage failure so the loop can log it and continue."""

    def __init__(self, stage: str, cause: Exception, arm: int | None, features: list | None):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
        self.arm = arm
        self.features = features


class _RunState:
    """Accumulators shared by fresh rounds and resume replay."""

    def __init__(self, roster: Sequence[RewriteArm]) -> None:
        self.roster = list(roster)
        self.arms: list[int] = []
        self.rewards: list[float] = []
        self.oracles: list[float | None] = []
        self.verdicts: list[int] = []
        self.n_failed = 0
        self.failure_reasons: Counter = Counter()

    def record_round(self, arm: int, reward: float, oracle: float | None, verdict: int) -> None:
        self.arms.append(arm)
        self.rewards.append(reward)
        self.oracles.append(oracle)
        self.verdicts.append(verdict)


def _summarize(
    config: ExperimentConfig,
    policy_label: str,
    seed: int,
    state: _RunState,
    log_path: Path,
) -> RunSummary:
    counts = Counter(state.arms)
    arm_counts = {arm.name: counts.get(i, 0) for i, arm in enumerate(state.roster)}
    n_rounds = len(state.arms)
    if n_rounds:
        mean_reward = float(np.mean(state.rewards))
        accuracy = float(np.mean(state.verdicts))
        adjusted = exploration_adjusted_reward(
            state.arms, state.rewards, len(state.roster), config.entropy_weight
        )
    else:
        mean_reward = accuracy = adjusted = 0.0
    regret_final = None
    if n_rounds and all(o is not None for o in state.oracles):
        regret_final = float(cumulative_regret(state.rewards, state.oracles)[-1])
    return RunSummary(
        policy=policy_label,
        seed=seed,
        n_rounds=n_rounds,
        n_failed=state.n_failed,
        arm_counts=arm_counts,
        mean_reward=mean_reward,
        accuracy=accuracy,
        adjusted_reward=adjusted,
        regret_final=regret_final,
        log_path=str(log_path),
    )


def read_run_log(log_path: Path) -> tuple[dict, list[dict]]:
    """Parse one JSONL round log into (header, records); corrupt lines and
    missing headers raise with the offending line number."""
    header = None
    records = []
    with open(log_path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                raise ProtocolError(f"corrupt log line {lineno} in {log_path}")
            if lineno == 1:
                if payload.get("type") != "header":
                    raise ContractError(f"log {log_path} does not start with a header")
                header = payload
            else:
                records.append(payload)
    if header is None:
        raise ContractError(f"log {log_path} is empty")
    return header, records


def _run_single(
    config: ExperimentConfig,
    records: Sequence[DatasetRecord],
    seed: int,
    static_arm: RewriteArm | None,
    resume: bool,
) -> RunSummary:
    roster = arm_roster(config.include_no_rewrite)
    policy_label = f"static:{static_arm.name}" if static_arm else config.policy
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / f"rounds_seed{seed}.jsonl"

    gateway, adapter = build_run_gateway(config, seed)
    policy = None
    if static_arm is None:
        policy = make_policy(
            config.policy,
            len(roster),
            dim=config.context_dim(),
            seed=seed,
            **config.policy_params,
        )
    order = sample_order(len(records), config.n_rounds, np.random.default_rng(seed))
    weights = config.reward_weights()
    state = _RunState(roster)

    header = {
        "type": "header",
        "schema": SCHEMA_VERSION,
        "policy": policy_label,
        "seed": seed,
        "n_rounds": config.n_rounds,
        "n_arms": len(roster),
        "arms": [a.name for a in roster],
        "weights": list(weights.as_tuple()),
        "evaluate_all_arms": config.evaluate_all_arms,
        "dataset": config.dataset_path,
        "gateway_mode": config.gateway_mode,
    }

    start_t = 1
    if resume and log_path.exists():
        prior_header, prior = read_run_log(log_path)
        for key in ("schema", "policy", "seed", "n_rounds", "n_arms"):
            if prior_header.get(key) != header[key]:
                raise ContractError(
                    f"cannot resume {log_path}: header field {key!r} changed"
                )
        start_t = _replay_into(
            prior, records, order, roster, policy, adapter, state, config
        )
        log_handle = open(log_path, "a")
    else:
        log_handle = open(log_path, "w")
        log_handle.write(_json_line(header) + "\n")
        log_handle.flush()

    failure_budget = config.max_failed_round_fraction * config.n_rounds
    try:
        for t in range(start_t, config.n_rounds + 1):
            record = records[order[t - 1]]
            try:
                payload = _play_round(
                    t, record, config, roster, policy, static_arm, gateway, adapter, state
                )
            except _RoundFailure as failure:
                state.n_failed += 1
                state.failure_reasons[f"{failure.stage}:{type(failure.cause).__name__}"] += 1
                payload = {
                    "type": "error",
                    "seq": t,
                    "query_id": record.id,
                    "stage": failure.stage,
                    "message": str(failure.cause),
                }
                if failure.features is not None:
                    payload["features"] = failure.features
                if failure.arm is not None:
                    payload["arm"] = failure.arm
                logger.warning("round %d failed at %s: %s", t, failure.stage, failure.cause)
            log_handle.write(_json_line(payload) + "\n")
            log_handle.flush()
            if state.n_failed > failure_budget:
                reasons = ", ".join(f"{k} x{v}" for k, v in sorted(state.failure_reasons.items()))
                raise RuntimeError(
                    f"aborting run seed={seed}: {state.n_failed} failed rounds "
                    f"exceed the {config.max_failed_round_fraction:.0%} budget ({reasons})"
                )
    finally:
        log_handle.close()

    summary = _summarize(config, policy_label, seed, state, log_path)
    summary_path = out_dir / f"summary_seed{seed}.json"
    with open(summary_path, "w") as handle:
        json.dump(summary.as_dict(), handle, sort_keys=True, indent=2)
        handle.write("\n")
    if policy is not None and policy.contextual:
        from .metrics import per_arm_theta_export

        export = per_arm_theta_export(policy, include_bias=config.include_bias)
        export["arms"] = [a.name for a in roster]
        with open(out_dir / f"theta_seed{seed}.json", "w") as handle:
            json.dump(export, handle, sort_keys=True, indent=2)
            handle.write("\n")
    return summary


def _replay_into(
    prior: list[dict],
    records: Sequence[DatasetRecord],
    order: Sequence[int],
    roster: Sequence[RewriteArm],
    policy,
    adapter: SyntheticLLM | None,
    state: _RunState,
    config: ExperimentConfig,
) -> int:
    """Rebuild policy/env state from logged rounds; returns the next round."""
    last_seq = 0
    for payload in prior:
        seq = payload.get("seq")
        if seq != last_seq + 1:
            raise ContractError(f"log has a gap: expected seq {last_seq + 1}, got {seq}")
        last_seq = seq
        record = records[order[seq - 1]]
        if payload.get("query_id") != record.id:
            raise ContractError(
                f"resume mismatch at seq {seq}: log has {payload.get('query_id')!r}, "
                f"dataset order gives {record.id!r}"
            )
        if adapter is not None:
            adapter.begin_round(record)
        features = payload.get("features")
        arm = payload.get("arm")
        if policy is not None and features is not None and arm is not None:
            x = np.append(np.asarray(features, dtype=np.float64), 1.0) if config.include_bias \
                else np.asarray(features, dtype=np.float64)
            trace = policy.select(x if policy.contextual else None)
            if trace.arm != arm:
                raise ContractError(
                    f"resume replay diverged at seq {seq}: policy chose {trace.arm}, "
                    f"log has {arm}"
                )
        if payload["type"] == "round":
            if policy is not None:
                x = np.append(np.asarray(payload["features"], dtype=np.float64), 1.0) \
                    if config.include_bias else np.asarray(payload["features"], dtype=np.float64)
                policy.update(payload["arm"], x if policy.contextual else None,
                              payload["reward"]["total"])
            state.record_round(
                payload["arm"],
                payload["reward"]["total"],
                payload.get("oracle"),
                int(round(payload["reward"]["llm"])),
            )
        else:
            state.n_failed += 1
            state.failure_reasons[f"{payload.get('stage')}:replayed"] += 1
    return last_seq + 1


def _play_round(
    t: int,
    record: DatasetRecord,
    config: ExperimentConfig,
    roster: Sequence[RewriteArm],
    policy,
    static_arm: RewriteArm | None,
    gateway: Gateway,
    adapter: SyntheticLLM | None,
    state: _RunState,
) -> dict:
    features: list | None = None
    arm_index: int | None = None
    if adapter is not None:
        adapter.begin_round(record)

    stage = "tag"
    try:
        context = tag_features(record.query, gateway)
        features = list(context.values)
        x = context.encode(config.include_bias)

        stage = "select"
        if static_arm is not None:
            arm_index = roster.index(static_arm)
            trace = None
        else:
            trace = policy.select(x if policy.contextual else None)
            arm_index = trace.arm

        if config.evaluate_all_arms:
            stage = "rewrite"
            rewrites = [apply_rewrite(arm, record.query, gateway) for arm in roster]
            stage = "answer"
            answers = [
                _answer_query(record, rw.rewritten, gateway, config) for rw in rewrites
            ]
            stage = "judge"
            verdicts = [
                judge_answer(record.query, record.references, ans, gateway)[0]
                for ans in answers
            ]
            stage = "score"
            breakdowns = [
                _score_answer(record, ans, v, config) for ans, v in zip(answers, verdicts)
            ]
            breakdown = breakdowns[arm_index]
            answer = answers[arm_index]
            oracle = max(bd.total for bd in breakdowns)
            per_arm = [bd.total for bd in breakdowns]
        else:
            stage = "rewrite"
            rewrite = apply_rewrite(roster[arm_index], record.query, gateway)
            stage = "answer"
            answer = _answer_query(record, rewrite.rewritten, gateway, config)
            stage = "judge"
            verdict, _ = judge_answer(record.query, record.references, answer, gateway)
            stage = "score"
            breakdown = _score_answer(record, answer, verdict, config)
            oracle = None
            per_arm = None
            rewrites = [rewrite]

        stage = "update"
        if policy is not None:
            policy.update(arm_index, x if policy.contextual else None, breakdown.total)
    except (ProtocolError, TransportError) as exc:
        raise _RoundFailure(stage, exc, arm_index, features)

    state.record_round(arm_index, breakdown.total, oracle, int(round(breakdown.llm)))
    rewritten_text = (
        rewrites[arm_index].rewritten if config.evaluate_all_arms else rewrites[0].rewritten
    )
    payload = {
        "type": "round",
        "seq": t,
        "query_id": record.id,
        "features": features,
        "arm": arm_index,
        "arm_name": roster[arm_index].name,
        "rewritten": rewritten_text,
        "answer": answer,
        "reward": breakdown.as_dict(),
        "oracle": oracle,
    }
    if per_arm is not None:
        payload["per_arm"] = per_arm
    if trace is not None:
        payload["trace"] = trace.as_dict()
    return payload


def run_experiment(config: ExperimentConfig, resume: bool = False) -> list[RunSummary]:
    """Online bandit run over the configured dataset, one log per seed."""
    if config.dataset_path is None:
        raise ConfigurationError("run needs dataset_path")
    records = load_dataset(config.dataset_path)
    return [
        _run_single(config, records, seed, static_arm=None, resume=resume)
        for seed in config.seeds
    ]


def run_static_policy(
    config: ExperimentConfig, arm_name: str, resume: bool = False
) -> list[RunSummary]:
    """Fixed-arm baseline run: same pipeline, no policy updates."""
    if config.dataset_path is None:
        raise ConfigurationError("static run needs dataset_path")
    records = load_dataset(config.dataset_path)
    roster = arm_roster(config.include_no_rewrite)
    matches = [a for a in roster if a.name == arm_name]
    if not matches:
        raise ConfigurationError(
            f"arm {arm_name!r} is not in the roster {[a.name for a in roster]}"
        )
    return [
        _run_single(config, records, seed, static_arm=matches[0], resume=resume)
        for seed in config.seeds
    ]


@dataclass
class SimulationResult:
    """Numeric-only run against the synthetic environment."""

    policy: str
    seed: int
    arms: np.ndarray
    rewards: np.ndarray
    oracles: np.ndarray
    regret: np.ndarray

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])


def simulate_policy(
    policy_name: str,
    spec: EnvSpec,
    n_rounds: int,
    seed: int,
    policy_params: dict | None = None,
    include_bias: bool = True,
) -> SimulationResult:
    """Run one policy against the numeric environment, observing exact
    realized rewards; every arm's outcome is drawn, so regret is exact."""
    env = LinearSyntheticEnv(dataclasses.replace(spec, seed=seed))
    contexts, _, realized, oracle = env.generate(n_rounds)
    dim = spec.dim if include_bias else spec.dim - 1
    policy = make_policy(
        policy_name, spec.n_arms, dim=dim, seed=seed, **(policy_params or {})
    )
    arms = np.empty(n_rounds, dtype=np.int64)
    rewards = np.empty(n_rounds, dtype=np.float64)
    for t in range(n_rounds):
        x = contexts[t] if include_bias else contexts[t, :-1]
        trace = policy.select(x if policy.contextual else None)
        arm = trace.arm
        reward = float(realized[t, arm])
        policy.update(arm, x if policy.contextual else None, reward)
        arms[t] = arm
        rewards[t] = reward
    regret = np.cumsum(oracle - rewards)
    return SimulationResult(
        policy=policy_name,
        seed=seed,
        arms=arms,
        rewards=rewards,
        oracles=oracle,
        regret=regret,
    )


def simulate_static_arm(
    arm_index: int, spec: EnvSpec, n_rounds: int, seed: int
) -> SimulationResult:
    """Exact counterpart of `simulate_policy` for a fixed arm."""
    if not 0 <= arm_index < spec.n_arms:
        raise ContractError(f"arm index {arm_index} out of range [0, {spec.n_arms})")
    env = LinearSyntheticEnv(dataclasses.replace(spec, seed=seed))
    _, _, realized, oracle = env.generate(n_rounds)
    rewards = realized[:, arm_index]
    regret = np.cumsum(oracle - rewards)
    return SimulationResult(
        policy=f"static:{arm_index}",
        seed=seed,
        arms=np.full(n_rounds, arm_index, dtype=np.int64),
        rewards=rewards,
        oracles=oracle,
        regret=regret,
    )


def _judge_equivalence(
    original: str, rewritten: str, gateway: Gateway
) -> int:
    from .rewards import parse_verdict

    request = ChatRequest(
        model=gateway.model_for("judge"),
        messages=(
            {"role": "system", "content": EQUIVALENCE_SYSTEM_PROMPT},
            {
                "role": "user",
                "content": EQUIVALENCE_USER_TEMPLATE.format(
                    original=original, rewritten=rewritten
                ),
            },
        ),
        temperature=0.0,
        top_p=1.0,
        purpose="judge",
    )
    return parse_verdict(gateway.chat(request).content)


def _perturb_query(record: DatasetRecord, index: int, gateway: Gateway) -> str:
    request = ChatRequest(
        model=gateway.model_for("rewriter"),
        messages=(
            {"role": "system", "content": PERTURB_SYSTEM_TEMPLATE.format(index=index)},
            {"role": "user", "content": f"Query: {record.query}"},
        ),
        temperature=0.2,
        top_p=1.0,
        purpose="rewriter",
    )
    text = sanitize_rewrite(gateway.chat(request).content)
    if not text:
        raise ProtocolError(f"perturbation #{index} of record {record.id!r} is empty")
    return text


def construct_dataset(
    config: ExperimentConfig,
    records: Sequence[DatasetRecord],
    gateway: Gateway,
    adapter: SyntheticLLM | None = None,
    seed: int | None = None,
) -> tuple[list[DatasetRecord], list[dict]]:
    """Filter records to answerable-but-fragile queries and emit perturbations.

    A record is kept when (a) its original query is answered correctly,
    (b) all five generated perturbations are semantically valid (equivalence
    verdict plus a unigram-overlap floor), and (c) between one and three of
    them are answered incorrectly. One of the five perturbations, chosen
    uniformly, replaces the query in the emitted record; the audit trail
    records everything else.
    """
    rng = np.random.default_rng(config.seeds[0] if seed is None else seed)
    kept: list[DatasetRecord] = []
    audit: list[dict] = []
    for record in records:
        if adapter is not None:
            adapter.bind_record(record)
        entry: dict = {"id": record.id, "original_query": record.query}
        try:
            answer = _answer_query(record, record.query, gateway, config)
            original_ok, _ = judge_answer(record.query, record.references, answer, gateway)
            entry["original_correct"] = bool(original_ok)
            if not original_ok:
                entry.update(kept=False, reason="unanswerable_original")
                audit.append(entry)
                logger.info("drop %s: original query not answered correctly", record.id)
                continue

            perturbations = [
                _perturb_query(record, i, gateway) for i in range(1, N_PERTURBATIONS + 1)
            ]
            entry["perturbations"] = perturbations
            overlaps = [bleu1(p, record.query) for p in perturbations]
            equivalent = [
                _judge_equivalence(record.query, p, gateway) == 1 for p in perturbations
            ]
            valid = [
                overlap >= config.perturbation_overlap_min and eq
                for overlap, eq in zip(overlaps, equivalent)
            ]
            entry["overlaps"] = overlaps
            entry["valid"] = valid
            if not all(valid):
                entry.update(kept=False, reason="invalid_perturbation")
                audit.append(entry)
                logger.info("drop %s: perturbations failed validity", record.id)
                continue

            correct = []
            for p in perturbations:
                p_answer = _answer_query(record, p, gateway, config)
                ok, _ = judge_answer(record.query, record.references, p_answer, gateway)
                correct.append(bool(ok))
            n_incorrect = sum(1 for ok in correct if not ok)
            entry["answers_correct"] = correct
            entry["n_incorrect"] = n_incorrect
            if not MIN_INCORRECT_PERTURBATIONS <= n_incorrect <= MAX_INCORRECT_PERTURBATIONS:
                entry.update(kept=False, reason=f"incorrect_count_{n_incorrect}")
                audit.append(entry)
                logger.info(
                    "drop %s: %d incorrect perturbations outside [%d, %d]",
                    record.id,
                    n_incorrect,
                    MIN_INCORRECT_PERTURBATIONS,
                    MAX_INCORRECT_PERTURBATIONS,
                )
                continue

            chosen = int(rng.integers(0, N_PERTURBATIONS))
            entry.update(kept=True, reason=None, chosen_index=chosen + 1)
            kept.append(dataclasses.replace(record, query=perturbations[chosen]))
            audit.append(entry)
        except (ProtocolError, TransportError) as exc:
            entry.update(kept=False, reason=f"pipeline_error:{type(exc).__name__}")
            entry["message"] = str(exc)
            audit.append(entry)
            logger.warning("drop %s: pipeline error %s", record.id, exc)
    return kept, audit


def write_construction_outputs(
    kept: Sequence[DatasetRecord], audit: Sequence[dict], out_dir: str | Path
) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "constructed_dataset.jsonl"
    audit_path = out / "construction_audit.jsonl"
    save_dataset(kept, dataset_path)
    with open(audit_path, "w") as handle:
        for entry in audit:
            handle.write(_json_line(entry) + "\n")
    return dataset_path, audit_path
