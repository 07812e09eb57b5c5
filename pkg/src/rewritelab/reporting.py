"""Turns round logs into CSV reports.

All output is byte-deterministic for identical logs: files and rows are
iterated in sorted order, floats are rendered with `repr`, and NaN or
missing values become empty cells.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError
from .features import FEATURE_NAMES
from .metrics import (
    DEFAULT_ENTROPY_WEIGHT,
    accuracy_table,
    cumulative_regret,
    exploration_adjusted_reward,
    feature_uplift,
    inter_arm_context_kl,
    per_feature_variance,
    win_rate,
)
from .runner import read_run_log

_LOG_PATTERN = re.compile(r"rounds_seed(\d+)\.jsonl$")


@dataclass
class RunData:
    """Successful rounds of one seeded run, plus failure counts."""

    label: str
    seed: int
    dataset: str
    n_arms: int
    arm_names: list[str]
    query_ids: list[str]
    arms: list[int]
    rewards: list[float]
    oracles: list[float | None]
    verdicts: list[int]
    features: list[list[int]]
    n_failed: int

    @property
    def has_oracles(self) -> bool:
        return bool(self.oracles) and all(o is not None for o in self.oracles)


def load_run(run_dir: str | Path) -> list[RunData]:
    """All seeded logs under one run directory, ordered by seed."""
    run_dir = Path(run_dir)
    paths = []
    for path in run_dir.glob("rounds_seed*.jsonl"):
        match = _LOG_PATTERN.search(path.name)
        if match:
            paths.append((int(match.group(1)), path))
    if not paths:
        raise ContractError(f"no run logs in {run_dir}")
    runs = []
    for seed, path in sorted(paths):
        header, records = read_run_log(path)
        dataset = header.get("dataset") or "dataset"
        data = RunData(
            label=header["policy"],
            seed=seed,
            dataset=Path(dataset).stem,
            n_arms=header["n_arms"],
            arm_names=list(header["arms"]),
            query_ids=[],
            arms=[],
            rewards=[],
            oracles=[],
            verdicts=[],
            features=[],
            n_failed=0,
        )
        for payload in records:
            if payload["type"] == "error":
                data.n_failed += 1
                continue
            data.query_ids.append(payload["query_id"])
            data.arms.append(payload["arm"])
            data.rewards.append(payload["reward"]["total"])
            data.oracles.append(payload.get("oracle"))
            data.verdicts.append(int(round(payload["reward"]["llm"])))
            data.features.append(list(payload["features"]))
        runs.append(data)
    return runs


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    with open(path, "w") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _safe_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "-", label)


def _performance_rows(
    runs: Sequence[RunData],
    baseline: Sequence[RunData] | None,
    entropy_weight: float,
) -> list[list]:
    rows = []
    per_seed_means: list[float] = []
    for run in runs:
        n = len(run.rewards)
        adjusted = exploration_adjusted_reward(
            run.arms, run.rewards, run.n_arms, entropy_weight
        ) if n else 0.0
        regret_total = None
        if run.has_oracles and n:
            regret_total = float(cumulative_regret(run.rewards, run.oracles)[-1])
        win = loss = tie = None
        if baseline is not None:
            base = next((b for b in baseline if b.seed == run.seed), None)
            if base is not None and base.query_ids == run.query_ids:
                stats = win_rate(
                    list(zip(run.query_ids, run.rewards)),
                    list(zip(base.query_ids, base.rewards)),
                )
                win, loss, tie = stats.win, stats.loss, stats.tie
        mean_reward = float(np.mean(run.rewards)) if n else 0.0
        per_seed_means.append(mean_reward)
        rows.append([
            run.label,
            run.seed,
            n,
            run.n_failed,
            mean_reward,
            float(np.mean(run.verdicts)) if n else 0.0,
            adjusted,
            adjusted / n if n else 0.0,
            regret_total,
            regret_total / n if (regret_total is not None and n) else None,
            win,
            loss,
            tie,
        ])
    if len(runs) > 1:
        stack = [r for r in rows]
        def col(i):
            vals = [row[i] for row in stack if row[i] is not None]
            return float(np.mean(vals)) if vals else None
        rows.append([
            runs[0].label,
            "all",
            int(np.sum([row[2] for row in stack])),
            int(np.sum([row[3] for row in stack])),
            col(4), col(5), col(6), col(7), col(8), col(9), col(10), col(11), col(12),
        ])
    return rows


PERFORMANCE_HEADER = (
    "policy", "seed", "rounds", "failed", "mean_reward", "accuracy",
    "adjusted_reward_total", "adjusted_reward_per_round",
    "regret_total", "regret_per_round",
    "win_pct", "loss_pct", "tie_pct",
)


def report_bundle(
    run_dirs: Sequence[str | Path],
    out_dir: str | Path,
    baseline_dir: str | Path | None = None,
    entropy_weight: float = DEFAULT_ENTROPY_WEIGHT,
) -> dict[str, Path]:
    """Aggregate one or more run directories into CSV reports.

    Emits a per-policy performance table, cumulative reward (and, when
    oracles were logged, regret) curves, per-arm feature diagnostics, and,
    when at least two policies are present, the cross-policy accuracy table.
    """
    if not run_dirs:
        raise ContractError("report_bundle needs at least one run directory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    baseline = load_run(baseline_dir) if baseline_dir is not None else None

    groups: list[list[RunData]] = [load_run(d) for d in run_dirs]
    if baseline is not None:
        groups.append(baseline)

    outputs: dict[str, Path] = {}
    perf_rows: list[list] = []
    for runs in groups:
        against = baseline if (baseline is not None and runs is not baseline) else None
        perf_rows.extend(_performance_rows(runs, against, entropy_weight))
    outputs["policy_performance"] = _write_csv(
        out / "policy_performance.csv", PERFORMANCE_HEADER, perf_rows
    )

    scores: dict[str, dict[str, float]] = {}
    for runs in groups:
        label = runs[0].label
        dataset = runs[0].dataset
        verdicts = [v for run in runs for v in run.verdicts]
        if verdicts:
            scores.setdefault(dataset, {})[label] = float(np.mean(verdicts))
    labels = {label for per in scores.values() for label in per}
    if len(labels) >= 2 and all(set(per) == labels for per in scores.values()):
        table = accuracy_table(scores)
        acc_rows = [
            [
                policy,
                *(table.accuracy[d][policy] for d in table.datasets),
                table.macro_average[policy],
                table.wins[policy],
            ]
            for policy in table.policies
        ]
        outputs["accuracy_table"] = _write_csv(
            out / "accuracy_table.csv",
            ["policy", *table.datasets, "macro_average", "wins"],
            acc_rows,
        )

    for runs in groups:
        label = _safe_label(runs[0].label)
        outputs[f"reward_curve_{label}"] = _write_curve(
            out / f"reward_curve_{label}.csv", runs, kind="reward"
        )
        if all(run.has_oracles for run in runs):
            outputs[f"regret_curve_{label}"] = _write_curve(
                out / f"regret_curve_{label}.csv", runs, kind="regret"
            )
        outputs.update(_write_feature_reports(out, label, runs))
    return outputs


def _write_curve(path: Path, runs: Sequence[RunData], kind: str) -> Path:
    series = []
    for run in runs:
        if kind == "reward":
            series.append(np.cumsum(run.rewards))
        else:
            series.append(cumulative_regret(run.rewards, run.oracles))
    length = min((len(s) for s in series), default=0)
    series = [s[:length] for s in series]
    header = ["t"] + [f"seed{run.seed}" for run in runs] + ["mean"]
    rows = []
    for t in range(length):
        values = [float(s[t]) for s in series]
        rows.append([t + 1, *values, float(np.mean(values))])
    return _write_csv(path, header, rows)


def _write_feature_reports(
    out: Path, label: str, runs: Sequence[RunData]
) -> dict[str, Path]:
    arms = [a for run in runs for a in run.arms]
    rewards = [r for run in runs for r in run.rewards]
    features = [f for run in runs for f in run.features]
    if not arms:
        return {}
    n_arms = runs[0].n_arms
    arm_names = runs[0].arm_names
    matrix = np.asarray(features, dtype=np.float64)

    outputs = {}
    uplift = feature_uplift(arms, matrix, rewards, n_arms)
    outputs[f"feature_uplift_{label}"] = _write_csv(
        out / f"feature_uplift_{label}.csv",
        ["arm", *FEATURE_NAMES],
        [[arm_names[a], *uplift[a]] for a in range(n_arms)],
    )
    variance = per_feature_variance(arms, matrix, n_arms)
    outputs[f"feature_variance_{label}"] = _write_csv(
        out / f"feature_variance_{label}.csv",
        ["arm", *FEATURE_NAMES],
        [[arm_names[a], *variance[a]] for a in range(n_arms)],
    )
    kl = inter_arm_context_kl(arms, matrix, n_arms)
    outputs[f"context_kl_{label}"] = _write_csv(
        out / f"context_kl_{label}.csv",
        ["arm", *arm_names],
        [[arm_names[a], *kl[a]] for a in range(n_arms)],
    )
    return outputs
