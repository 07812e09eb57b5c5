"""Command-line entry points.

Every subcommand works offline against the synthetic environment by
default; live/record/replay modes only need a config pointing at an
endpoint and cache.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .arms import apply_rewrite, arm_roster
from .config import ENV_NAMES, GATEWAY_MODES, ExperimentConfig, load_config
from .datasets import DatasetRecord, load_dataset
from .errors import ConfigurationError, RewriteLabError
from .features import tag_features
from .reporting import report_bundle
from .rewards import simplex_sweep, write_sweep_csv
from .runner import (
    build_env_spec,
    build_run_gateway,
    construct_dataset,
    run_experiment,
    run_static_policy,
    simulate_policy,
    simulate_static_arm,
    write_construction_outputs,
)

logger = logging.getLogger(__name__)


def _load_cli_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    for key, attr in (
        ("policy", "policy"),
        ("n_rounds", "rounds"),
        ("dataset_path", "dataset"),
        ("output_dir", "out"),
        ("gateway_mode", "mode"),
        ("env_name", "env"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "seeds", None):
        overrides["seeds"] = tuple(args.seeds)
    if getattr(args, "no_strict_replay", False):
        overrides["strict_replay"] = False
    if getattr(args, "with_no_rewrite", False):
        overrides["include_no_rewrite"] = True
    if args.config is not None:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**overrides)


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML experiment config")
    parser.add_argument("--policy", help="policy name (see `rewritelab run --help`)")
    parser.add_argument("--rounds", type=int, help="rounds per seed")
    parser.add_argument("--seeds", type=int, nargs="+", help="seeds to run")
    parser.add_argument("--dataset", help="dataset JSONL path")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--mode", choices=GATEWAY_MODES, help="gateway mode")
    parser.add_argument("--env", choices=ENV_NAMES, help="synthetic environment")
    parser.add_argument(
        "--no-strict-replay",
        action="store_true",
        help="allow live calls on replay-cache misses",
    )
    parser.add_argument(
        "--with-no-rewrite",
        action="store_true",
        help="add the identity arm to the roster",
    )


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    summaries = run_experiment(config, resume=args.resume)
    for summary in summaries:
        print(
            f"seed {summary.seed}: {summary.n_rounds} rounds, "
            f"mean reward {summary.mean_reward:.4f}, accuracy {summary.accuracy:.4f}, "
            f"log {summary.log_path}"
        )
    return 0


def _cmd_static(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    summaries = run_static_policy(config, args.arm, resume=args.resume)
    for summary in summaries:
        print(
            f"seed {summary.seed}: arm {args.arm}, "
            f"mean reward {summary.mean_reward:.4f}, accuracy {summary.accuracy:.4f}"
        )
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in config.seeds:
        spec = build_env_spec(config, seed)
        if args.arm is not None:
            result = simulate_static_arm(args.arm, spec, config.n_rounds, seed)
        else:
            result = simulate_policy(
                config.policy, spec, config.n_rounds, seed,
                policy_params=config.policy_params,
                include_bias=config.include_bias,
            )
        rows.append(result)
        print(
            f"seed {seed}: {result.policy} final regret {result.final_regret:.3f} "
            f"over {config.n_rounds} rounds"
        )
    curve_path = out / "simulated_regret.csv"
    with open(curve_path, "w") as handle:
        handle.write("t," + ",".join(f"seed{r.seed}" for r in rows) + "\n")
        stacked = np.stack([r.regret for r in rows], axis=1)
        for t in range(stacked.shape[0]):
            handle.write(
                str(t + 1) + "," + ",".join(repr(float(v)) for v in stacked[t]) + "\n"
            )
    print(f"regret curves written to {curve_path}")
    return 0


def _cmd_construct(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    if config.dataset_path is None:
        raise ConfigurationError("construct-dataset needs --dataset")
    records = load_dataset(config.dataset_path)
    gateway, adapter = build_run_gateway(config, config.seeds[0])
    kept, audit = construct_dataset(config, records, gateway, adapter=adapter)
    dataset_path, audit_path = write_construction_outputs(kept, audit, config.output_dir)
    print(f"kept {len(kept)}/{len(records)} records")
    print(f"dataset: {dataset_path}")
    print(f"audit:   {audit_path}")
    return 0


def _synthetic_round_context(config: ExperimentConfig, query: str):
    gateway, adapter = build_run_gateway(config, config.seeds[0])
    if adapter is not None:
        record = DatasetRecord(id="cli", query=query, references=("cli",))
        adapter.begin_round(record)
    return gateway


def _cmd_tag(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    gateway = _synthetic_round_context(config, args.query)
    context = tag_features(args.query, gateway)
    print(json.dumps(context.as_mapping(), indent=2, sort_keys=True))
    return 0


def _cmd_rewrite(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    roster = {arm.name: arm for arm in arm_roster(include_no_rewrite=True)}
    if args.arm not in roster:
        raise ConfigurationError(f"unknown arm {args.arm!r}; choose from {sorted(roster)}")
    gateway = _synthetic_round_context(config, args.query)
    result = apply_rewrite(roster[args.arm], args.query, gateway)
    print(result.rewritten)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    components = []
    labels = []
    with open(args.scores) as handle:
        header = handle.readline().strip().split(",")
        expected = ["llm", "fuzz", "bleu", "label"]
        if header != expected:
            raise ConfigurationError(f"scores CSV must have columns {expected}, got {header}")
        for line in handle:
            line = line.strip()
            if not line:
                continue
            llm, fuzz, bleu, label = line.split(",")
            components.append([float(llm), float(fuzz), float(bleu)])
            labels.append(int(label))
    cells = simplex_sweep(np.asarray(components), labels, grid_step=args.grid_step)
    write_sweep_csv(cells, args.out)
    best = cells[0]
    print(
        f"best AUC {best.auc:.4f} at weights "
        f"({best.alpha:.2f}, {best.beta:.2f}, {best.gamma:.2f}); "
        f"{sum(c.top1pct for c in cells)} cells within the top band"
    )
    print(f"sweep written to {args.out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    outputs = report_bundle(args.runs, args.out, baseline_dir=args.baseline)
    for name in sorted(outputs):
        print(f"{name}: {outputs[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewritelab",
        description="Bandit-driven query rewriting experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="online bandit run over a dataset")
    _add_config_options(p_run)
    p_run.add_argument("--resume", action="store_true", help="continue an interrupted run")
    p_run.set_defaults(func=_cmd_run)

    p_static = sub.add_parser("static", help="fixed-arm baseline run")
    _add_config_options(p_static)
    p_static.add_argument("--arm", required=True, help="arm name, e.g. NoRewrite")
    p_static.add_argument("--resume", action="store_true")
    p_static.set_defaults(func=_cmd_static)

    p_sim = sub.add_parser("simulate", help="numeric run against the synthetic environment")
    _add_config_options(p_sim)
    p_sim.add_argument("--arm", type=int, help="simulate a fixed arm index instead of a policy")
    p_sim.set_defaults(func=_cmd_simulate)

    p_con = sub.add_parser("construct-dataset", help="filter and perturb a raw dataset")
    _add_config_options(p_con)
    p_con.set_defaults(func=_cmd_construct)

    p_tag = sub.add_parser("tag-features", help="tag one query's binary features")
    _add_config_options(p_tag)
    p_tag.add_argument("--query", required=True)
    p_tag.set_defaults(func=_cmd_tag)

    p_rw = sub.add_parser("rewrite", help="apply one rewrite arm to a query")
    _add_config_options(p_rw)
    p_rw.add_argument("--arm", required=True)
    p_rw.add_argument("--query", required=True)
    p_rw.set_defaults(func=_cmd_rewrite)

    p_sw = sub.add_parser("sweep-weights", help="grid-search reward weights on scored rounds")
    p_sw.add_argument("--scores", required=True, help="CSV with columns llm,fuzz,bleu,label")
    p_sw.add_argument("--out", required=True, help="output CSV path")
    p_sw.add_argument("--grid-step", type=float, default=0.05)
    p_sw.set_defaults(func=_cmd_sweep)

    p_rep = sub.add_parser("report", help="aggregate run logs into CSV reports")
    p_rep.add_argument("--runs", nargs="+", required=True, help="run directories")
    p_rep.add_argument("--baseline", help="baseline run directory for win rates")
    p_rep.add_argument("--out", required=True, help="report output directory")
    p_rep.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RewriteLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
