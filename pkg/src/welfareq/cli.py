"""Command-line entry point: ``welfareq <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import scalarized_eval, stationary_eval
from .harness import (
    ALGOS,
    ENVS,
    ConfigError,
    ExperimentConfig,
    dimension_trend,
    full_profile,
    load_config,
    make_env,
    rg_distribution,
    run_experiment,
    sweep_dimension,
    sweep_welfare,
)
from .learner import QTable, evaluate_nonstationary
from .momdp import MomdpError, TabularMomdp, random_momdp, validate
from .operators import metric_axioms, operator_suite
from .welfare import WelfareError, egalitarian, nsw, p_welfare, parse_spec, utilitarian


def _env_param(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON experiment config")
    p.add_argument("--env", choices=ENVS)
    p.add_argument("--env-param", action="append", type=_env_param, default=[], metavar="KEY=VALUE")
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--welfare", help="e.g. util, egal, nsw:lambda=0.01, p:p=-0.5")
    p.add_argument("--episodes", type=int)
    p.add_argument("--steps", type=int, help="steps per episode")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int, help="base seed; run i uses seed + i")
    p.add_argument("--gamma", type=float)
    p.add_argument("--q-init", type=float)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--full", action="store_true", help="10000-step episodes, 50 runs")
    p.add_argument("--out", help="output directory")


def build_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.full:
        cfg = full_profile(cfg)
    top, learner = {}, {}
    if args.env:
        top["env"] = args.env
    if args.env_param:
        top["env_params"] = {**cfg.env_params, **dict(args.env_param)}
    if args.algo:
        top["algo"] = args.algo
    if args.runs is not None:
        top["runs"] = args.runs
    if args.seed is not None:
        top["base_seed"] = args.seed
    if args.eval_every is not None:
        top["eval_every"] = args.eval_every
    if args.workers is not None:
        top["workers"] = args.workers
    if args.welfare:
        learner["welfare"] = parse_spec(args.welfare)
    if args.episodes is not None:
        learner["episodes"] = args.episodes
    if args.steps is not None:
        learner["episode_length"] = args.steps
    if args.gamma is not None:
        learner["gamma"] = args.gamma
    if args.q_init is not None:
        learner["q_init"] = args.q_init
    return replace(cfg, learner=replace(cfg.learner, **learner), **top)


def _emit(obj, out: str | None, name: str) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    print(text)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text)


def cmd_train(args) -> int:
    cfg = build_config(args)
    result = run_experiment(cfg, args.out)
    summary = result.summary()
    summary.pop("config")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    cfg = build_config(args)
    env = make_env(cfg)
    q = QTable.from_json(Path(args.q).read_text())
    if q.shape[:2] != (env.n_states, env.n_actions) or q.dim != env.dim:
        raise ConfigError("Q-table does not match the environment")
    rng = np.random.default_rng(cfg.base_seed)
    steps, gamma, w = cfg.steps_per_eval, cfg.learner.gamma, cfg.learner.welfare
    if cfg.algo == "welfare-q":
        ev = evaluate_nonstationary(q, env, steps, cfg.runs, w, rng, gamma)
    elif cfg.algo == "stationary":
        ev = stationary_eval(q, env, w, steps, cfg.runs, rng, gamma)
    elif cfg.algo == "scalarized":
        weights = cfg.weights or tuple([1.0 / env.dim] * env.dim)
        ev = scalarized_eval(q, env, weights, steps, cfg.runs, rng, gamma)
    else:
        raise ConfigError("mixture policies are evaluated by `train --algo mixture`")
    _emit(ev.to_dict(), args.out, "eval.json")
    return 0


def cmd_sweep_welfare(args) -> int:
    cfg = build_config(args)
    rows = sweep_welfare(cfg, args.p, include_egal=args.egal)
    _emit(rows, args.out, "sweep_welfare.json")
    return 0


def cmd_sweep_dim(args) -> int:
    cfg = build_config(args)
    rows = sweep_dimension(cfg, args.dims)
    good, total = dimension_trend(rows)
    report = {"rows": rows, "seeds_nondecreasing": good, "seeds": total}
    _emit(report, args.out, "sweep_dim.json")
    if good < total - 1:
        print(f"warning: trend holds for only {good} of {total} seeds", file=sys.stderr)
        if args.out:
            (Path(args.out) / "trend_warning.json").write_text(json.dumps(report, sort_keys=True))
    return 0


def cmd_rg_dist(args) -> int:
    cfg = build_config(args)
    report = {"equal": rg_distribution(cfg, scaled=False), "scaled": rg_distribution(cfg, scaled=True)}
    _emit(report, args.out, "rg_distribution.json")
    return 0


def cmd_operators_check(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    momdp = random_momdp(10, 4, 3, 0.9, rng)
    specs = [nsw(), utilitarian(), p_welfare(-0.5), egalitarian()]
    report = {
        "operators": operator_suite(momdp, specs, args.pairs, rng),
        "metric": metric_axioms(momdp, args.triples, rng),
    }
    passed = report["metric"]["passed"] and all(e["passed"] for e in report["operators"].values())
    report["passed"] = passed
    _emit(report, args.out, "operators_check.json")
    return 0 if passed else 1


def cmd_validate_env(args) -> int:
    cfg = build_config(args)
    env = make_env(cfg)
    issues = validate(env) if isinstance(env, TabularMomdp) else []
    for issue in issues:
        print(issue)
    print(f"{cfg.env}: {env.n_states} states, {env.n_actions} actions, dim {env.dim}: "
          + ("ok" if not issues else f"{len(issues)} issue(s)"))
    return 1 if issues else 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="welfareq", description="Welfare Q-learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and log per-episode metrics")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of a saved Q-table")
    _common(p)
    p.add_argument("--q", required=True, help="Q-table JSON written by train")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-welfare", help="compare p-welfare functions")
    _common(p)
    p.add_argument("--p", type=_floats, default=[-1.0, -0.5, 0.0, 0.5, 1.0], help="comma list, 0 means NSW; write --p=-1,0.5 when the list starts negative")
    p.add_argument("--egal", action="store_true", help="also run egalitarian")
    p.set_defaults(func=cmd_sweep_welfare)

    p = sub.add_parser("sweep-dim", help="episodes to 90%% of final NSW per taxi dimension")
    _common(p)
    p.add_argument("--dims", type=_ints, default=[2, 3, 4])
    p.set_defaults(func=cmd_sweep_dim)

    p = sub.add_parser("rg-dist", help="resource counts, equal vs scaled rewards")
    _common(p)
    p.set_defaults(func=cmd_rg_dist)

    p = sub.add_parser("operators-check", help="contraction / fixed-point / metric checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--triples", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_operators_check)

    p = sub.add_parser("validate-env", help="structural checks on an environment")
    _common(p)
    p.set_defaults(func=cmd_validate_env)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MomdpError, WelfareError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
