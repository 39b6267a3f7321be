"""Seeded batch experiments: configuration, per-run training, CSV/JSON output,
and the welfare, dimension and resource-distribution sweeps."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .baselines import (
    MixtureConfig,
    mixture_eval,
    mixture_policy,
    scalarized_eval,
    scalarized_q_learning,
    stationary_eval,
    train_base_policies,
)
from .envs import (
    RESOURCE_TYPES,
    AllocationInstance,
    RgConfig,
    TaxiConfig,
    build_allocation_momdp,
    build_fig1,
    build_fig3,
    build_rg,
    build_taxi,
)
from .learner import LearnerConfig, QTable, RunRecord, evaluate_nonstationary, rollout, train
from .momdp import random_momdp
from .welfare import WelfareSpec, egalitarian, nsw, p_welfare

ENVS = ("taxi", "rg", "fig1", "fig3", "allocation", "random")
ALGOS = ("welfare-q", "stationary", "scalarized", "mixture")
CSV_COLUMNS = ("run", "episode", "nsw", "util")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "taxi"
    env_params: Mapping[str, Any] = field(default_factory=dict)
    algo: str = "welfare-q"
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    runs: int = 5
    base_seed: int = 0
    weights: tuple[float, ...] | None = None  # scalarized; equal weights when unset
    interval: int = 50  # mixture switching interval
    eval_every: int = 0  # greedy evaluation every k episodes (0 = never)
    eval_steps: int | None = None  # defaults to the episode length
    workers: int = 1

    def __post_init__(self):
        if self.env not in ENVS:
            raise ConfigError(f"unknown env {self.env!r}; choose from {', '.join(ENVS)}")
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; choose from {', '.join(ALGOS)}")
        if self.runs < 1 or self.workers < 1 or self.interval < 1 or self.eval_every < 0:
            raise ConfigError("runs, workers and interval must be >= 1; eval_every >= 0")
        object.__setattr__(self, "env_params", dict(self.env_params))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(x) for x in self.weights))

    @property
    def steps_per_eval(self) -> int:
        return self.eval_steps or self.learner.episode_length

    def to_dict(self) -> dict:
        out = asdict(self)
        out["learner"] = self.learner.to_dict()
        out["env_params"] = dict(self.env_params)
        out["weights"] = list(self.weights) if self.weights is not None else None
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        doc = dict(doc)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "learner" in doc and not isinstance(doc["learner"], LearnerConfig):
            try:
                doc["learner"] = LearnerConfig.from_dict(doc["learner"])
            except TypeError as exc:
                raise ConfigError(str(exc)) from None
        return cls(**doc)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def full_profile(cfg: ExperimentConfig) -> ExperimentConfig:
    """Long-horizon protocol: 10000-step episodes over 50 runs."""
    return replace(cfg, runs=50, learner=replace(cfg.learner, episode_length=10_000))


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment config from a ``.toml`` or ``.json`` file."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib

        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    elif path.suffix == ".json":
        doc = json.loads(path.read_text())
    else:
        raise ConfigError(f"config must be .toml or .json, got {path.name}")
    return ExperimentConfig.from_dict(doc)


def make_env(cfg: ExperimentConfig):
    p = dict(cfg.env_params)
    if cfg.env == "taxi":
        if "n" in p:
            return build_taxi(TaxiConfig.with_pairs(int(p.pop("n")), **p))
        return build_taxi(TaxiConfig.from_dict(p))
    if cfg.env == "rg":
        sword = p.pop("sword", None)
        if p.pop("scaled", False):
            sword = sword or 50.0
        if sword is not None:
            return build_rg(RgConfig.scaled(float(sword), **p))
        return build_rg(RgConfig(**p))
    if cfg.env == "fig1":
        return build_fig1(**p)[0]
    if cfg.env == "fig3":
        return build_fig3(int(p.get("n", 3)), p.get("gamma", cfg.learner.gamma))
    if cfg.env == "allocation":
        return build_allocation_momdp(AllocationInstance(np.array(p["utilities"])))
    rng = np.random.default_rng(p.pop("seed", 0))
    return random_momdp(
        p.get("n_states", 10), p.get("n_actions", 4), p.get("dim", 3), p.get("gamma", 0.9), rng
    )


def run_rng(base_seed: int, run: int) -> np.random.Generator:
    """Counter-based stream for run ``run``: keyed by base_seed + run only."""
    return np.random.Generator(np.random.Philox(key=base_seed + run))


def eval_rng(base_seed: int, run: int, episode: int) -> np.random.Generator:
    return np.random.default_rng([base_seed + run, 1, episode])


@dataclass
class RunResult:
    run: int
    record: RunRecord
    checkpoints: list[dict] = field(default_factory=list)
    q: QTable | list[QTable] | None = None
    wall_time: float = 0.0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunResult]

    def to_csv(self) -> str:
        return records_csv(self)

    def summary(self) -> dict:
        return summarize_experiment(self)


def _resource_values(env) -> np.ndarray | None:
    cfg = getattr(env, "cfg", None)
    if isinstance(cfg, RgConfig):
        return np.array(cfg.values)
    return None


def _checkpoint(episode: int, ev, prefix: str = "") -> dict:
    return {
        f"{prefix}nsw": ev.nsw_mean,
        f"{prefix}util": ev.util_mean,
        f"{prefix}totals": np.mean(ev.totals, axis=0).tolist(),
    }


def run_one(cfg: ExperimentConfig, run: int) -> RunResult:
    """Train (or roll out) a single seeded run. Each call owns its env and RNG."""
    env = make_env(cfg)
    seed = cfg.base_seed + run
    learner = replace(cfg.learner, seed=seed)
    rng = run_rng(cfg.base_seed, run)
    gamma, steps = learner.gamma, cfg.steps_per_eval
    weights = cfg.weights or tuple([1.0 / env.dim] * env.dim)
    checkpoints: list[dict] = []

    def want(episode: int) -> bool:
        return cfg.eval_every > 0 and (episode + 1) % cfg.eval_every == 0

    started = time.perf_counter()
    if cfg.algo in ("welfare-q", "stationary"):
        learner = replace(learner, selection="nonstationary" if cfg.algo == "welfare-q" else "stationary")

        def on_episode(episode, q):
            if not want(episode):
                return
            point = {"episode": episode + 1}
            if cfg.algo == "welfare-q":
                ev = evaluate_nonstationary(q, env, steps, 1, learner.welfare, eval_rng(cfg.base_seed, run, episode), gamma)
                point.update(_checkpoint(episode, ev))
                st = stationary_eval(q, env, learner.welfare, steps, 1, eval_rng(cfg.base_seed, run, episode), gamma)
                point.update(_checkpoint(episode, st, "stationary_"))
            else:
                st = stationary_eval(q, env, learner.welfare, steps, 1, eval_rng(cfg.base_seed, run, episode), gamma)
                point.update(_checkpoint(episode, st))
            checkpoints.append(point)

        q, record = train(env, learner, rng=rng, on_episode=on_episode)
    elif cfg.algo == "scalarized":

        def on_episode(episode, q):
            if want(episode):
                ev = scalarized_eval(q, env, weights, steps, 1, eval_rng(cfg.base_seed, run, episode), gamma)
                checkpoints.append({"episode": episode + 1, **_checkpoint(episode, ev)})

        q, record = scalarized_q_learning(env, weights, learner, rng=rng, on_episode=on_episode)
    else:
        q = train_base_policies(env, learner)
        mix = MixtureConfig(q, cfg.interval)
        policy = mixture_policy(mix)
        record = RunRecord(seed=seed)
        for episode in range(learner.episodes):
            record.log(rollout(env, policy, learner.episode_length, rng, gamma))
            if want(episode):
                ev = mixture_eval(mix, env, steps, 1, eval_rng(cfg.base_seed, run, episode), gamma)
                checkpoints.append({"episode": episode + 1, **_checkpoint(episode, ev)})
    wall = time.perf_counter() - started
    record.wall_time = wall
    return RunResult(run, record, checkpoints, q, wall)


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> ExperimentResult:
    """Run ``cfg.runs`` seeded runs (threaded when ``workers > 1``), merged in run order.

    With ``out`` set, writes ``runs.csv`` and ``summary.json`` into that directory.
    """
    if cfg.workers == 1:
        runs = [run_one(cfg, i) for i in range(cfg.runs)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(lambda i: run_one(cfg, i), range(cfg.runs)))
    result = ExperimentResult(cfg, runs)
    if out is not None:
        write_outputs(result, out)
    return result


def _fmt(x: float) -> str:
    return repr(float(x))


def records_csv(result: ExperimentResult) -> str:
    """Per-run, per-episode metrics; Resource Gathering adds per-type counts."""
    values = _resource_values(make_env(result.config))
    header = list(CSV_COLUMNS) + (list(RESOURCE_TYPES) if values is not None else [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for rr in result.runs:
        rec = rr.record
        for ep, (v, u, tot) in enumerate(zip(rec.nsw, rec.util, rec.totals)):
            row = [rr.run, ep, _fmt(v), _fmt(u)]
            if values is not None:
                row += [_fmt(c) for c in np.round(tot / values)]
            writer.writerow(row)
    return buf.getvalue()


def final_window(values: Sequence[float], frac: float = 0.2) -> float:
    """Mean over the last ``frac`` of a series (at least one point)."""
    if len(values) == 0:
        raise ValueError("empty series")
    k = max(1, int(round(len(values) * frac)))
    return float(np.mean(values[-k:]))


def summarize_experiment(result: ExperimentResult) -> dict:
    cfg = result.config
    out = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "runs": len(result.runs),
        "final_nsw_mean": float(np.mean([final_window(r.record.nsw) for r in result.runs])),
        "final_util_mean": float(np.mean([final_window(r.record.util) for r in result.runs])),
        "last_episode_nsw_mean": float(np.mean([r.record.nsw[-1] for r in result.runs])),
        "wall_time": [r.wall_time for r in result.runs],
    }
    if all(r.checkpoints for r in result.runs):
        out["eval_final_nsw_mean"] = float(
            np.mean([final_window([c["nsw"] for c in r.checkpoints]) for r in result.runs])
        )
        out["eval_final_util_mean"] = float(
            np.mean([final_window([c["util"] for c in r.checkpoints]) for r in result.runs])
        )
    return out


def write_outputs(result: ExperimentResult, out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "runs.csv").write_text(records_csv(result))
    (out / "summary.json").write_text(json.dumps(summarize_experiment(result), indent=2, sort_keys=True))
    for rr in result.runs:
        if isinstance(rr.q, QTable):
            (out / f"q_run{rr.run}.json").write_text(rr.q.to_json())
    return out


# -- sweeps -----------------------------------------------------------------


def sweep_spec(p: float) -> WelfareSpec:
    """p-welfare for p != 0; p = 0 is the Nash limit."""
    return nsw() if p == 0 else p_welfare(p)


def _final_score(rr: RunResult, key: str) -> float:
    if rr.checkpoints:
        return final_window([c[key] for c in rr.checkpoints])
    return final_window(getattr(rr.record, key))


def _final_totals(rr: RunResult) -> np.ndarray:
    if rr.checkpoints:
        return np.mean([c["totals"] for c in rr.checkpoints[-max(1, round(len(rr.checkpoints) * 0.2)):]], axis=0)
    k = max(1, round(len(rr.record.totals) * 0.2))
    return np.mean(rr.record.totals[-k:], axis=0)


def sweep_welfare(
    cfg: ExperimentConfig, ps: Sequence[float] = (-1.0, -0.5, 0.0, 0.5, 1.0), include_egal: bool = False
) -> list[dict]:
    """One row per welfare function: final-window NSW/utilitarian and worst dimension."""
    specs = [sweep_spec(p) for p in ps] + ([egalitarian()] if include_egal else [])
    rows = []
    for spec in specs:
        run_cfg = replace(cfg, algo="welfare-q", learner=replace(cfg.learner, welfare=spec))
        result = run_experiment(run_cfg)
        totals = np.array([_final_totals(r) for r in result.runs])
        rows.append(
            {
                "welfare": str(spec),
                "nsw": float(np.mean([_final_score(r, "nsw") for r in result.runs])),
                "util": float(np.mean([_final_score(r, "util") for r in result.runs])),
                "min_dim": float(np.mean(totals.min(axis=1))),
            }
        )
    return rows


def episodes_to_fraction(episodes: Sequence[int], values: Sequence[float], frac: float = 0.9) -> int | None:
    """First episode whose value reaches ``frac`` of the final-window value.

    Returns None when the final value is not positive (nothing was learned).
    """
    final = final_window(values)
    if final <= 0:
        return None
    for ep, v in zip(episodes, values):
        if v >= frac * final:
            return int(ep)
    return None


def sweep_dimension(cfg: ExperimentConfig, dims: Sequence[int] = (2, 3, 4)) -> list[dict]:
    """Episodes-to-90%-of-final greedy NSW per Taxi dimension and seed."""
    if cfg.env != "taxi":
        raise ConfigError("dimension sweeps need a taxi environment")
    every = cfg.eval_every or 5
    rows = []
    for n in dims:
        params = {**cfg.env_params, "n": n}
        result = run_experiment(replace(cfg, algo="welfare-q", env_params=params, eval_every=every))
        for rr in result.runs:
            eps = [c["episode"] for c in rr.checkpoints]
            vals = [c["nsw"] for c in rr.checkpoints]
            rows.append(
                {
                    "n": n,
                    "seed": cfg.base_seed + rr.run,
                    "episodes_to_90": episodes_to_fraction(eps, vals),
                    "final_nsw": final_window(vals),
                }
            )
    return rows


def dimension_trend(rows: list[dict]) -> tuple[int, int]:
    """(seeds whose episodes-to-90% is non-decreasing in n, seeds total)."""
    by_seed: dict[int, list[tuple[int, int | None]]] = {}
    for row in rows:
        by_seed.setdefault(row["seed"], []).append((row["n"], row["episodes_to_90"]))
    good = 0
    for pts in by_seed.values():
        seq = [v for _, v in sorted(pts)]
        if all(v is not None for v in seq) and all(a <= b for a, b in zip(seq, seq[1:])):
            good += 1
    return good, len(by_seed)


def rg_distribution(cfg: ExperimentConfig, scaled: bool, eval_steps: int = 10_000) -> dict:
    """Per-type collection counts of the NSW and scalarized agents under greedy play.

    Counts come from one ``eval_steps``-step evaluation per run; returns the
    per-run counts and their mean for each agent.
    """
    params = dict(cfg.env_params)
    params["scaled"] = scaled
    base = replace(cfg, env="rg", env_params=params)
    env = make_env(base)
    values = _resource_values(env)
    out = {"types": list(RESOURCE_TYPES), "scaled": scaled}
    for agent in ("welfare-q", "scalarized"):
        result = run_experiment(replace(base, algo=agent, eval_every=0))
        per_run = []
        for rr in result.runs:
            rng = np.random.default_rng([cfg.base_seed + rr.run, 2])
            if agent == "welfare-q":
                ev = evaluate_nonstationary(rr.q, env, eval_steps, 1, cfg.learner.welfare, rng, cfg.learner.gamma)
            else:
                w = cfg.weights or tuple([1.0 / env.dim] * env.dim)
                ev = scalarized_eval(rr.q, env, w, eval_steps, 1, rng, cfg.learner.gamma)
            per_run.append(np.round(ev.totals[0] / values).tolist())
        key = "nsw" if agent == "welfare-q" else "scalarized"
        out[key] = {"per_run": per_run, "mean": np.mean(per_run, axis=0).tolist()}
    return out


def count_ranking(counts: Sequence[float]) -> list[int]:
    """Type indices ordered by count, largest first (ties by index)."""
    return sorted(range(len(counts)), key=lambda i: (-counts[i], i))


def rankings_agree(a: Sequence[float], b: Sequence[float]) -> bool:
    """True when no pair of types is strictly ordered one way in ``a`` and the
    other way in ``b`` (exact ties are compatible with either order)."""
    n = len(a)
    for i in range(n):
        for j in range(n):
            if a[i] > a[j] and b[i] < b[j]:
                return False
    return True


__all__ = [
    "ALGOS",
    "CSV_COLUMNS",
    "ENVS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "RunResult",
    "count_ranking",
    "dimension_trend",
    "episodes_to_fraction",
    "eval_rng",
    "final_window",
    "full_profile",
    "load_config",
    "make_env",
    "rankings_agree",
    "records_csv",
    "rg_distribution",
    "run_experiment",
    "run_one",
    "run_rng",
    "summarize_experiment",
    "sweep_dimension",
    "sweep_spec",
    "sweep_welfare",
    "write_outputs",
]
