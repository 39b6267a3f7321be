"""Comparison methods: linear scalarization, stationary greedy selection on a
welfare Q-table, and round-robin mixtures of single-objective policies."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .learner import (
    EvalSummary,
    LearnerConfig,
    QTable,
    RunRecord,
    rollout,
    run_training,
    summarize,
    weight_chooser,
    welfare_chooser,
)
from .welfare import WelfareSpec, utilitarian

DEFAULT_INTERVALS = (1, 2, 5, 10, 23, 50, 108, 227, 500, 1000)
SCORE_COLUMNS = ("parameter", "seed", "nsw", "utilitarian")


def check_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be non-negative and sum to 1, got {weights}")
    return w


def simplex_grid(n: int, step: float) -> list[tuple[float, ...]]:
    """All weight vectors on the simplex whose entries are multiples of ``step``."""
    k = round(1.0 / step)
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise ValueError(f"grid step {step} must divide 1")
    points = []

    def compose(prefix, left, parts):
        if parts == 1:
            points.append(tuple(x / k for x in prefix + [left]))
            return
        for x in range(left, -1, -1):
            compose(prefix + [x], left - x, parts - 1)

    compose([], k, n)
    return points


def scalarized_q_learning(env, weights, cfg: LearnerConfig, rng=None, on_episode=None) -> tuple[QTable, RunRecord]:
    """Vector Q-learning where both epsilon-greedy selection and the TD target
    maximise the weighted sum w . Q(s, a)."""
    w = check_weights(weights)
    if w.size != env.dim:
        raise ValueError("one weight per reward dimension")
    return run_training(env, cfg, weight_chooser(w), nonstationary=False, rng=rng, on_episode=on_episode)


def _greedy(q: QTable, choose):
    def policy(s, ep, t):
        acts = q.actions(s)
        return int(acts[choose(q.values[s, acts])])

    return policy


def scalarized_eval(q: QTable, env, weights, steps: int, runs: int, rng, gamma: float = 0.99) -> EvalSummary:
    policy = _greedy(q, weight_chooser(check_weights(weights)))
    return summarize([rollout(env, policy, steps, rng, gamma) for _ in range(runs)])


def stationary_eval(q: QTable, env, w: WelfareSpec, steps: int, runs: int, rng, gamma: float = 0.99) -> EvalSummary:
    """Greedy argmax_a W(Q(s, a)) rollouts that ignore the accumulated reward."""
    policy = _greedy(q, welfare_chooser(w))
    return summarize([rollout(env, policy, steps, rng, gamma) for _ in range(runs)])


def _seed_rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def weight_grid_search(
    env,
    grid_step: float,
    cfg: LearnerConfig,
    seeds: int = 5,
    eval_steps: int | None = None,
    eval_runs: int = 1,
) -> tuple[tuple[float, ...], list[dict]]:
    """Train and greedily evaluate every simplex grid point; pick the best mean NSW.

    Each point is trained with seeds ``cfg.seed .. cfg.seed + seeds - 1``.
    Returns the best weights and the full score table (one row per point and seed).
    """
    grid = simplex_grid(env.dim, grid_step)
    if not grid:
        raise ValueError("empty weight grid")
    steps = eval_steps or cfg.episode_length
    rows, best, best_score = [], None, -np.inf
    for w in grid:
        scores = []
        for k in range(seeds):
            seed = cfg.seed + k
            run_cfg = replace(cfg, seed=seed)
            q, _ = scalarized_q_learning(env, w, run_cfg, rng=_seed_rng(seed))
            ev = scalarized_eval(q, env, w, steps, eval_runs, _seed_rng(seed, 1), cfg.gamma)
            rows.append({"parameter": _fmt_weights(w), "seed": seed, "nsw": ev.nsw_mean, "utilitarian": ev.util_mean})
            scores.append(ev.nsw_mean)
        if np.mean(scores) > best_score:
            best, best_score = w, float(np.mean(scores))
    return best, rows


def _fmt_weights(w) -> str:
    return "/".join(f"{x:g}" for x in w)


class ProjectedEnv:
    """View of an environment whose reward is a single dimension."""

    def __init__(self, env, dim_index: int):
        self.env = env
        self.index = dim_index
        self.dim = 1
        self.n_states = env.n_states
        self.n_actions = env.n_actions
        self.episodic = getattr(env, "episodic", False)
        self.terminals = getattr(env, "terminals", frozenset())
        if hasattr(env, "actions_at"):
            self.actions_at = env.actions_at

    def actions(self, s):
        return self.env.actions(s)

    def is_terminal(self, s):
        return self.env.is_terminal(s)

    def start_state(self, rng=None):
        return self.env.start_state(rng)

    def step(self, s, a, rng):
        s2, r = self.env.step(s, a, rng)
        return s2, r[self.index : self.index + 1]


def train_base_policies(env, cfg: LearnerConfig) -> list[QTable]:
    """One scalar Q-learner per reward dimension, each on that dimension alone."""
    tables = []
    for i in range(env.dim):
        run_cfg = replace(cfg, welfare=utilitarian(), selection="stationary")
        q, _ = run_training(
            ProjectedEnv(env, i),
            run_cfg,
            welfare_chooser(utilitarian()),
            nonstationary=False,
            rng=_seed_rng(cfg.seed, i),
        )
        tables.append(q)
    return tables


@dataclass
class MixtureConfig:
    base_policies: list[QTable]
    interval: int

    def __post_init__(self):
        if self.interval < 1:
            raise ValueError("switching interval must be >= 1")
        if not self.base_policies:
            raise ValueError("need at least one base policy")


def mixture_schedule(steps: int, interval: int, n: int) -> list[int]:
    """Index of the active base policy at each step (round-robin from 0)."""
    return [(t // interval) % n for t in range(steps)]


def mixture_policy(mix: MixtureConfig, eps: float = 0.0, rng=None):
    n = len(mix.base_policies)
    choose = welfare_chooser(utilitarian())

    def policy(s, ep, t):
        q = mix.base_policies[(t // mix.interval) % n]
        acts = q.actions(s)
        if eps > 0 and rng.random() < eps:
            return int(acts[rng.integers(len(acts))])
        return int(acts[choose(q.values[s, acts])])

    return policy


def mixture_eval(mix: MixtureConfig, env, steps: int, runs: int, rng, gamma: float = 0.99) -> EvalSummary:
    """Greedy rollouts that switch base policy every ``interval`` steps."""
    if len(mix.base_policies) != env.dim:
        raise ValueError("need exactly one base policy per reward dimension")
    policy = mixture_policy(mix)
    return summarize([rollout(env, policy, steps, rng, gamma) for _ in range(runs)])


def interval_grid_search(
    env,
    candidates: Sequence[int],
    base_policies: list[QTable],
    steps: int,
    runs: int = 1,
    seed: int = 0,
) -> tuple[int, list[dict]]:
    """Evaluate the mixture at each interval; return the NSW-maximal one."""
    if not candidates:
        raise ValueError("no interval candidates")
    rows, best, best_score = [], None, -np.inf
    for interval in candidates:
        ev = mixture_eval(MixtureConfig(base_policies, interval), env, steps, runs, _seed_rng(seed, interval))
        rows.append({"parameter": interval, "seed": seed, "nsw": ev.nsw_mean, "utilitarian": ev.util_mean})
        if ev.nsw_mean > best_score:
            best, best_score = interval, ev.nsw_mean
    return best, rows


def scores_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SCORE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in SCORE_COLUMNS})
    return buf.getvalue()
