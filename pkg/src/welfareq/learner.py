"""Welfare Q-learning: vector Q-tables, welfare-greedy targets and
non-stationary action selection on the accumulated reward."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .welfare import WelfareSpec, argmax_rows, exact_nsw, nsw, parse_spec, row_scores

Chooser = Callable[[np.ndarray], int]


class QTable:
    """Dense (state, action) -> reward-vector table.

    ``mask[s, a]`` marks available actions; entries outside the mask stay 0.
    """

    def __init__(self, values: np.ndarray, mask: np.ndarray, terminals=()):
        self.values = np.asarray(values, dtype=float)
        self.mask = np.asarray(mask, dtype=bool)
        self.terminals = frozenset(int(t) for t in terminals)
        if self.values.shape[:2] != self.mask.shape or self.values.ndim != 3:
            raise ValueError("Q values must be (S, A, n) with an (S, A) mask")

    @classmethod
    def zeros(cls, env) -> "QTable":
        S, A, n = env.n_states, env.n_actions, env.dim
        mask = np.zeros((S, A), dtype=bool)
        for s in range(S):
            mask[s, env.actions(s)] = True
        return cls(np.zeros((S, A, n)), mask, getattr(env, "terminals", ()))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def copy(self) -> "QTable":
        return QTable(self.values.copy(), self.mask.copy(), self.terminals)

    def actions(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.mask[s])

    def to_dict(self) -> dict:
        entries = [
            {"s": int(s), "a": int(a), "q": self.values[s, a].tolist()}
            for s, a in zip(*np.nonzero(self.mask))
        ]
        S, A, n = self.values.shape
        return {
            "n_states": S,
            "n_actions": A,
            "dim": n,
            "terminals": sorted(self.terminals),
            "entries": entries,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "QTable":
        S, A, n = doc["n_states"], doc["n_actions"], doc["dim"]
        values = np.zeros((S, A, n))
        mask = np.zeros((S, A), dtype=bool)
        for e in doc["entries"]:
            values[e["s"], e["a"]] = e["q"]
            mask[e["s"], e["a"]] = True
        return cls(values, mask, doc.get("terminals", ()))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "QTable":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.1
    alpha_schedule: str = "constant"  # or "visits": 1/k per (s, a) visit count
    gamma: float = 0.99
    epsilon: float = 1.0
    epsilon_final: float = 0.05
    epsilon_decay: float = 0.5  # fraction of episodes over which epsilon decays linearly
    welfare: WelfareSpec = field(default_factory=nsw)
    episode_length: int = 1000
    episodes: int = 100
    seed: int = 0
    selection: str = "nonstationary"  # or "stationary"
    discounted_metrics: bool = False
    q_init: float = 0.0  # initial value of every available Q entry (optimism when > 0)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.alpha_schedule not in ("constant", "visits"):
            raise ValueError(f"unknown alpha schedule {self.alpha_schedule!r}")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if self.epsilon < 0 or self.epsilon_final < 0:
            raise ValueError("exploration rates must be >= 0")
        if not 0 <= self.epsilon_decay <= 1:
            raise ValueError("epsilon_decay is a fraction of the episodes")
        if self.episode_length < 1 or self.episodes < 1:
            raise ValueError("episode_length and episodes must be >= 1")
        if self.selection not in ("nonstationary", "stationary"):
            raise ValueError(f"unknown selection mode {self.selection!r}")

    def epsilon_at(self, episode: int) -> float:
        """Linear decay from ``epsilon`` to ``epsilon_final``, then constant."""
        span = self.epsilon_decay * self.episodes
        if span <= 0 or episode >= span:
            return self.epsilon_final
        return self.epsilon + (self.epsilon_final - self.epsilon) * episode / span

    def to_dict(self) -> dict:
        out = asdict(self)
        out["welfare"] = str(self.welfare)
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> "LearnerConfig":
        doc = dict(doc)
        if isinstance(doc.get("welfare"), str):
            doc["welfare"] = parse_spec(doc["welfare"])
        return cls(**doc)


@dataclass
class EpisodeState:
    """Discounted accumulated reward and step counter within one episode."""

    r_acc: np.ndarray
    c: int = 0
    discount: float = 1.0  # gamma ** c

    @classmethod
    def fresh(cls, dim: int) -> "EpisodeState":
        return cls(np.zeros(dim))

    def advance(self, r: np.ndarray, gamma: float) -> None:
        self.r_acc = self.r_acc + self.discount * r
        self.c += 1
        self.discount *= gamma


@dataclass
class RunRecord:
    """Per-episode metrics of one training run."""

    seed: int
    nsw: list[float] = field(default_factory=list)
    util: list[float] = field(default_factory=list)
    totals: list[np.ndarray] = field(default_factory=list)
    wall_time: float = 0.0

    def log(self, acc: np.ndarray) -> None:
        self.nsw.append(exact_nsw(acc))
        self.util.append(float(np.mean(acc)))
        self.totals.append(np.array(acc))


@dataclass
class EvalSummary:
    nsw: np.ndarray
    util: np.ndarray
    totals: np.ndarray  # (runs, n) accumulated reward per run

    @property
    def nsw_mean(self) -> float:
        return float(np.mean(self.nsw))

    @property
    def nsw_std(self) -> float:
        return float(np.std(self.nsw))

    @property
    def util_mean(self) -> float:
        return float(np.mean(self.util))

    @property
    def util_std(self) -> float:
        return float(np.std(self.util))

    def to_dict(self) -> dict:
        return {
            "nsw_mean": self.nsw_mean,
            "nsw_std": self.nsw_std,
            "util_mean": self.util_mean,
            "util_std": self.util_std,
            "totals_mean": np.mean(self.totals, axis=0).tolist(),
        }


def welfare_chooser(spec: WelfareSpec) -> Chooser:
    score = row_scores(spec)
    return lambda m: argmax_rows(spec, m, score)


def weight_chooser(weights) -> Chooser:
    w = np.asarray(weights, dtype=float)
    return lambda m: int(np.argmax(m @ w))


def select_action(
    q: QTable,
    s: int,
    ep: EpisodeState,
    eps: float,
    w: WelfareSpec,
    rng,
    gamma: float | None = None,
) -> int:
    """Epsilon-greedy on W(r_acc + gamma**c * Q(s, a)); ties go to the lowest action.

    ``ep.discount`` holds gamma**c; passing ``gamma`` recomputes it from ``ep.c``.
    """
    acts = q.actions(s)
    if acts.size == 0:
        raise ValueError(f"state {s} has no actions")
    if rng.random() < eps:
        return int(acts[rng.integers(len(acts))])
    discount = ep.discount if gamma is None else gamma**ep.c
    rows = q.values[s, acts]
    if not w.is_linear:
        rows = ep.r_acc + discount * rows
    return int(acts[argmax_rows(w, rows)])


def update(
    q: QTable,
    s: int,
    a: int,
    r,
    s_next: int,
    alpha: float,
    gamma: float,
    w: WelfareSpec | Chooser,
    terminal: bool | None = None,
) -> None:
    """TD step toward r + gamma * Q(s', a*) with a* = argmax_a W(gamma * Q(s', a))."""
    choose = welfare_chooser(w) if isinstance(w, WelfareSpec) else w
    if terminal is None:
        terminal = s_next in q.terminals
    target = np.asarray(r, dtype=float)
    if not terminal:
        acts = q.actions(s_next)
        nxt = q.values[s_next, acts]
        best = choose(gamma * nxt)
        target = target + gamma * nxt[best]
    q.values[s, a] += alpha * (target - q.values[s, a])


def _actions_table(env) -> tuple[list[np.ndarray], bool]:
    S = env.n_states
    full = np.arange(env.n_actions)
    if hasattr(env, "actions_at"):
        acts = [env.actions(s) for s in range(S)]
        same = all(len(x) == env.n_actions for x in acts)
        return acts, same
    # stepping environments expose the same action set everywhere
    return [full] * S, True


def run_training(
    env,
    cfg: LearnerConfig,
    choose: Chooser,
    nonstationary: bool,
    rng: np.random.Generator | None = None,
    q: QTable | None = None,
    hook=None,
    on_episode=None,
) -> tuple[QTable, RunRecord]:
    """Shared training loop behind every tabular learner in the package.

    ``choose`` maps a (k, n) array of candidate vectors to the index of the
    best one; it drives both epsilon-greedy selection and the TD target.
    When ``nonstationary`` is set, selection scores r_acc + gamma**c * Q(s, .).
    Episodic environments restart at the start state each episode; continuing
    ones keep their state and only reset the accumulators.
    ``hook(episode, s, a, r, s_next, ep_state)`` is called after each step and
    ``on_episode(episode, q)`` after each episode.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if q is None:
        q = QTable.zeros(env)
        q.values[q.mask] = cfg.q_init
        q.values[list(q.terminals)] = 0.0
    values = q.values
    gamma, alpha = cfg.gamma, cfg.alpha
    visits = np.zeros(values.shape[:2], dtype=np.int64) if cfg.alpha_schedule == "visits" else None
    acts_of, full = _actions_table(env)
    terminal = np.zeros(env.n_states, dtype=bool)
    terminal[list(getattr(env, "terminals", ()))] = True
    episodic = bool(getattr(env, "episodic", False))
    record = RunRecord(seed=cfg.seed)
    started = time.perf_counter()
    s = env.start_state(rng)
    for episode in range(cfg.episodes):
        eps = cfg.epsilon_at(episode)
        if episodic or terminal[s]:
            s = env.start_state(rng)
        ep = EpisodeState.fresh(values.shape[2])
        total = np.zeros(values.shape[2])
        for _ in range(cfg.episode_length):
            if terminal[s]:
                break
            acts = acts_of[s]
            if rng.random() < eps:
                a = int(acts[rng.integers(len(acts))])
            else:
                rows = values[s] if full else values[s, acts]
                if nonstationary:
                    rows = ep.r_acc + ep.discount * rows
                a = int(acts[choose(rows)])
            s_next, r = env.step(s, a, rng)
            if visits is not None:
                visits[s, a] += 1
                alpha = 1.0 / visits[s, a]
            if terminal[s_next]:
                target = r
            else:
                nxt = values[s_next] if full else values[s_next, acts_of[s_next]]
                target = r + gamma * nxt[choose(gamma * nxt)]
            values[s, a] += alpha * (target - values[s, a])
            ep.advance(r, gamma)
            total += r
            if hook is not None:
                hook(episode, s, a, r, s_next, ep)
            s = s_next
        record.log(ep.r_acc if cfg.discounted_metrics else total)
        if on_episode is not None:
            on_episode(episode, q)
    record.wall_time = time.perf_counter() - started
    return q, record


def train(env, cfg: LearnerConfig, rng=None, hook=None, on_episode=None) -> tuple[QTable, RunRecord]:
    """Welfare Q-learning. ``cfg.selection == "stationary"`` drops r_acc from
    action selection (the stationary baseline trained on its own data)."""
    nonstationary = cfg.selection == "nonstationary" and not cfg.welfare.is_linear
    return run_training(
        env, cfg, welfare_chooser(cfg.welfare), nonstationary, rng=rng, hook=hook, on_episode=on_episode
    )


def summarize(results: list[np.ndarray]) -> EvalSummary:
    totals = np.array(results, dtype=float)
    return EvalSummary(
        nsw=np.array([exact_nsw(v) for v in totals]),
        util=totals.mean(axis=1),
        totals=totals,
    )


def greedy_nonstationary_policy(q: QTable, w: WelfareSpec, gamma: float, eps: float = 0.0, rng=None):
    choose = welfare_chooser(w)
    linear = w.is_linear

    def policy(s, ep, t):
        acts = q.actions(s)
        if eps > 0 and rng.random() < eps:
            return int(acts[rng.integers(len(acts))])
        rows = q.values[s, acts]
        if not linear:
            rows = ep.r_acc + ep.discount * rows
        return int(acts[choose(rows)])

    return policy


def evaluate_nonstationary(
    q: QTable,
    env,
    steps: int,
    runs: int,
    w: WelfareSpec,
    rng,
    gamma: float = 0.99,
) -> EvalSummary:
    """Greedy (epsilon = 0) rollouts with non-stationary selection.

    ``gamma`` is the discount used for r_acc inside selection; the reported
    metrics use the undiscounted reward sum of each run.
    """
    policy = greedy_nonstationary_policy(q, w, gamma)
    results = []
    for _ in range(runs):
        results.append(rollout(env, policy, steps, rng, gamma))
    return summarize(results)


def rollout(env, policy, steps: int, rng, gamma: float) -> np.ndarray:
    """Run one evaluation episode from the start state.

    ``policy(s, ep_state, t)`` returns an action. Stops after ``steps`` steps
    or at a terminal state; returns the undiscounted reward sum. ``gamma`` only
    feeds the episode accumulator that non-stationary policies read.
    """
    s = env.start_state(rng)
    ep = EpisodeState.fresh(env.dim)
    total = np.zeros(env.dim)
    for t in range(steps):
        if env.is_terminal(s):
            break
        a = policy(s, ep, t)
        s, r = env.step(s, a, rng)
        ep.advance(r, gamma)
        total += r
    return total


def with_seed(cfg: LearnerConfig, seed: int) -> LearnerConfig:
    return replace(cfg, seed=seed)
