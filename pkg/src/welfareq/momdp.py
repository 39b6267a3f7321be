"""Tabular multi-objective MDPs with vector rewards.

States and actions are dense integer ids. Rewards are deterministic per
(state, action); transitions are stochastic. Terminal states must loop onto
themselves with a zero reward.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .welfare import WelfareSpec, welfare

MAX_LEAVES = 10**6
ROW_TOL = 1e-9


class MomdpError(ValueError):
    pass


class InvalidActionError(MomdpError):
    pass


class ExplosionError(MomdpError):
    """Raised when a brute-force enumeration would exceed the leaf cap."""


class TabularMomdp:
    """Finite MOMDP with dense transition and reward tensors.

    ``transitions`` has shape (S, A, S) and ``rewards`` (S, A, n), where A is
    the size of the global action table. Entries for actions outside
    ``actions_at[s]`` are ignored. Instances are treated as immutable.
    """

    def __init__(
        self,
        actions_at: Sequence[Sequence[int]],
        transitions: np.ndarray,
        rewards: np.ndarray,
        start: int,
        terminals: Iterable[int] = (),
        gamma: float = 0.99,
        state_names: Sequence[str] | None = None,
        action_names: Sequence[str] | None = None,
    ):
        transitions = np.array(transitions, dtype=float)
        rewards = np.array(rewards, dtype=float)
        if transitions.ndim != 3 or rewards.ndim != 3:
            raise MomdpError("transitions must be (S, A, S) and rewards (S, A, n)")
        n_states, n_actions, _ = transitions.shape
        if transitions.shape[2] != n_states or rewards.shape[:2] != (n_states, n_actions):
            raise MomdpError("transition/reward shapes disagree")
        if len(actions_at) != n_states:
            raise MomdpError("need an action list for every state")
        if not 0.0 <= gamma <= 1.0:
            raise MomdpError("gamma must lie in [0, 1]")
        self.actions_at = tuple(tuple(int(a) for a in acts) for acts in actions_at)
        for acts in self.actions_at:
            if any(a < 0 or a >= n_actions for a in acts):
                raise MomdpError("action id outside the action table")
        self.transitions = transitions
        self.rewards = rewards
        self.start = int(start)
        self.terminals = frozenset(int(s) for s in terminals)
        self.gamma = float(gamma)
        self.state_names = list(state_names) if state_names is not None else None
        self.action_names = list(action_names) if action_names is not None else None
        transitions.flags.writeable = False
        rewards.flags.writeable = False
        self._terminal_mask = np.zeros(n_states, dtype=bool)
        self._terminal_mask[list(self.terminals)] = True
        self._actions_arr = [np.array(acts, dtype=np.intp) for acts in self.actions_at]
        self._allowed = [frozenset(acts) for acts in self.actions_at]
        # per (s, a): (successor ids, cumulative probabilities)
        self._rows: dict[tuple[int, int], tuple[list[int], np.ndarray]] = {}
        for s, acts in enumerate(self.actions_at):
            for a in acts:
                succ = np.nonzero(transitions[s, a] > 0)[0]
                self._rows[s, a] = (succ.tolist(), np.cumsum(transitions[s, a, succ]))

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def dim(self) -> int:
        return self.rewards.shape[2]

    @property
    def episodic(self) -> bool:
        return bool(self.terminals)

    def is_terminal(self, s: int) -> bool:
        return bool(self._terminal_mask[s])

    def actions(self, s: int) -> np.ndarray:
        return self._actions_arr[s]

    def action_mask(self) -> np.ndarray:
        mask = np.zeros((self.n_states, self.n_actions), dtype=bool)
        for s, acts in enumerate(self.actions_at):
            mask[s, list(acts)] = True
        return mask

    def start_state(self, rng=None) -> int:
        return self.start

    def reward(self, s: int, a: int) -> np.ndarray:
        return self.rewards[s, a]

    def successors(self, s: int, a: int) -> list[tuple[int, float]]:
        succ, _ = self._rows[s, a]
        return [(t, float(self.transitions[s, a, t])) for t in succ]

    def step(self, s: int, a: int, rng) -> tuple[int, np.ndarray]:
        """Sample a transition.

        Consumes exactly one ``rng.random()`` draw when the row has more than
        one successor and none otherwise.
        """
        row = self._rows.get((s, a))
        if row is None:
            raise InvalidActionError(f"action {a} not available in state {s}")
        succ, cum = row
        if len(succ) == 1:
            return succ[0], self.rewards[s, a]
        u = rng.random() * cum[-1]
        idx = min(int(np.searchsorted(cum, u, side="right")), len(succ) - 1)
        return succ[idx], self.rewards[s, a]

    # JSON fixture exchange

    def to_dict(self) -> dict:
        rows = []
        for s, acts in enumerate(self.actions_at):
            for a in acts:
                rows.append(
                    {
                        "s": s,
                        "a": a,
                        "next": [[t, p] for t, p in self.successors(s, a)],
                        "reward": self.rewards[s, a].tolist(),
                    }
                )
        out = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "dim": self.dim,
            "gamma": self.gamma,
            "start": self.start,
            "terminals": sorted(self.terminals),
            "actions": [list(acts) for acts in self.actions_at],
            "transitions": rows,
        }
        if self.state_names is not None:
            out["state_names"] = self.state_names
        if self.action_names is not None:
            out["action_names"] = self.action_names
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> "TabularMomdp":
        try:
            n_states, n_actions, dim = doc["n_states"], doc["n_actions"], doc["dim"]
            P = np.zeros((n_states, n_actions, n_states))
            R = np.zeros((n_states, n_actions, dim))
            for row in doc["transitions"]:
                s, a = row["s"], row["a"]
                for t, p in row["next"]:
                    P[s, a, t] += p
                R[s, a] = row["reward"]
            return cls(
                doc["actions"],
                P,
                R,
                doc["start"],
                doc.get("terminals", ()),
                doc["gamma"],
                state_names=doc.get("state_names"),
                action_names=doc.get("action_names"),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MomdpError(f"malformed MOMDP document: {exc}") from exc

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "TabularMomdp":
        return cls.from_dict(json.loads(text))

    def with_gamma(self, gamma: float) -> "TabularMomdp":
        return TabularMomdp(
            self.actions_at,
            self.transitions,
            self.rewards,
            self.start,
            self.terminals,
            gamma,
            self.state_names,
            self.action_names,
        )


def validate(momdp: TabularMomdp) -> list[str]:
    """List structural violations; an empty list means the MOMDP is valid."""
    problems = []
    S = momdp.n_states
    if not 0 <= momdp.start < S:
        problems.append(f"start state {momdp.start} out of range")
    for t in momdp.terminals:
        if not 0 <= t < S:
            problems.append(f"terminal state {t} out of range")
    if not 0.0 <= momdp.gamma < 1.0 and not momdp.episodic:
        problems.append(f"gamma {momdp.gamma} must be < 1 for a continuing task")
    if not np.all(np.isfinite(momdp.rewards)):
        problems.append("non-finite reward entries")
    for s, acts in enumerate(momdp.actions_at):
        if not acts:
            problems.append(f"state {s} has no actions")
            continue
        for a in acts:
            row = momdp.transitions[s, a]
            if np.any(row < 0) or np.any(row > 1):
                problems.append(f"row ({s},{a}) has probabilities outside [0,1]")
            total = row.sum()
            if abs(total - 1.0) > ROW_TOL:
                problems.append(f"row ({s},{a}) sums to {total:.12g}, not 1")
            if s in momdp.terminals:
                if row[s] != 1.0 or np.any(momdp.rewards[s, a] != 0):
                    problems.append(
                        f"terminal state {s} action {a} is not an absorbing zero-reward loop"
                    )
    return problems


@dataclass
class Trajectory:
    steps: list[tuple[int, int, np.ndarray]] = field(default_factory=list)

    def append(self, s: int, a: int, r) -> None:
        self.steps.append((s, a, np.asarray(r, dtype=float)))

    def rewards(self) -> list[np.ndarray]:
        return [r for _, _, r in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


def discounted_return(traj: Trajectory | Sequence, gamma: float) -> np.ndarray:
    """Componentwise sum of ``gamma**(t-1) * r_t`` over a finite trajectory.

    Accepts a :class:`Trajectory` or a plain sequence of reward vectors.
    ``gamma == 1`` is allowed since the sum is finite.
    """
    rewards = traj.rewards() if isinstance(traj, Trajectory) else list(traj)
    if not rewards:
        raise MomdpError("discounted return of an empty trajectory")
    if not 0.0 <= gamma <= 1.0:
        raise MomdpError("gamma must lie in [0, 1]")
    out = np.zeros_like(np.asarray(rewards[0], dtype=float))
    scale = 1.0
    for r in rewards:
        out = out + scale * np.asarray(r, dtype=float)
        scale *= gamma
    return out


# Brute-force oracles

History = tuple  # tuple of (state, action, reward tuple) steps taken so far
Policy = Callable[[History, int], "int | Mapping[int, float]"]


def _action_dist(choice) -> list[tuple[int, float]]:
    if isinstance(choice, Mapping):
        return [(int(a), float(p)) for a, p in choice.items() if p > 0]
    return [(int(choice), 1.0)]


def enumerate_returns(
    momdp: TabularMomdp,
    policy: Policy,
    horizon: int,
    gamma: float | None = None,
    max_leaves: int = MAX_LEAVES,
) -> list[tuple[float, np.ndarray]]:
    """Exhaustive distribution of the discounted return up to ``horizon`` steps.

    ``policy(history, state)`` returns an action id or a mapping from action id
    to probability. Branches stop early at terminal states. ``gamma`` overrides
    the MOMDP discount (1.0 is allowed for a finite horizon).
    """
    g = momdp.gamma if gamma is None else gamma
    out: list[tuple[float, np.ndarray]] = []

    def recurse(s, history, prob, acc, scale, depth):
        if depth == horizon or momdp.is_terminal(s):
            out.append((prob, acc))
            if len(out) > max_leaves:
                raise ExplosionError(f"more than {max_leaves} trajectory leaves")
            return
        for a, pa in _action_dist(policy(history, s)):
            if a not in momdp._allowed[s]:
                raise InvalidActionError(f"policy chose action {a} not available in state {s}")
            r = momdp.rewards[s, a]
            step = (s, a, tuple(r.tolist()))
            for t, pt in momdp.successors(s, a):
                recurse(t, history + (step,), prob * pa * pt, acc + scale * r, scale * g, depth + 1)

    recurse(momdp.start, (), 1.0, np.zeros(momdp.dim), 1.0, 0)
    return out


def expected_welfare(dist: Sequence[tuple[float, np.ndarray]], spec: WelfareSpec) -> float:
    return float(sum(p * welfare(spec, v) for p, v in dist))


def welfare_of_expectation(dist: Sequence[tuple[float, np.ndarray]], spec: WelfareSpec) -> float:
    mean = sum(p * np.asarray(v) for p, v in dist)
    return welfare(spec, mean)


def best_expected_welfare(
    momdp: TabularMomdp,
    spec: WelfareSpec,
    horizon: int,
    gamma: float | None = None,
    max_nodes: int = MAX_LEAVES,
) -> tuple[float, dict]:
    """Maximum of E[W(G)] over deterministic history-dependent policies.

    Exhaustive search over the policy tree: the value of a node depends on the
    state, the return accumulated so far and the depth, and each node picks the
    best action. Returns the optimum and the chosen action per visited history.
    """
    g = momdp.gamma if gamma is None else gamma
    choices: dict = {}
    nodes = 0

    def value(s, history, acc, scale, depth):
        nonlocal nodes
        nodes += 1
        if nodes > max_nodes:
            raise ExplosionError(f"more than {max_nodes} policy-tree nodes")
        if depth == horizon or momdp.is_terminal(s):
            return welfare(spec, acc)
        best, best_a = -np.inf, None
        for a in momdp.actions_at[s]:
            r = momdp.rewards[s, a]
            step = (s, a, tuple(r.tolist()))
            total = 0.0
            for t, pt in momdp.successors(s, a):
                total += pt * value(t, history + (step,), acc + scale * r, scale * g, depth + 1)
            if total > best:
                best, best_a = total, a
        choices[history, s] = best_a
        return best

    best = value(momdp.start, (), np.zeros(momdp.dim), 1.0, 0)
    return best, choices


def stationary_policies(momdp: TabularMomdp, limit: int = MAX_LEAVES):
    """Yield every deterministic stationary policy as a tuple of actions per state."""
    count = 1
    for acts in momdp.actions_at:
        count *= max(len(acts), 1)
    if count > limit:
        raise ExplosionError(f"{count} stationary policies exceed the cap of {limit}")
    yield from itertools.product(*[acts or (0,) for acts in momdp.actions_at])


def as_policy(table: Sequence[int]) -> Policy:
    """Wrap a per-state action table as a history-independent policy."""
    return lambda history, s: table[s]


def random_momdp(
    n_states: int,
    n_actions: int,
    dim: int,
    gamma: float,
    rng: np.random.Generator,
    terminal_fraction: float = 0.1,
) -> TabularMomdp:
    """Random MOMDP: Dirichlet(1) transition rows, rewards uniform on [0, 1]^n.

    ``floor(terminal_fraction * n_states)`` non-start states are made
    terminal. Every action is available everywhere.
    """
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = rng.random((n_states, n_actions, dim))
    n_term = int(terminal_fraction * n_states)
    terminals = (rng.choice(np.arange(1, n_states), size=n_term, replace=False) if n_term else [])
    for t in terminals:
        P[t] = 0.0
        P[t, :, t] = 1.0
        R[t] = 0.0
    actions = [list(range(n_actions))] * n_states
    return TabularMomdp(actions, P, R, 0, [int(t) for t in terminals], gamma)
