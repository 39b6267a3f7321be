"""Small hand-built MOMDPs: the expected-welfare example, the
non-stationarity example, and the item-allocation chain."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..momdp import MomdpError, Policy, TabularMomdp
from ..welfare import exact_nsw


def build_fig1(epsilon: float = 0.1, gamma: float = 0.99) -> tuple[TabularMomdp, dict[str, Policy]]:
    """Two-state MOMDP where a fair-on-average policy is unfair on every episode.

    Actions at the start: 0 gives (1, 0), 1 gives (0, 1), 2 gives
    (0.5 - eps, 0.5 - eps); all lead to the terminal state. ``pi1`` mixes
    actions 0 and 1 evenly, ``pi2`` always takes action 2.
    """
    if not 0 < epsilon < 0.5:
        raise MomdpError("epsilon must lie in (0, 0.5)")
    P = np.zeros((2, 3, 2))
    P[0, :, 1] = 1.0
    P[1, 0, 1] = 1.0
    R = np.zeros((2, 3, 2))
    R[0, 0] = (1.0, 0.0)
    R[0, 1] = (0.0, 1.0)
    R[0, 2] = (0.5 - epsilon, 0.5 - epsilon)
    momdp = TabularMomdp([[0, 1, 2], [0]], P, R, 0, [1], gamma, state_names=["s1", "s2"])
    policies = {
        "pi1": lambda history, s: {0: 0.5, 1: 0.5},
        "pi2": lambda history, s: 2,
    }
    return momdp, policies


@dataclass(frozen=True)
class Fig3Layout:
    n: int

    @property
    def start(self) -> int:
        return 0

    def branch(self, i: int) -> int:
        return 1 + i

    @property
    def choice(self) -> int:
        return self.n + 1

    @property
    def terminal(self) -> int:
        return self.n + 2


def build_fig3(n: int, gamma: float = 0.99) -> TabularMomdp:
    """Four-layer MOMDP where stationary policies get expected NSW at most 1/n.

    The start state moves uniformly to one of n branch states (reward 0); branch
    i moves to the choice state with reward e_i; at the choice state action j
    pays the all-ones vector with a zero at j, then the episode ends.
    """
    if n < 2:
        raise MomdpError("need at least two dimensions")
    lay = Fig3Layout(n)
    S = n + 3
    P = np.zeros((S, n, S))
    R = np.zeros((S, n, n))
    P[lay.start, 0, [lay.branch(i) for i in range(n)]] = 1.0 / n
    for i in range(n):
        P[lay.branch(i), 0, lay.choice] = 1.0
        R[lay.branch(i), 0, i] = 1.0
    for j in range(n):
        P[lay.choice, j, lay.terminal] = 1.0
        R[lay.choice, j] = 1.0
        R[lay.choice, j, j] = 0.0
    P[lay.terminal, 0, lay.terminal] = 1.0
    actions = [[0]] * (n + 1) + [list(range(n))] + [[0]]
    names = ["s1"] + [f"s2_{i + 1}" for i in range(n)] + ["s3", "s4"]
    return TabularMomdp(actions, P, R, lay.start, [lay.terminal], gamma, state_names=names)


def fig3_tracking_policy(n: int) -> Policy:
    """History-dependent policy that complements the branch taken earlier."""
    lay = Fig3Layout(n)

    def policy(history, s):
        if s != lay.choice:
            return 0
        branch = next(st for st, _, _ in history if 1 <= st <= n)
        return branch - 1

    return policy


@dataclass(frozen=True)
class AllocationInstance:
    utilities: np.ndarray  # (n_agents, m_items)

    def __post_init__(self):
        u = np.array(self.utilities, dtype=float)
        if u.ndim != 2 or u.shape[0] < 1 or u.shape[1] < 1:
            raise MomdpError("utilities must be a non-empty agents x items matrix")
        if not np.all(np.isfinite(u)) or np.any(u < 0):
            raise MomdpError("utilities must be finite and non-negative")
        object.__setattr__(self, "utilities", u)

    @property
    def n_agents(self) -> int:
        return self.utilities.shape[0]

    @property
    def n_items(self) -> int:
        return self.utilities.shape[1]

    def profile(self, allocation) -> np.ndarray:
        """Utility per agent when item j goes to agent ``allocation[j]``."""
        out = np.zeros(self.n_agents)
        for j, i in enumerate(allocation):
            out[i] += self.utilities[i, j]
        return out


def build_allocation_momdp(inst: AllocationInstance, gamma: float = 1.0) -> TabularMomdp:
    """Chain MOMDP over items: action i at item j gives u[i, j] to dimension i."""
    n, m = inst.n_agents, inst.n_items
    S = m + 1
    P = np.zeros((S, n, S))
    R = np.zeros((S, n, n))
    for j in range(m):
        for i in range(n):
            P[j, i, j + 1] = 1.0
            R[j, i, i] = inst.utilities[i, j]
    P[m, 0, m] = 1.0
    actions = [list(range(n))] * m + [[0]]
    names = [f"item{j + 1}" for j in range(m)] + ["done"]
    return TabularMomdp(actions, P, R, 0, [m], gamma, state_names=names)


def best_allocation_nsw(inst: AllocationInstance) -> tuple[float, tuple[int, ...]]:
    """Exhaustive search over all n**m allocations for the exact-NSW optimum."""
    best, best_alloc = -1.0, ()
    for alloc in itertools.product(range(inst.n_agents), repeat=inst.n_items):
        value = exact_nsw(inst.profile(alloc))
        if value > best:
            best, best_alloc = value, alloc
    return best, best_alloc
