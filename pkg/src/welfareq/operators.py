"""Executable versions of the convergence machinery for welfare Q-learning.

Covers the max-entry metric on Q-tables, the optimality filter and operator,
empirical contraction checks, fixed-point iteration, and policy evaluation of
the greedy stationary policy of a table.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .learner import QTable, welfare_chooser
from .momdp import TabularMomdp
from .welfare import WelfareSpec

NEAR_ONE = 1.0 - 1e-12


class NonConvergenceError(RuntimeError):
    pass


@dataclass
class QMetricReport:
    distance: float
    witness: tuple[int, int, int] | None  # (state, action, dimension)


@dataclass
class ContractionReport:
    pairs_tested: int
    max_ratio: float
    gamma: float
    ratios: list[float] = field(default_factory=list)

    def holds(self, slack: float = 1e-9) -> bool:
        return self.max_ratio <= self.gamma + slack

    def to_json(self) -> str:
        doc = asdict(self)
        doc.pop("ratios")
        return json.dumps(doc)


@dataclass
class ResidualReport:
    max_residual: float
    witness: tuple[int, int, int] | None
    policy: list[int]

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _values(q) -> np.ndarray:
    return q.values if isinstance(q, QTable) else np.asarray(q, dtype=float)


def q_distance(q1, q2) -> QMetricReport:
    """Largest absolute entry difference over states, actions and dimensions."""
    a, b = _values(q1), _values(q2)
    if a.shape != b.shape:
        raise ValueError(f"table shapes differ: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if diff.size == 0:
        return QMetricReport(0.0, None)
    flat = int(np.argmax(diff))
    dist = float(diff.flat[flat])
    witness = tuple(int(i) for i in np.unravel_index(flat, diff.shape)) if dist > 0 else None
    return QMetricReport(dist, witness)


def optimality_filter(q: QTable, s: int, w: WelfareSpec, choose=None) -> np.ndarray:
    """Q(s, a'') for the welfare-maximising action a'' (lowest index on ties)."""
    acts = q.actions(s)
    if acts.size == 0:
        raise ValueError(f"state {s} has no actions")
    rows = q.values[s, acts]
    return rows[(choose or welfare_chooser(w))(rows)]


def greedy_policy(q: QTable, w: WelfareSpec) -> np.ndarray:
    """Stationary greedy policy: argmax_a W(Q(s, a)) in every state."""
    choose = welfare_chooser(w)
    out = np.zeros(q.shape[0], dtype=int)
    for s in range(q.shape[0]):
        acts = q.actions(s)
        if acts.size:
            out[s] = acts[choose(q.values[s, acts])]
    return out


def filtered_values(q: QTable, w: WelfareSpec) -> np.ndarray:
    """(S, n) array of the filter applied to every state; terminal rows are 0."""
    choose = welfare_chooser(w)
    out = np.zeros((q.shape[0], q.shape[2]))
    for s in range(q.shape[0]):
        if s in q.terminals or not q.mask[s].any():
            continue
        out[s] = optimality_filter(q, s, w, choose)
    return out


def _gamma(momdp: TabularMomdp, gamma: float | None) -> float:
    g = momdp.gamma if gamma is None else gamma
    return NEAR_ONE if g >= 1.0 else g


def apply_operator(momdp: TabularMomdp, q: QTable, w: WelfareSpec, gamma: float | None = None) -> QTable:
    """(TQ)(s, a) = r(s, a) + gamma * E_{s'}[(HQ)(s')], exact over transition rows.

    A discount of 1 is replaced by 1 - 1e-12.
    """
    g = _gamma(momdp, gamma)
    H = filtered_values(q, w)
    out = momdp.rewards + g * np.einsum("ijk,kn->ijn", momdp.transitions, H)
    out = np.where(q.mask[:, :, None], out, 0.0)
    for t in momdp.terminals:
        out[t] = 0.0
    return QTable(out, q.mask, q.terminals)


def empty_table(momdp: TabularMomdp) -> QTable:
    return QTable(np.zeros((momdp.n_states, momdp.n_actions, momdp.dim)), momdp.action_mask(), momdp.terminals)


def random_table(momdp: TabularMomdp, rng, low: float = 0.0, high: float = 1.0) -> QTable:
    """Uniform random entries on available actions; terminal rows stay 0."""
    q = empty_table(momdp)
    vals = rng.uniform(low, high, size=q.shape)
    vals[~q.mask] = 0.0
    for t in momdp.terminals:
        vals[t] = 0.0
    q.values[:] = vals
    return q


def verify_contraction(
    momdp: TabularMomdp,
    w: WelfareSpec,
    num_pairs: int,
    rng,
    low: float = 0.0,
    high: float = 1.0,
) -> ContractionReport:
    """Ratio d(TQ, TQ') / d(Q, Q') over independently drawn random tables.

    Pairs closer than 1e-12 are skipped.
    """
    if num_pairs < 1:
        raise ValueError("need at least one pair")
    g = _gamma(momdp, None)
    ratios = []
    for _ in range(num_pairs):
        q1 = random_table(momdp, rng, low, high)
        q2 = random_table(momdp, rng, low, high)
        ratios.append(pair_ratio(momdp, w, q1, q2))
    kept = [r for r in ratios if r is not None]
    return ContractionReport(len(kept), max(kept, default=0.0), g, kept)


def pair_ratio(momdp: TabularMomdp, w: WelfareSpec, q1: QTable, q2: QTable) -> float | None:
    d = q_distance(q1, q2).distance
    if d <= 1e-12:
        return None
    return q_distance(apply_operator(momdp, q1, w), apply_operator(momdp, q2, w)).distance / d


def fixed_point_iterate(
    momdp: TabularMomdp,
    w: WelfareSpec,
    tol: float = 1e-10,
    max_iters: int = 100_000,
    init: QTable | None = None,
) -> tuple[QTable, int]:
    """Apply T until successive tables are within ``tol``; return (Q, iterations)."""
    q = init.copy() if init is not None else empty_table(momdp)
    for t in momdp.terminals:
        q.values[t] = 0.0
    for k in range(1, max_iters + 1):
        nxt = apply_operator(momdp, q, w)
        if q_distance(nxt, q).distance < tol:
            return nxt, k
        q = nxt
    raise NonConvergenceError(f"no fixed point within {max_iters} iterations")


def expansion_witness(
    momdp: TabularMomdp, w: WelfareSpec, iters: int = 2_000, init: QTable | None = None
) -> tuple[float, QTable, QTable]:
    """Largest d(TQ, TQ') / d(Q, Q') over consecutive value-iteration iterates.

    Independent random pairs rarely straddle a change of greedy action; successive
    iterates near a cycle do, so this is where a ratio above gamma shows up.
    Returns the ratio and the pair (Q, Q') achieving it.
    """
    q = init.copy() if init is not None else empty_table(momdp)
    best, pair = 0.0, (q, q)
    nxt = apply_operator(momdp, q, w)
    for _ in range(iters):
        after = apply_operator(momdp, nxt, w)
        d = q_distance(q, nxt).distance
        if d > 1e-12:
            ratio = q_distance(nxt, after).distance / d
            if ratio > best:
                best, pair = ratio, (q, nxt)
        q, nxt = nxt, after
    return best, pair[0], pair[1]


def iteration_bound(gamma: float, tol: float, d0: float) -> int:
    """Iterations a gamma-contraction needs from initial step size ``d0``."""
    if d0 <= tol:
        return 1
    return math.ceil(math.log(tol * (1 - gamma) / d0) / math.log(gamma)) + 2


def evaluate_policy(
    momdp: TabularMomdp,
    policy: np.ndarray,
    tol: float = 1e-12,
    max_iters: int = 1_000_000,
    gamma: float | None = None,
) -> np.ndarray:
    """Vector value V(s) of a deterministic stationary policy by iteration."""
    g = _gamma(momdp, gamma)
    S = momdp.n_states
    idx = np.arange(S)
    P = momdp.transitions[idx, policy]  # (S, S)
    R = momdp.rewards[idx, policy]  # (S, n)
    term = np.zeros(S, dtype=bool)
    term[list(momdp.terminals)] = True
    R = np.where(term[:, None], 0.0, R)
    V = np.zeros((S, momdp.dim))
    for _ in range(max_iters):
        nxt = R + g * P @ V
        nxt[term] = 0.0
        if np.max(np.abs(nxt - V), initial=0.0) < tol:
            return nxt
        V = nxt
    raise NonConvergenceError("policy evaluation did not converge")


def check_fixed_point_interpretation(
    momdp: TabularMomdp, q_star: QTable, w: WelfareSpec
) -> ResidualReport:
    """Residual of Q*(s, a) = r(s, a) + gamma * E[V(s')] under the greedy policy of Q*."""
    g = _gamma(momdp, None)
    policy = greedy_policy(q_star, w)
    V = evaluate_policy(momdp, policy)
    target = momdp.rewards + g * np.einsum("ijk,kn->ijn", momdp.transitions, V)
    for t in momdp.terminals:
        target[t] = 0.0
    report = q_distance(q_star.values, np.where(q_star.mask[:, :, None], target, 0.0))
    return ResidualReport(report.distance, report.witness, policy.tolist())


def operator_suite(
    momdp: TabularMomdp,
    specs: list[WelfareSpec],
    num_pairs: int,
    rng,
    tol: float = 1e-10,
    max_iters: int = 5_000,
) -> dict:
    """Contraction, fixed-point agreement and residual checks per welfare function."""
    g = _gamma(momdp, None)
    out = {}
    for w in specs:
        entry: dict = {}
        rep = verify_contraction(momdp, w, num_pairs, rng)
        entry["contraction"] = {"pairs": rep.pairs_tested, "max_ratio": rep.max_ratio, "passed": rep.holds()}
        try:
            q1, k1 = fixed_point_iterate(momdp, w, tol, max_iters, init=random_table(momdp, rng))
            q2, k2 = fixed_point_iterate(momdp, w, tol, max_iters, init=random_table(momdp, rng))
        except NonConvergenceError as exc:
            entry["fixed_point"] = {"passed": False, "error": str(exc)}
        else:
            gap = q_distance(q1, q2).distance
            resid = check_fixed_point_interpretation(momdp, q1, w).max_residual
            entry["fixed_point"] = {
                "iterations": [k1, k2],
                "gap": gap,
                "residual": resid,
                "passed": gap <= 2 * tol / (1 - g) and resid <= 1e-6,
            }
        entry["passed"] = entry["contraction"]["passed"] and entry["fixed_point"]["passed"]
        out[str(w)] = entry
    return out


def metric_axioms(momdp: TabularMomdp, triples: int, rng) -> dict:
    """Positivity, symmetry, identity and triangle inequality on random tables."""
    worst_sym, worst_tri, ok = 0.0, 0.0, True
    for _ in range(triples):
        a, b, c = (random_table(momdp, rng, -5, 5) for _ in range(3))
        dab, dba = q_distance(a, b).distance, q_distance(b, a).distance
        dac, dbc = q_distance(a, c).distance, q_distance(b, c).distance
        worst_sym = max(worst_sym, abs(dab - dba))
        worst_tri = max(worst_tri, dac - (dab + dbc))
        ok &= dab >= 0 and q_distance(a, a).distance == 0 and (dab > 0 or np.array_equal(a.values, b.values))
    passed = ok and worst_sym == 0 and worst_tri <= 1e-12
    return {"triples": triples, "symmetry_gap": worst_sym, "triangle_excess": worst_tri, "passed": bool(passed)}
