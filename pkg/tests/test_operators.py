import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from welfareq.envs import AllocationInstance, build_allocation_momdp, build_fig3
from welfareq.learner import QTable
from welfareq.momdp import random_momdp
from welfareq.operators import (
    NonConvergenceError,
    apply_operator,
    check_fixed_point_interpretation,
    empty_table,
    evaluate_policy,
    expansion_witness,
    fixed_point_iterate,
    greedy_policy,
    iteration_bound,
    metric_axioms,
    optimality_filter,
    q_distance,
    random_table,
    verify_contraction,
)
from welfareq.welfare import egalitarian, nsw, p_welfare, utilitarian

SPECS = [nsw(), utilitarian(), p_welfare(-0.5), egalitarian()]


def _momdp(seed=0):
    return random_momdp(10, 4, 3, 0.9, np.random.default_rng(seed))


tables = arrays(np.float64, (3, 2, 2), elements=st.floats(-100, 100))


@settings(max_examples=100, deadline=None)
@given(tables, tables, tables)
def test_metric_axioms_property(a, b, c):
    d = lambda x, y: q_distance(x, y).distance  # noqa: E731
    assert d(a, b) >= 0 and d(a, a) == 0
    assert d(a, b) == d(b, a)
    assert (d(a, b) == 0) == np.array_equal(a, b)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-12


def test_distance_witness():
    a = np.zeros((2, 2, 2))
    b = a.copy()
    b[1, 0, 1] = -3.0
    rep = q_distance(a, b)
    assert rep.distance == 3.0 and rep.witness == (1, 0, 1)
    assert q_distance(a, a).witness is None
    with pytest.raises(ValueError):
        q_distance(a, np.zeros((1, 2, 2)))


def test_metric_axioms_report():
    assert metric_axioms(_momdp(), 200, np.random.default_rng(0))["passed"]


def test_filter_picks_welfare_best_row():
    v = np.array([[[1.0, 0.0], [0.4, 0.4]]])
    q = QTable(v, np.ones((1, 2), dtype=bool))
    assert optimality_filter(q, 0, nsw()).tolist() == [0.4, 0.4]
    assert optimality_filter(q, 0, utilitarian()).tolist() == [1.0, 0.0]


def test_operator_on_hand_example():
    # start -> terminal, single action, reward (1, 2): TQ = r regardless of Q
    inst = AllocationInstance(np.array([[1.0], [2.0]]))
    m = build_allocation_momdp(inst, gamma=0.5)
    q = empty_table(m)
    q.values[:] = 7.0
    out = apply_operator(m, q, nsw())
    assert out.values[0].tolist() == [[1.0, 0.0], [0.0, 2.0]]
    assert not out.values[1].any()


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_random_pairs_contract(spec):
    rep = verify_contraction(_momdp(), spec, 100, np.random.default_rng(1))
    assert rep.pairs_tested == 100
    assert rep.holds(), rep.max_ratio


def test_utilitarian_sums_contract_along_iterates():
    # the vector entries may jump when the argmax switches between rows with
    # equal sums, but the summed table is the scalar Bellman operator
    m = _momdp()
    q = empty_table(m)
    nxt = apply_operator(m, q, utilitarian())
    for _ in range(200):
        after = apply_operator(m, nxt, utilitarian())
        d = np.max(np.abs(q.values.sum(axis=2) - nxt.values.sum(axis=2)))
        d_next = np.max(np.abs(nxt.values.sum(axis=2) - after.values.sum(axis=2)))
        if d > 1e-9:
            assert d_next <= 0.9 * d + 1e-9
        q, nxt = nxt, after


def test_nonlinear_welfare_has_expanding_pair():
    # a switch of greedy action between nearby tables can move H Q a lot
    ratio, q1, q2 = expansion_witness(_momdp(), nsw(), iters=2000)
    assert ratio > 0.9
    m = _momdp()
    d_before = q_distance(q1, q2).distance
    d_after = q_distance(apply_operator(m, q1, nsw()), apply_operator(m, q2, nsw())).distance
    assert d_after / d_before == pytest.approx(ratio)


def test_utilitarian_fixed_point_and_interpretation():
    m = _momdp()
    rng = np.random.default_rng(2)
    q1, k1 = fixed_point_iterate(m, utilitarian(), init=random_table(m, rng))
    q2, _ = fixed_point_iterate(m, utilitarian(), init=random_table(m, rng))
    assert q_distance(q1, q2).distance <= 2 * 1e-10 / (1 - 0.9)
    assert k1 <= iteration_bound(0.9, 1e-10, 1.0 / (1 - 0.9)) + 10
    assert check_fixed_point_interpretation(m, q1, utilitarian()).max_residual <= 1e-6


def test_fixed_point_on_acyclic_allocation_chain():
    inst = AllocationInstance(np.random.default_rng(3).uniform(0, 1, size=(3, 4)))
    m = build_allocation_momdp(inst)
    for spec in SPECS:
        q, k = fixed_point_iterate(m, spec)
        assert k <= inst.n_items + 2
        assert check_fixed_point_interpretation(m, q, spec).max_residual <= 1e-6


def test_non_convergence_is_reported():
    with pytest.raises(NonConvergenceError):
        fixed_point_iterate(_momdp(), nsw(), max_iters=3)


def test_policy_evaluation_matches_linear_solve():
    m = _momdp(4)
    policy = np.arange(m.n_states) % m.n_actions
    V = evaluate_policy(m, policy)
    idx = np.arange(m.n_states)
    P, R = m.transitions[idx, policy].copy(), m.rewards[idx, policy].copy()
    for t in m.terminals:
        P[t], R[t] = 0.0, 0.0
    exact = np.linalg.solve(np.eye(m.n_states) - 0.9 * P, R)
    assert np.allclose(V, exact, atol=1e-9)


def test_greedy_policy_on_fig3():
    m = build_fig3(2)
    q = empty_table(m)
    q.values[m.start] = 0.0
    q.values[3, 0] = [1.0, 0.0]
    q.values[3, 1] = [0.5, 0.5]
    assert greedy_policy(q, nsw())[3] == 1
    assert greedy_policy(q, utilitarian())[3] == 0
