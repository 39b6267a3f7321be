import numpy as np
import pytest

from welfareq.baselines import (
    MixtureConfig,
    ProjectedEnv,
    check_weights,
    interval_grid_search,
    mixture_eval,
    mixture_schedule,
    scalarized_eval,
    scalarized_q_learning,
    scores_to_csv,
    simplex_grid,
    stationary_eval,
    train_base_policies,
    weight_grid_search,
)
from welfareq.envs import build_fig1, build_fig3
from welfareq.learner import LearnerConfig, QTable, train
from welfareq.momdp import random_momdp
from welfareq.welfare import nsw, utilitarian


def test_simplex_grid_examples():
    assert simplex_grid(2, 0.5) == [(1.0, 0.0), (0.5, 0.5), (0.0, 1.0)]
    grid = simplex_grid(3, 0.25)
    assert len(grid) == 15
    assert all(abs(sum(w) - 1.0) < 1e-12 and min(w) >= 0 for w in grid)
    with pytest.raises(ValueError):
        simplex_grid(3, 0.3)


def test_check_weights():
    assert check_weights([0.25, 0.75]).tolist() == [0.25, 0.75]
    for bad in ([0.5, 0.6], [-0.1, 1.1]):
        with pytest.raises(ValueError):
            check_weights(bad)


def test_mixture_schedule_example():
    assert mixture_schedule(7, 2, 3) == [0, 0, 1, 1, 2, 2, 0]


def test_scalarized_learns_weighted_optimum():
    m, _ = build_fig1(0.1)
    cfg = LearnerConfig(episodes=300, episode_length=2, seed=0)
    q, _ = scalarized_q_learning(m, (0.5, 0.5), cfg)
    # every start action is worth at most 0.5 in the weighted sum; action 0/1 reach it
    ev = scalarized_eval(q, m, (0.5, 0.5), 2, 5, np.random.default_rng(0))
    assert ev.util_mean == pytest.approx(0.5)
    assert ev.nsw_mean == 0.0


def test_scalarized_with_unit_weight_equals_projected_learner():
    m = random_momdp(5, 3, 2, 0.9, np.random.default_rng(2))
    cfg = LearnerConfig(welfare=utilitarian(), episodes=20, episode_length=15, seed=1)
    q_vec, _ = scalarized_q_learning(m, (1.0, 0.0), cfg, rng=np.random.default_rng(5))
    q_one, _ = train(ProjectedEnv(m, 0), cfg, rng=np.random.default_rng(5))
    assert np.array_equal(q_vec.values[:, :, 0], q_one.values[:, :, 0])


def test_scalarized_rejects_bad_weights():
    with pytest.raises(ValueError):
        scalarized_q_learning(build_fig3(2), (1.0,), LearnerConfig(episodes=1))


def test_stationary_eval_is_capped_on_fig3():
    m = build_fig3(3)
    q, _ = train(m, LearnerConfig(episodes=500, episode_length=10, seed=0))
    ev = stationary_eval(q, m, nsw(), 10, 60, np.random.default_rng(1))
    # one fixed choice at s3: only the branch it complements ends up fair
    assert set(np.round(ev.nsw, 12)) <= {0.0, 1.0}
    assert ev.nsw_mean < 0.6


def test_base_policies_one_per_dimension():
    m = build_fig3(3)
    tables = train_base_policies(m, LearnerConfig(episodes=200, episode_length=10))
    assert len(tables) == 3 and all(isinstance(t, QTable) and t.dim == 1 for t in tables)
    # base policy i avoids zeroing dimension i at the choice state
    choice = 4
    for i, t in enumerate(tables):
        acts = t.actions(choice)
        assert acts[int(np.argmax(t.values[choice, acts, 0]))] != i


def test_mixture_requires_one_policy_per_dim():
    m = build_fig3(3)
    tables = train_base_policies(m, LearnerConfig(episodes=5, episode_length=10))
    with pytest.raises(ValueError):
        mixture_eval(MixtureConfig(tables[:2], 1), m, 10, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        MixtureConfig(tables, 0)


def test_interval_search_picks_best_and_logs_rows():
    m = build_fig3(2)
    tables = train_base_policies(m, LearnerConfig(episodes=100, episode_length=10))
    best, rows = interval_grid_search(m, (1, 2, 5), tables, 10, 3)
    assert best in (1, 2, 5) and len(rows) == 3
    assert max(r["nsw"] for r in rows) == next(r["nsw"] for r in rows if r["parameter"] == best)
    text = scores_to_csv(rows)
    assert text.splitlines()[0] == "parameter,seed,nsw,utilitarian" and len(text.splitlines()) == 4


def test_weight_grid_search_rows():
    m = build_fig3(2)
    best, rows = weight_grid_search(m, 0.5, LearnerConfig(episodes=30, episode_length=10), seeds=2)
    assert best in simplex_grid(2, 0.5)
    assert len(rows) == 3 * 2
