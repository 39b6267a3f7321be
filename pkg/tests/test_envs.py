import numpy as np
import pytest

from welfareq.envs import (
    AllocationInstance,
    RgConfig,
    TaxiConfig,
    best_allocation_nsw,
    build_allocation_momdp,
    build_fig3,
    build_rg,
    build_taxi,
    fig3_tracking_policy,
)
from welfareq.envs.taxi import DEFAULT_PAIRS, DROP, PICK, Taxi, TaxiState
from welfareq.momdp import (
    InvalidActionError,
    MomdpError,
    as_policy,
    best_expected_welfare,
    enumerate_returns,
    expected_welfare,
    stationary_policies,
    validate,
)
from welfareq.welfare import nsw

EXACT = nsw(0.0)


# -- taxi ----------------------------------------------------------------------


def test_taxi_codec_round_trip():
    taxi = Taxi(TaxiConfig.with_pairs(3))
    assert taxi.n_states == 25 * 4
    seen = set()
    for s in range(taxi.n_states):
        state = taxi.decode(s)
        assert taxi.encode(state) == s
        seen.add(state)
    assert len(seen) == taxi.n_states


def _oracle(cell, cargo, a, pairs):
    """Independent re-statement of the taxi rules for the exhaustive check."""
    r, c = cell
    reward = [0.0] * len(pairs)
    moves = [(-1, 0), (1, 0), (0, 1), (0, -1)]
    if a < 4:
        nr, nc = r + moves[a][0], c + moves[a][1]
        if 0 <= nr < 5 and 0 <= nc < 5:
            return (nr, nc), cargo, reward
        return cell, cargo, reward
    if a == 4:
        origins = [o for o, _ in pairs]
        if cargo is None and cell in origins:
            return cell, origins.index(cell), reward
        return cell, cargo, [-10.0] * len(pairs)
    if cargo is not None and pairs[cargo][1] == cell:
        reward[cargo] = 30.0
        return cell, None, reward
    return cell, cargo, [-10.0] * len(pairs)


def test_taxi_exhaustive_table():
    cfg = TaxiConfig.with_pairs(3)
    taxi = Taxi(cfg)
    m = taxi.build()
    for s in range(m.n_states):
        st = taxi.decode(s)
        for a in range(6):
            cell, cargo, reward = _oracle(st.cell, st.cargo, a, cfg.pairs)
            (nxt, p), = m.successors(s, a)
            assert p == 1.0
            assert nxt == taxi.encode(TaxiState(cell, cargo))
            assert np.array_equal(m.rewards[s, a], reward)


def test_taxi_delivery_example():
    cfg = TaxiConfig.with_pairs(3)
    taxi = Taxi(cfg)
    origin, dest = cfg.pairs[1]
    loaded, r = taxi.transition(TaxiState(origin), PICK)
    assert loaded == TaxiState(origin, 1) and not r.any()
    done, r = taxi.transition(TaxiState(dest, 1), DROP)
    assert done == TaxiState(dest) and r.tolist() == [0.0, 30.0, 0.0]


def test_taxi_is_valid_continuing_task():
    m = build_taxi(TaxiConfig.with_pairs(3))
    assert validate(m) == [] and not m.terminals and m.gamma < 1


@pytest.mark.parametrize(
    "kwargs",
    [
        {"pairs": (((0, 0), (0, 0)),)},
        {"pairs": (((0, 0), (9, 9)),)},
        {"pairs": (((0, 0), (1, 1)), ((0, 0), (2, 2)))},
        {"pairs": ()},
    ],
)
def test_taxi_config_rejected(kwargs):
    with pytest.raises(MomdpError):
        Taxi(TaxiConfig(**kwargs))


def test_taxi_from_dict_n():
    assert TaxiConfig.from_dict({"n": 2}).pairs == DEFAULT_PAIRS[:2]
    with pytest.raises(MomdpError):
        TaxiConfig.with_pairs(7)


# -- non-stationarity example ---------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4])
def test_fig3_stationary_limit(n):
    m = build_fig3(n)
    values = [expected_welfare(enumerate_returns(m, as_policy(t), 3, gamma=1.0), EXACT) for t in stationary_policies(m)]
    assert max(values) == pytest.approx(1.0 / n, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_fig3_tracking_policy_is_perfectly_fair(n):
    m = build_fig3(n)
    dist = enumerate_returns(m, fig3_tracking_policy(n), 3, gamma=1.0)
    assert len(dist) == n
    assert expected_welfare(dist, EXACT) == pytest.approx(1.0, abs=1e-12)


# -- allocation ---------------------------------------------------------------


def test_allocation_examples():
    inst = AllocationInstance(np.array([[3.0, 1.0], [1.0, 3.0]]))
    value, alloc = best_allocation_nsw(inst)
    assert alloc == (0, 1) and value == pytest.approx(3.0)
    assert np.array_equal(inst.profile((1, 1)), [0.0, 4.0])


def test_allocation_momdp_structure():
    inst = AllocationInstance(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
    m = build_allocation_momdp(inst)
    assert m.n_states == 4 and validate(m) == []
    value, _ = best_expected_welfare(m, EXACT, 3, gamma=1.0)
    assert value == pytest.approx(best_allocation_nsw(inst)[0], abs=1e-12)


def test_allocation_rejects_negative():
    with pytest.raises(MomdpError):
        AllocationInstance(np.array([[1.0, -1.0]]))


# -- resource gathering -------------------------------------------------------


def test_rg_codec_round_trip():
    env = build_rg()
    for s in range(0, env.n_states, 7):
        cell, present = env.decode(s)
        assert env.encode(cell, present) == s


def test_rg_collect_example():
    env = build_rg(RgConfig(p_spawn=0.0, p_disappear=0.0))
    s = env.encode((1, 2), env._n_maps - 1)
    nxt, r = env.step(s, 2, np.random.default_rng(0))  # left into gold site (1, 1)
    cell, present = env.decode(nxt)
    assert cell == (1, 1) and r.tolist() == [10.0, 0.0, 0.0]
    assert present == env._n_maps - 1 - 1  # site 0 cleared


def test_rg_bumping_wall_collects_nothing():
    env = build_rg(RgConfig(p_spawn=0.0, p_disappear=0.0))
    s = env.encode((0, 4), env._n_maps - 1)  # standing on a sword site
    nxt, r = env.step(s, 0, np.random.default_rng(0))
    assert nxt == s and not r.any()


def test_rg_conservation_without_dynamics():
    env = build_rg(RgConfig(p_spawn=0.0, p_disappear=0.0))
    rng = np.random.default_rng(1)
    s = env.start_state()
    total = np.zeros(3)
    for _ in range(500):
        s, r = env.step(s, int(rng.integers(4)), rng)
        total += r
    # without respawns at most one of each site can ever be collected
    collected = 6 - len(env.present_sites(s))
    assert total.sum() == pytest.approx(10.0 * collected)
    assert total.tolist() == [10.0 * sum(1 for i in range(6) if env._site_type[i] == k and i not in env.present_sites(s)) for k in range(3)]


def test_rg_one_draw_per_step():
    env = build_rg()
    rng, ref = np.random.default_rng(2), np.random.default_rng(2)
    env.step(env.start_state(), 1, rng)
    ref.random(env.n_sites)
    assert rng.random() == ref.random()


def test_rg_scaled_sword():
    env = build_rg(RgConfig.scaled(50))
    assert env.cfg.values == (10.0, 10.0, 50.0)
    s = env.encode((0, 3), env._n_maps - 1)
    _, r = env.step(s, 3, np.random.default_rng(0))
    assert r.tolist() == [0.0, 0.0, 50.0]


def test_rg_invalid():
    with pytest.raises(MomdpError):
        build_rg(RgConfig(p_spawn=1.5))
    with pytest.raises(InvalidActionError):
        build_rg().step(0, 9, np.random.default_rng(0))
