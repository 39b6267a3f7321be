import csv
import io
import json
from dataclasses import replace

import numpy as np
import pytest

from welfareq.cli import main
from welfareq.harness import (
    ConfigError,
    ExperimentConfig,
    count_ranking,
    dimension_trend,
    episodes_to_fraction,
    final_window,
    load_config,
    make_env,
    rankings_agree,
    run_experiment,
    sweep_spec,
)
from welfareq.learner import LearnerConfig, QTable
from welfareq.welfare import nsw, p_welfare

TINY = LearnerConfig(episodes=3, episode_length=50)


def _cfg(**kw):
    base = dict(env="taxi", env_params={"n": 3}, learner=TINY, runs=2)
    base.update(kw)
    return ExperimentConfig(**base)


def test_csv_rows_and_header():
    text = run_experiment(_cfg()).to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["run", "episode", "nsw", "util"]
    assert len(rows) - 1 == 2 * 3
    assert [(r[0], r[1]) for r in rows[1:]] == [(str(i), str(e)) for i in range(2) for e in range(3)]


def test_rg_csv_has_type_counts():
    text = run_experiment(_cfg(env="rg", env_params={}, runs=1)).to_csv()
    header = text.splitlines()[0].split(",")
    assert header == ["run", "episode", "nsw", "util", "gold", "gem", "sword"]


@pytest.mark.parametrize("algo", ["welfare-q", "stationary", "scalarized", "mixture"])
def test_reruns_are_byte_identical(algo):
    cfg = _cfg(algo=algo, eval_every=1)
    assert run_experiment(cfg).to_csv() == run_experiment(cfg).to_csv()


def test_threads_do_not_change_output():
    cfg = _cfg(runs=3)
    assert run_experiment(cfg).to_csv() == run_experiment(replace(cfg, workers=3)).to_csv()


def test_runs_are_independent_of_run_count():
    two = run_experiment(_cfg(runs=2)).to_csv().splitlines()
    three = run_experiment(_cfg(runs=3)).to_csv().splitlines()
    assert three[: len(two)] == two


def test_config_hash_stable_and_sensitive():
    a, b = _cfg(), _cfg()
    assert a.config_hash() == b.config_hash() and len(a.config_hash()) == 16
    assert _cfg(base_seed=1).config_hash() != a.config_hash()


def test_config_dict_round_trip():
    cfg = _cfg(weights=(0.2, 0.3, 0.5), learner=replace(TINY, welfare=p_welfare(-0.5)))
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_config_rejects_unknown_values():
    with pytest.raises(ConfigError):
        ExperimentConfig(env="nope")
    with pytest.raises(ConfigError):
        ExperimentConfig(algo="nope")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_toml_config(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        'env = "fig3"\nruns = 2\n[env_params]\nn = 2\n'
        '[learner]\nepisodes = 4\nepisode_length = 5\nwelfare = "nsw:lambda=0.01"\n'
    )
    cfg = load_config(path)
    assert cfg.env == "fig3" and cfg.runs == 2 and cfg.learner.welfare == nsw(0.01)
    assert make_env(cfg).dim == 2


def test_outputs_written(tmp_path):
    result = run_experiment(_cfg(), out=tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config_hash"] == result.config.config_hash()
    assert (tmp_path / "runs.csv").read_text() == result.to_csv()
    q = QTable.from_json((tmp_path / "q_run1.json").read_text())
    assert np.array_equal(q.values, result.runs[1].q.values)


def test_final_window():
    assert final_window([1, 2, 3, 4, 5, 6, 7, 8, 9, 10]) == 9.5
    assert final_window([4.0]) == 4.0
    with pytest.raises(ValueError):
        final_window([])


def test_episodes_to_fraction():
    eps = [10, 20, 30, 40, 50]
    assert episodes_to_fraction(eps, [0, 50, 95, 100, 100]) == 30
    assert episodes_to_fraction(eps, [0, 0, 0, 0, 0]) is None


def test_dimension_trend_counts_seeds():
    rows = [
        {"n": 2, "seed": 0, "episodes_to_90": 10},
        {"n": 3, "seed": 0, "episodes_to_90": 20},
        {"n": 2, "seed": 1, "episodes_to_90": 30},
        {"n": 3, "seed": 1, "episodes_to_90": 20},
    ]
    assert dimension_trend(rows) == (1, 2)


def test_sweep_spec():
    assert sweep_spec(0) == nsw() and sweep_spec(-0.5) == p_welfare(-0.5)


def test_rankings():
    assert count_ranking([3, 7, 5]) == [1, 2, 0]
    assert rankings_agree([1, 2, 3], [10, 20, 30])
    assert rankings_agree([1, 2, 2], [1, 3, 2])
    assert not rankings_agree([1, 2, 3], [3, 2, 1])


# -- CLI ----------------------------------------------------------------------


def test_cli_train_writes_csv(tmp_path, capsys):
    code = main(["train", "--env", "fig3", "--env-param", "n=2", "--episodes", "4", "--steps", "5",
                 "--runs", "2", "--out", str(tmp_path)])
    assert code == 0
    assert len((tmp_path / "runs.csv").read_text().splitlines()) == 1 + 8
    assert "config_hash" in capsys.readouterr().out


def test_cli_eval_round_trip(tmp_path):
    assert main(["train", "--env", "fig3", "--episodes", "50", "--steps", "10", "--runs", "1",
                 "--out", str(tmp_path)]) == 0
    assert main(["eval", "--env", "fig3", "--steps", "10", "--runs", "3", "--q", str(tmp_path / "q_run0.json"),
                 "--out", str(tmp_path)]) == 0
    assert "nsw_mean" in json.loads((tmp_path / "eval.json").read_text())


def test_cli_eval_shape_mismatch(tmp_path):
    main(["train", "--env", "fig3", "--episodes", "2", "--steps", "5", "--runs", "1", "--out", str(tmp_path)])
    assert main(["eval", "--env", "taxi", "--q", str(tmp_path / "q_run0.json")]) == 2


def test_cli_errors_exit_2(capsys):
    assert main(["train", "--welfare", "bogus"]) == 2
    assert main(["train", "--config", "/nonexistent/cfg.toml"]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_validate_env(capsys):
    assert main(["validate-env", "--env", "taxi"]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_operators_check_reports(tmp_path):
    code = main(["operators-check", "--pairs", "5", "--triples", "20", "--out", str(tmp_path)])
    report = json.loads((tmp_path / "operators_check.json").read_text())
    assert report["metric"]["passed"]
    assert code == (0 if report["passed"] else 1)


def test_cli_sweep_welfare(tmp_path):
    code = main(["sweep-welfare", "--env", "fig3", "--p=-0.5,0", "--egal", "--episodes", "5", "--steps", "5",
                 "--runs", "1", "--out", str(tmp_path)])
    assert code == 0
    rows = json.loads((tmp_path / "sweep_welfare.json").read_text())
    assert [r["welfare"] for r in rows] == ["p:p=-0.5", "nsw:lambda=0.01", "egal"]
