import json

import pytest

from explorler.config import ConfigError, config_from_dict, dump_config, parse_config


def test_empty_file_pendulum_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    cfg = parse_config(path, env="pendulum")
    p = cfg.ppo
    assert (p.learning_rate, p.clip_epsilon, p.steps_per_rollout, p.batch_size) == (1e-3, 0.2, 1024, 64)
    assert (p.gamma, p.gae_lambda, p.entropy_coef, p.n_epochs) == (0.9, 0.95, 0.0, 10)
    assert cfg.esa.num_neighbors == 6
    assert (cfg.esa.num_steps, cfg.esa.step_size, cfg.esa.release_interval) == (60, 0.001, 20)
    assert cfg.pipeline.esa_trigger_interval == 10 and cfg.pipeline.eval_episodes == 3
    assert cfg.num_agents() == 5


@pytest.mark.parametrize("data, key", [
    ({"ppo": {"learning_rate": -1e-3}}, "ppo.learning_rate"),
    ({"ppo": {"learning_rte": 1e-3}}, "ppo.learning_rte"),
    ({"esa": {"num_steps": "many"}}, "esa.num_steps"),
    ({"esa": {"release_interval": 7}}, "esa.release_interval"),
    ({"pipeline": {"include_incumbent": 1}}, "pipeline.include_incumbent"),
    ({"colour": "red"}, "colour"),
    ({"env": "cartpole"}, "env"),
])
def test_errors_name_the_key(data, key):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert info.value.key == key
    assert key in str(info.value)


def test_yaml_scientific_string(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("ppo:\n  learning_rate: 3e-4\nesa:\n  num_neighbors: 4\n")
    cfg = parse_config(path)
    assert cfg.ppo.learning_rate == 3e-4 and cfg.esa.num_neighbors == 4


def test_env_defaults_layer_under_user_values():
    cfg = config_from_dict({"env": "pointmass", "ppo": {"gamma": 0.5}})
    assert cfg.ppo.gamma == 0.5 and cfg.ppo.steps_per_rollout == 500


def test_manifest_roundtrip(tmp_path):
    cfg = config_from_dict({"env": "pointmass", "esa": {"momentum_beta": 0.7}, "seeds": [3, 4]})
    (tmp_path / "manifest.json").write_text(json.dumps({"config": cfg.to_dict(), "seed": 3}))
    assert parse_config(tmp_path / "manifest.json") == cfg
    dump_config(cfg, tmp_path / "echo.yaml")
    assert parse_config(tmp_path / "echo.yaml") == cfg
