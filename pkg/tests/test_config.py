import json

import pytest

from qatip.config import (
    ConfigError,
    RunConfig,
    load_run_config,
    model_config_from_run,
    run_config_from_dict,
)


def write_config(tmp_path, doc):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_defaults_match_documented_values():
    config = RunConfig()
    assert config.lr == 0.001
    assert config.batch_size == 128
    assert config.arch == "transformer"
    assert config.variant == "both"
    assert config.review_max_len == 150
    assert config.query_max_len == 5
    assert config.tip_max_len == 15
    assert config.grad_clip == 5.0


def test_load_round_trip(tmp_path):
    path = write_config(tmp_path, {"arch": "rnn", "epochs": 3, "lr": 0.01})
    config = load_run_config(path, check_paths=False)
    assert config.arch == "rnn"
    assert config.epochs == 3
    assert config.lr == 0.01
    assert config.batch_size == 128


def test_unknown_keys_rejected(tmp_path):
    path = write_config(tmp_path, {"learning_rate": 0.01})
    with pytest.raises(ConfigError, match="unknown config keys: learning_rate"):
        load_run_config(path)


def test_type_errors():
    with pytest.raises(ConfigError, match="epochs must be an integer"):
        run_config_from_dict({"epochs": 2.5})
    with pytest.raises(ConfigError, match="epochs must be an integer"):
        run_config_from_dict({"epochs": True})
    with pytest.raises(ConfigError, match="lr must be a number"):
        run_config_from_dict({"lr": "fast"})
    with pytest.raises(ConfigError, match="data must be a string"):
        run_config_from_dict({"data": 7})
    with pytest.raises(ConfigError, match="tie_output must be a boolean"):
        run_config_from_dict({"tie_output": 1})


def test_value_validation():
    with pytest.raises(ConfigError, match="arch"):
        run_config_from_dict({"arch": "cnn"})
    with pytest.raises(ConfigError, match="variant"):
        run_config_from_dict({"variant": "qa_all"})
    with pytest.raises(ConfigError, match="epochs"):
        run_config_from_dict({"epochs": -1})
    with pytest.raises(ConfigError, match="lr"):
        run_config_from_dict({"lr": 0.0})
    with pytest.raises(ConfigError, match="batch_size"):
        run_config_from_dict({"batch_size": 0})


def test_paths_must_exist(tmp_path):
    with pytest.raises(ConfigError, match="data path does not exist"):
        run_config_from_dict({"data": str(tmp_path / "missing.jsonl")})
    data = tmp_path / "present.jsonl"
    data.write_text("", encoding="utf-8")
    config = run_config_from_dict({"data": str(data)})
    assert config.data == str(data)


def test_not_an_object(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="not a JSON object"):
        load_run_config(str(path))
    path.write_text("{broken", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_run_config(str(path))


def test_int_accepted_for_float_key():
    config = run_config_from_dict({"lr": 1})
    assert config.lr == 1.0
    assert isinstance(config.lr, float)


def test_model_config_dispatch():
    run = run_config_from_dict(
        {"arch": "transformer", "model_dim": 32, "num_heads": 4, "num_layers": 2,
         "dropout": 0.0, "variant": "qa_enc"},
    )
    cfg = model_config_from_run(run, vocab_size=50)
    assert cfg.vocab_size == 50
    assert cfg.model_dim == 32
    assert cfg.variant == "qa_enc"
    assert cfg.max_len >= run.review_max_len + 2

    run = run_config_from_dict({"arch": "rnn", "emb_dim": 8, "hidden_dim": 6, "dropout": 0.0})
    cfg = model_config_from_run(run, vocab_size=50)
    assert cfg.vocab_size == 50
    assert cfg.emb_dim == 8
    assert cfg.hidden_dim == 6


def test_to_dict_round_trip():
    config = run_config_from_dict({"arch": "rnn", "seed": 9}, check_paths=False)
    again = run_config_from_dict(config.to_dict(), check_paths=False)
    assert again == config
