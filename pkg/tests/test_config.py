import json

import pytest

from ufoctl import config
from ufoctl.config import ConfigError, config_hash, load_config


def write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults_validate():
    cfg = load_config(environ={})
    assert cfg == config.DEFAULTS
    assert cfg is not config.DEFAULTS


def test_precedence(tmp_path):
    path = write(tmp_path, json.dumps({"seed": 1, "sgd": {"lr": 0.5}}))
    assert load_config(path, environ={})["seed"] == 1
    assert load_config(path, environ={"UFOCTL_SEED": "5"})["seed"] == 5
    cfg = load_config(path, {"seed": 9, "sgd.iters": 3}, environ={"UFOCTL_SEED": "5"})
    assert cfg["seed"] == 9 and cfg["sgd"]["iters"] == 3 and cfg["sgd"]["lr"] == 0.5
    assert cfg["sgd"]["n_steps"] == config.DEFAULTS["sgd"]["n_steps"]


@pytest.mark.parametrize("text,line,fragment", [
    ('{\n  "seed": 1,\n  "bogus": 2\n}', 3, "unknown key 'bogus'"),
    ('{\n  "sgd": {\n    "iters": 1,\n    "lr": -1\n  }\n}', 4, "sgd.lr"),
    ('{\n  "target": "CZ",\n  "filter": {"bandwidth_mhz": 0}\n}', 3, "bandwidth"),
    ('{\n  "seed": 1,\n  "noise": {\n    "sigma_mhz": 50\n  }\n}', 4, "sigma_mhz"),
    ('{\n  "seed": 1,,\n}', 2, "invalid JSON"),
    ('{\n  "target": "N:x:y"\n}', 2, "bad target"),
    ('{\n  "horizon": {\n    "n_max": 2\n  }\n}', 3, "n_max"),
])
def test_errors_carry_line_numbers(tmp_path, text, line, fragment):
    path = write(tmp_path, text)
    with pytest.raises(ConfigError) as exc:
        load_config(path, environ={})
    assert exc.value.line == line
    assert str(exc.value).startswith(f"{path}:{line}: ")
    assert fragment in str(exc.value)


def test_other_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"), environ={})
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[1, 2]"), environ={})
    with pytest.raises(ConfigError):
        load_config(environ={"UFOCTL_SEED": "abc"})
    with pytest.raises(ConfigError):
        load_config(overrides={"space": "both"}, environ={})


def test_config_hash_ignores_output_dir_only():
    a = load_config(environ={})
    b = load_config(overrides={"output_dir": "elsewhere"}, environ={})
    c = load_config(overrides={"seed": 1}, environ={})
    assert config_hash(a) == config_hash(b) != config_hash(c)
    assert len(config_hash(a)) == 16
