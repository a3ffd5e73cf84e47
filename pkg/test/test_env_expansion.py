"""
Config loading: base/override merge and environment variable expansion
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest
import yaml

from experiments.utils import (
    BASE_CONFIG,
    CONFIG_DIR,
    ConfigError,
    expand_env_vars_recursive,
    load_config,
    load_config_files,
    resolve_config_path,
    to_jsonable,
    write_json,
)


def _yaml(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else yaml.safe_dump(doc), encoding="utf-8")
    return str(path)


def test_expand_env_vars_recursive(monkeypatch):
    monkeypatch.setenv("RETURNS_DIR", "/srv/returns")
    data = {"backtest": {"data": "${RETURNS_DIR}/daily.csv", "tickers": ["$RETURNS_DIR", 3]}, "reps": 5}
    assert expand_env_vars_recursive(data) == {
        "backtest": {"data": "/srv/returns/daily.csv", "tickers": ["/srv/returns", 3]},
        "reps": 5,
    }
    # unknown variables are left as written
    monkeypatch.delenv("NOT_SET_ANYWHERE", raising=False)
    assert expand_env_vars_recursive("${NOT_SET_ANYWHERE}") == "${NOT_SET_ANYWHERE}"


def test_override_replaces_top_level_sections(tmp_path, monkeypatch):
    monkeypatch.setenv("SCATTER_SEED", "17")
    base = _yaml(tmp_path, "base.yaml", {"experiment": {"reps": 50, "seed": 0}, "logging": {"level": "INFO"}})
    override = _yaml(tmp_path, "exp.yaml", {"experiment": {"reps": 2, "seed": "${SCATTER_SEED}"}})
    merged = load_config_files(base, override)
    assert merged["experiment"] == {"reps": 2, "seed": "17"}
    assert merged["logging"] == {"level": "INFO"}
    assert load_config_files(base) == {"experiment": {"reps": 50, "seed": 0}, "logging": {"level": "INFO"}}


def test_config_errors(tmp_path):
    base = _yaml(tmp_path, "base.yaml", {"logging": {"level": "INFO"}})
    with pytest.raises(ConfigError):
        load_config_files(base, _yaml(tmp_path, "list.yaml", "- a\n- b\n"))
    with pytest.raises(ConfigError):
        load_config_files(base, _yaml(tmp_path, "broken.yaml", "scenario: [unclosed\n"))
    assert load_config_files(base, _yaml(tmp_path, "empty.yaml", "")) == {"logging": {"level": "INFO"}}


def test_resolve_config_path(tmp_path):
    assert resolve_config_path("scenario1.yaml") == CONFIG_DIR / "scenario1.yaml"
    local = _yaml(tmp_path, "mine.yaml", {"reps": 1})
    assert str(resolve_config_path(local)) == local
    with pytest.raises(FileNotFoundError):
        resolve_config_path("no_such_config.yaml")


@pytest.mark.parametrize("name", ["scenario1.yaml", "scenario2.yaml", "scenario3.yaml", "scenario4.yaml",
                                  "precision.yaml", "factors.yaml", "backtest.yaml"])
def test_shipped_configs_load(name):
    cfg = load_config(name)
    assert cfg["logging"]["dir"] == "logs"
    assert "scenario" in cfg or "backtest" in cfg
    assert BASE_CONFIG.exists()


def test_write_json_converts_numpy(tmp_path):
    import json
    import numpy as np

    path = tmp_path / "out" / "meta.json"
    write_json(str(path), {"a": np.float64(1.5), "b": np.arange(3), "c": (np.int64(2),)})
    assert json.loads(path.read_text(encoding="utf-8")) == {"a": 1.5, "b": [0, 1, 2], "c": [2]}
    assert to_jsonable({1: np.bool_(True)}) == {"1": True}
