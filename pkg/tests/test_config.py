import pytest

from dglcheck.config import DEFAULTS, ConfigError, load_settings


def test_defaults_without_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("DGL_SOLVER", raising=False)
    monkeypatch.delenv("DGL_LLM_BASE_URL", raising=False)
    assert load_settings() == DEFAULTS


def test_file_then_environment(tmp_path, monkeypatch):
    p = tmp_path / "dgl.toml"
    p.write_text('[solver]\ncmd = "cvc5 --lang smt2"\ntimeout_ms = 5000\n[run]\nsamples = 2\n')
    monkeypatch.delenv("DGL_SOLVER", raising=False)
    s = load_settings(p)
    assert s["solver.cmd"] == "cvc5 --lang smt2" and s["solver.timeout_ms"] == 5000
    assert s["run.samples"] == 2 and s["run.max_repairs"] == DEFAULTS["run.max_repairs"]
    monkeypatch.setenv("DGL_SOLVER", "z3 -in")
    monkeypatch.setenv("DGL_LLM_BASE_URL", "http://localhost:9")
    s = load_settings(p)
    assert s["solver.cmd"] == "z3 -in" and s["llm.base_url"] == "http://localhost:9"


def test_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("solver = [")
    with pytest.raises(ConfigError):
        load_settings(bad)
