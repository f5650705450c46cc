"""Settings from ``dgl.toml``, flattened to dotted keys.

Precedence, lowest first: built-in defaults, ``dgl.toml``, environment,
command-line flags.
"""

from __future__ import annotations

import os
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

DEFAULTS = {
    "solver.cmd": "z3 -in",
    "solver.timeout_ms": 180_000,
    "llm.model": "o3",
    "llm.base_url": "https://api.openai.com/v1",
    "llm.max_tokens": 8192,
    "run.samples": 5,
    "run.max_repairs": 3,
    "run.temperature": 1.0,
    "run.workers": 1,
}


class ConfigError(RuntimeError):
    pass


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_settings(path=None) -> dict:
    settings = dict(DEFAULTS)
    p = Path(path) if path else Path("dgl.toml")
    if p.is_file():
        try:
            with open(p, "rb") as fh:
                settings.update(_flatten(tomli.load(fh)))
        except tomli.TOMLDecodeError as e:
            raise ConfigError(f"{p}: {e}") from None
    elif path:
        raise ConfigError(f"config file not found: {p}")
    if os.environ.get("DGL_SOLVER"):
        settings["solver.cmd"] = os.environ["DGL_SOLVER"]
    if os.environ.get("DGL_LLM_BASE_URL"):
        settings["llm.base_url"] = os.environ["DGL_LLM_BASE_URL"]
    return settings
