"""Flat ``key = value`` configuration files.

Keys are namespaced by module prefix (``deck.``, ``game.``, ``archive.``,
``surrogate.``, ``dsa_me.``, ``suite.``, ``run.``); one key per line, ``#``
starts a comment.  Unknown keys are a hard error that lists every valid key,
so misspelled settings cannot silently fall back to defaults.  The same
format is written as ``config.txt`` into every run directory, which makes
run artifacts self-describing and reloadable.
"""

from __future__ import annotations

from pathlib import Path

DEFAULTS: dict[str, object] = {
    # deck search space
    "deck.cardset_seed": 1,
    "deck.cardset_size": 80,
    "deck.deck_size": 30,
    "deck.max_copies": 2,
    "deck.k_probability": 0.5,
    # simulator
    "game.games_per_opponent": 20,
    "game.opponent_suite_seed": 17,
    # archive measure space (turns x hand size)
    "archive.turns_low": 1.0,
    "archive.turns_high": 40.0,
    "archive.hand_low": 0.0,
    "archive.hand_high": 10.0,
    "archive.turns_cells": 20,
    "archive.hand_cells": 20,
    # surrogate training
    "surrogate.learning_rate": 0.01,
    "surrogate.batch_size": 64,
    "surrogate.epochs": 20,
    "surrogate.beta1": 0.9,
    "surrogate.beta2": 0.999,
    "surrogate.epsilon": 1e-8,
    # outer loop
    "dsa_me.evaluation_budget": 1000,
    "dsa_me.inner_iterations": 20_000,
    "dsa_me.initial_population": 100,
    "dsa_me.inner_batch_size": 10,
    "dsa_me.surrogate": "mlp",
    "dsa_me.training_mode": "online",
    "dsa_me.reset_inner_archive": True,
    "dsa_me.use_ancillary": False,
    "dsa_me.offline_pretrain_count": 10_000,
    "dsa_me.offline_train_rounds": 5,
    "dsa_me.checkpoint_path": "",
    "dsa_me.qd_floor": -30.0,
    # experiment suite
    "suite.variants": "map_elites,lsa_me,dsa_me",
    "suite.trials": 5,
    # single runs
    "run.seed": 0,
    "run.variant": "dsa_me",
}


class ConfigError(ValueError):
    """Invalid configuration file contents."""


def _coerce(key: str, raw: str) -> object:
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse value for {key!r}: {raw!r}") from exc


def parse_config_text(text: str) -> dict[str, object]:
    """Parse overrides from config text; returns only the keys present."""
    overrides: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            valid = "\n  ".join(sorted(DEFAULTS))
            raise ConfigError(f"unknown key {key!r} (line {lineno}). Valid keys:\n  {valid}")
        overrides[key] = _coerce(key, raw)
    return overrides


def resolve_config(
    path: str | Path | None = None, overrides: dict[str, object] | None = None
) -> dict[str, object]:
    """Merge defaults, an optional config file and explicit overrides."""
    resolved = dict(DEFAULTS)
    if path is not None:
        resolved.update(parse_config_text(Path(path).read_text()))
    if overrides:
        for key in overrides:
            if key not in DEFAULTS:
                raise ConfigError(f"unknown key {key!r}")
        resolved.update(overrides)
    return resolved


def format_config(resolved: dict[str, object]) -> dict[str, str]:
    """Render config values as strings that parse back to equal values."""
    out = {}
    for key, value in resolved.items():
        if isinstance(value, bool):
            out[key] = "true" if value else "false"
        elif isinstance(value, float):
            out[key] = repr(value)
        else:
            out[key] = str(value)
    return out
