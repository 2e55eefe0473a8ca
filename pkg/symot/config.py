"""Flat ``key = value`` experiment configs.

    # moons -> circles
    experiment.name = moons2circles
    data.source.kind = moons
    data.target.kind = circles
    train.beta = 3e-2

Keys are dotted paths into :class:`~symot.schemas.ExperimentConfig`; values are
kept as strings and coerced by pydantic. ``none`` or an empty value means
"unset". ``train.seed`` follows ``experiment.seed`` unless given.
"""

import logging
from pathlib import Path
from typing import Any, Iterable, Optional

from pydantic import ValidationError

from .errors import ConfigError
from .schemas import ExperimentConfig, ExperimentSection, RunManifest, TrainConfig

logger = logging.getLogger(__name__)

SECTIONS = ("experiment", "data", "train", "eval")


def _parse_value(raw: str) -> Optional[str]:
    value = raw.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
        return value[1:-1]
    if value == "" or value.lower() == "none":
        return None
    return value


def _assign(tree: dict, key: str, value: Any, line: Optional[int] = None) -> None:
    parts = key.split(".")
    if any(not p for p in parts):
        raise ConfigError("empty key segment", key=key, line=line)
    if parts[0] not in SECTIONS:
        raise ConfigError(f"unknown section '{parts[0]}' (expected one of {', '.join(SECTIONS)})", key=key, line=line)
    if len(parts) < 2:
        raise ConfigError("a key needs a section prefix, e.g. train.beta", key=key, line=line)
    node = tree
    for depth, part in enumerate(parts[:-1]):
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"'{'.'.join(parts[: depth + 1])}' is a value, not a section", key=key, line=line)
        node = child
    if isinstance(node.get(parts[-1]), dict):
        raise ConfigError("is a section, not a value", key=key, line=line)
    node[parts[-1]] = value


def parse_config_text(text: str) -> tuple[dict, dict[str, int]]:
    """Nested dict of string values plus the line each dotted key came from."""
    tree: dict = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(" #", 1)[0].strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if key in lines:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key=key, line=lineno)
        _assign(tree, key, _parse_value(value), lineno)
        lines[key] = lineno
    return tree, lines


def resolve_key(key: str) -> str:
    """Bare keys resolve to ``train.*`` first, then ``experiment.*``; ``seed`` is the experiment seed."""
    if "." in key:
        return key
    if key == "seed":
        return "experiment.seed"
    if key in TrainConfig.model_fields:
        return f"train.{key}"
    if key in ExperimentSection.model_fields:
        return f"experiment.{key}"
    raise ConfigError("not a train or experiment setting; use a dotted key", key=key)


def apply_overrides(tree: dict, overrides: Iterable[str]) -> dict:
    """Set each ``key=value``. A new ``experiment.seed`` also reseeds training unless ``train.seed`` is overridden too."""
    touched = set()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = resolve_key(key.strip())
        logger.debug("override %s = %s", key, value.strip())
        _assign(tree, key, _parse_value(value))
        touched.add(key)
    if "experiment.seed" in touched and "train.seed" not in touched and isinstance(tree.get("train"), dict):
        tree["train"]["seed"] = None
    return tree


def _locate(error: dict, lines: dict[str, int]) -> tuple[str, Optional[int]]:
    key = ".".join(str(part) for part in error["loc"])
    # errors on list items or tuple members carry an index suffix
    for end in range(len(error["loc"]), 0, -1):
        candidate = ".".join(str(p) for p in error["loc"][:end])
        if candidate in lines:
            return candidate, lines[candidate]
    return key, None


def build_config(tree: dict, lines: Optional[dict[str, int]] = None) -> ExperimentConfig:
    lines = lines or {}
    experiment = tree.get("experiment") or {}
    train = tree.setdefault("train", {})
    if isinstance(train, dict) and train.get("seed") is None and experiment.get("seed") is not None:
        train["seed"] = experiment["seed"]
    try:
        return ExperimentConfig.model_validate(tree)
    except ValidationError as exc:
        first = exc.errors()[0]
        key, line = _locate(first, lines)
        extra = f" (and {exc.error_count() - 1} more)" if exc.error_count() > 1 else ""
        raise ConfigError(first["msg"] + extra, key=key, line=line) from exc


def load_experiment(path, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Read a config file, or the config snapshot inside a run manifest (``.json``)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        try:
            manifest = RunManifest.model_validate_json(text)
        except ValidationError as exc:
            raise ConfigError(f"{path} is not a run manifest: {exc.errors()[0]['msg']}") from exc
        tree, lines = manifest.config.model_dump(), {}
    else:
        tree, lines = parse_config_text(text)
    apply_overrides(tree, overrides)
    config = build_config(tree, lines)
    logger.debug("loaded config %s (hash %s)", path, config.fingerprint())
    return config
