"""Service configuration.

File format: one `key = value` per line, `#` starts a comment. Auth tokens
use dotted keys (`auth_token.<bearer> = [reviewer:]<user-id>`). Environment
variables named HERITOUR_<KEY_UPPERCASED> override file values, which in
turn override built-in defaults; auth tokens come from the file only.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..engine import DEFAULT_LEVEL_THRESHOLDS, LevelSchedule
from ..errors import ConfigError
from ..recommend import EMA_ALPHA, PROX_HALF_DISTANCE_M, ScoreWeights

ENV_PREFIX = "HERITOUR_"


@dataclass(frozen=True)
class TokenInfo:
    user_id: str
    role: str = "visitor"  # visitor | reviewer


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8400
    data_dir: Path = Path("./data")
    content_dir: Path = Path("./content")
    rules_dir: Path = Path("./rules")
    template: str = ""  # journey template id; empty = first available
    level_thresholds: tuple[int, ...] = DEFAULT_LEVEL_THRESHOLDS
    weight_pref: float = 1.0
    weight_novelty: float = 1.0
    weight_prox: float = 1.0
    weight_diff: float = 1.0
    ema_alpha: float = EMA_ALPHA
    prox_half_distance_m: float = PROX_HALF_DISTANCE_M
    provider: str = "template"
    fsync: bool = False
    tokens: dict[str, TokenInfo] = field(default_factory=dict)

    def schedule(self) -> LevelSchedule:
        return LevelSchedule(self.level_thresholds)

    def weights(self) -> ScoreWeights:
        return ScoreWeights(
            w_pref=self.weight_pref,
            w_novelty=self.weight_novelty,
            w_prox=self.weight_prox,
            w_diff=self.weight_diff,
        )


_SCALAR_KEYS = {
    "listen_host": str,
    "listen_port": int,
    "data_dir": Path,
    "content_dir": Path,
    "rules_dir": Path,
    "template": str,
    "weight_pref": float,
    "weight_novelty": float,
    "weight_prox": float,
    "weight_diff": float,
    "ema_alpha": float,
    "prox_half_distance_m": float,
    "provider": str,
}


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(path: Path | str, env: Mapping[str, str] | None = None) -> ServiceConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    values = parse_config_text(path.read_text(encoding="utf-8"))
    env = os.environ if env is None else env

    config = ServiceConfig()
    for key, caster in _SCALAR_KEYS.items():
        raw = env.get(ENV_PREFIX + key.upper(), values.get(key))
        if raw is None:
            continue
        try:
            value = caster(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        if caster is Path and not Path(raw).is_absolute():
            value = (path.parent / raw).resolve()
        setattr(config, key, value)

    raw_thresholds = env.get(ENV_PREFIX + "LEVEL_THRESHOLDS", values.get("level_thresholds"))
    if raw_thresholds:
        try:
            config.level_thresholds = tuple(int(t.strip()) for t in raw_thresholds.split(","))
        except ValueError:
            raise ConfigError(f"level_thresholds: cannot parse {raw_thresholds!r}") from None

    raw_fsync = env.get(ENV_PREFIX + "FSYNC", values.get("fsync"))
    if raw_fsync is not None:
        config.fsync = str(raw_fsync).lower() in ("1", "true", "yes", "on")

    for key, value in values.items():
        if key.startswith("auth_token."):
            token = key[len("auth_token."):]
            if ":" in value:
                role, _, user_id = value.partition(":")
            else:
                role, user_id = "visitor", value
            if role not in ("visitor", "reviewer"):
                raise ConfigError(f"{key}: unknown role {role!r}")
            if not token or not user_id:
                raise ConfigError(f"{key}: token and user id must be non-empty")
            config.tokens[token] = TokenInfo(user_id=user_id, role=role)
        elif key not in _SCALAR_KEYS and key not in ("level_thresholds", "fsync"):
            raise ConfigError(f"unknown config key {key!r}")

    validate_config(config)
    return config


def validate_config(config: ServiceConfig) -> None:
    config.data_dir.mkdir(parents=True, exist_ok=True)
    for name, directory in (
        ("data_dir", config.data_dir),
        ("content_dir", config.content_dir),
        ("rules_dir", config.rules_dir),
    ):
        if not directory.is_dir():
            raise ConfigError(f"{name} {directory} is not a directory")
    if not os.access(config.data_dir, os.W_OK):
        raise ConfigError(f"data_dir {config.data_dir} is not writable")
    try:
        config.schedule()
        config.weights()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
