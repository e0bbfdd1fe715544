"""Configuration: TOML file, RAGKIT_ environment overrides, then CLI flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .embedding import EmbeddingProvider, HashingEmbedder, RemoteEmbeddingClient
from .errors import ConfigError
from .generation import CannedChatProvider, ChatProvider, EchoChatProvider, RemoteChatClient

ENV_PREFIX = "RAGKIT_"


@dataclass
class EmbeddingConfig:
    kind: str = "reference"
    endpoint: str = ""
    model: str = ""
    dim: int = 256
    timeout: float = 30.0
    retries: int = 2
    batch_size: int = 64
    max_in_flight: int = 4


@dataclass
class ChatConfig:
    kind: str = "stub-echo"
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    timeout: float = 60.0
    retries: int = 2
    answers_path: str = ""


@dataclass
class DefaultsConfig:
    k: int = 3
    threshold_words: int = 200
    grid_size: int = 512
    valley_ratio: float = 0.8
    jobs: int = 4


@dataclass
class PathsConfig:
    corpus: str = ""
    index: str = ""
    reports: str = ""


@dataclass
class Config:
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    chat: ChatConfig = field(default_factory=ChatConfig)
    defaults: DefaultsConfig = field(default_factory=DefaultsConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def validate(self) -> "Config":
        if self.chat.temperature < 0:
            raise ConfigError("chat.temperature must be >= 0")
        if self.embedding.dim < 1:
            raise ConfigError("embedding.dim must be >= 1")
        if self.defaults.k < 1:
            raise ConfigError("defaults.k must be >= 1")
        return self


_SECTIONS = {
    "embedding": EmbeddingConfig,
    "chat": ChatConfig,
    "defaults": DefaultsConfig,
    "paths": PathsConfig,
}


def _coerce(value: Any, target_type: type) -> Any:
    if target_type is bool and isinstance(value, str):
        return value.lower() in ("1", "true", "yes", "on")
    return target_type(value)


def _apply(section: Any, values: Mapping[str, Any], origin: str) -> None:
    known = {f.name: f.type for f in fields(section)}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"{origin}: unknown key {key!r}")
        current = getattr(section, key)
        try:
            setattr(section, key, _coerce(value, type(current)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{origin}: bad value for {key!r}: {exc}") from exc


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> Config:
    """Build a Config from an optional TOML file and RAGKIT_* environment
    variables; later sources override earlier ones."""
    config = Config()
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for name, values in data.items():
            if name not in _SECTIONS:
                raise ConfigError(f"{path}: unknown section [{name}]")
            _apply(getattr(config, name), values, str(path))

    env = os.environ if env is None else env
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        remainder = name[len(ENV_PREFIX) :].lower()
        section_name, _, key = remainder.partition("_")
        if section_name not in _SECTIONS or not key:
            continue
        _apply(getattr(config, section_name), {key: value}, name)
    return config.validate()


def apply_overrides(config: Config, overrides: list[str]) -> Config:
    """Apply ``section.key=value`` flag overrides on top of file and env."""
    for item in overrides:
        key_path, sep, value = item.partition("=")
        section_name, dot, key = key_path.partition(".")
        if not sep or not dot or section_name not in _SECTIONS:
            raise ConfigError(f"bad override {item!r}; expected section.key=value")
        _apply(getattr(config, section_name), {key: value}, f"--set {item}")
    return config


def make_embedding_provider(config: Config) -> EmbeddingProvider:
    cfg = config.embedding
    if cfg.kind == "reference":
        return HashingEmbedder(dim=cfg.dim)
    if cfg.kind == "remote":
        if not cfg.endpoint:
            raise ConfigError("embedding.endpoint is required for the remote provider")
        return RemoteEmbeddingClient(
            endpoint=cfg.endpoint,
            model=cfg.model,
            dim=cfg.dim,
            timeout=cfg.timeout,
            retries=cfg.retries,
            batch_size=cfg.batch_size,
            max_in_flight=config.defaults.jobs,
        )
    raise ConfigError(f"unknown embedding provider kind {cfg.kind!r}")


def make_chat_provider(config: Config) -> ChatProvider:
    cfg = config.chat
    if cfg.kind == "stub-echo":
        return EchoChatProvider(order_invariant=True)
    if cfg.kind == "stub-echo-first":
        return EchoChatProvider(order_invariant=False)
    if cfg.kind == "stub-canned":
        answers: dict[str, str] = {}
        if cfg.answers_path:
            try:
                answers = json.loads(Path(cfg.answers_path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read canned answers {cfg.answers_path}: {exc}") from exc
        return CannedChatProvider(answers, fallback=EchoChatProvider(order_invariant=False))
    if cfg.kind == "remote":
        if not cfg.endpoint:
            raise ConfigError("chat.endpoint is required for the remote provider")
        return RemoteChatClient(
            endpoint=cfg.endpoint,
            model=cfg.model,
            temperature=cfg.temperature,
            timeout=cfg.timeout,
            retries=cfg.retries,
        )
    raise ConfigError(f"unknown chat provider kind {cfg.kind!r}")
