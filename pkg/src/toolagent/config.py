"""Run configuration: one structured JSON file, env overrides for secrets."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .tools.code import CodeLimits
from .tools.search import RetrievalConfig

ENDPOINT_ENV = "TOOLAGENT_ENDPOINT"
MODEL_ENV = "TOOLAGENT_MODEL"
API_KEY_ENV = "TOOLAGENT_API_KEY"


class ConfigError(Exception):
    """Unusable configuration (bad file, unknown key, invalid value)."""


@dataclass(frozen=True)
class EmbeddingConfig:
    provider: str = "none"  # none | stub | http
    endpoint: str = ""
    dim: int = 16


@dataclass(frozen=True)
class AppConfig:
    endpoint: str = ""
    model_id: str = "default"
    decoding_preset: str = "preset-a"
    max_new_tokens: int = 2048
    request_timeout: float = 120.0
    max_turns: int = 10
    max_retries: int = 3
    concurrency: int = 4
    index_dir: str = ""
    prompt_dir: str = ""
    runner_cmd: tuple[str, ...] = ()
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    code_limits: CodeLimits = field(default_factory=CodeLimits)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)

    def __post_init__(self) -> None:
        if self.max_turns < 1:
            raise ValueError(f"max_turns must be >= 1: {self.max_turns}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0: {self.max_retries}")
        if self.concurrency < 1:
            raise ValueError(f"concurrency must be >= 1: {self.concurrency}")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1: {self.max_new_tokens}")
        if self.request_timeout <= 0:
            raise ValueError(f"request_timeout must be > 0: {self.request_timeout}")

    def snapshot(self) -> dict:
        """JSON-friendly view written alongside every run's outputs."""
        doc = dataclasses.asdict(self)
        doc["runner_cmd"] = list(self.runner_cmd)
        return doc


def _build(cls, raw: dict, context: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown config key(s) in {context}: {sorted(unknown)}")
    kwargs = {}
    for name, value in raw.items():
        if name == "retrieval":
            value = _build(RetrievalConfig, _expect_obj(value, name), name)
        elif name == "code_limits":
            value = _build(CodeLimits, _expect_obj(value, name), name)
        elif name == "embedding":
            value = _build(EmbeddingConfig, _expect_obj(value, name), name)
        elif name == "runner_cmd":
            if not isinstance(value, list) or not all(
                isinstance(v, str) for v in value
            ):
                raise ConfigError("runner_cmd must be a list of strings")
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {context} config: {exc}") from exc


def _expect_obj(value, name: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"config key {name!r} must be an object")
    return value


def load_config(path: str | Path | None = None) -> AppConfig:
    """Load the config file (if any), then apply environment overrides."""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {p} must hold a JSON object")
    config = _build(AppConfig, raw, "top-level")
    endpoint = os.environ.get(ENDPOINT_ENV)
    model_id = os.environ.get(MODEL_ENV)
    if endpoint:
        config = dataclasses.replace(config, endpoint=endpoint)
    if model_id:
        config = dataclasses.replace(config, model_id=model_id)
    return config


def api_key() -> str | None:
    """Secrets come from the environment only, never the config file."""
    return os.environ.get(API_KEY_ENV)
