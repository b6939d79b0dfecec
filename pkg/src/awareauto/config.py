"""Runtime configuration for the CLI and service."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .llm import RecordingBackend, RemoteBackend, ScriptedBackend


class ConfigError(ValueError):
    pass


def _data_path(name: str) -> str:
    return str(resources.files("awareauto").joinpath(f"data/{name}"))


@dataclass(frozen=True)
class Config:
    backend: str = "scripted"
    endpoint: str = ""
    model: str = "default"
    fixtures_dir: str = _data_path("fixtures")
    catalog_path: str = _data_path("catalog.json")
    corpus_path: str = _data_path("corpus.json")
    listen: str = "127.0.0.1:8787"
    temperature: float = 0.0
    max_tokens: int = 2048
    timeout_s: float = 60.0
    ui_dir: str | None = None

    @property
    def listen_host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def listen_port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


_FIELDS = set(Config.__dataclass_fields__)


def load_config(path: str | Path | None = None, **overrides) -> Config:
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        unknown = set(doc) - _FIELDS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    cfg = Config(**doc)
    if cfg.backend not in ("scripted", "remote_http", "recording"):
        raise ConfigError(f"bad backend {cfg.backend!r}")
    if cfg.backend in ("remote_http", "recording") and not cfg.endpoint:
        raise ConfigError(f"backend {cfg.backend!r} needs an endpoint")
    return cfg


def make_backend(config: Config):
    if config.backend == "scripted":
        return ScriptedBackend(config.fixtures_dir)
    remote = RemoteBackend(
        endpoint=config.endpoint, model=config.model, timeout_s=config.timeout_s
    )
    if config.backend == "remote_http":
        return remote
    return RecordingBackend(remote, config.fixtures_dir)
