"""Service/CLI configuration with flags > environment > config file > defaults."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Optional

ENV_CONFIG = "REGISTERDEX_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class ServiceConfig:
    corpus_path: str = ""
    schema_dir: str = ""           # empty -> bundled default schemas
    index_dir: str = "index"
    register_store: str = "registers.jsonl"
    kind: str = "lexical"
    k: int = 5
    m: int = 10
    recognizer: str = "lexical"    # lexical | remote
    recognizer_endpoint: str = ""
    normalize: bool = False
    max_workers: int = 4
    max_in_flight: int = 8
    embedding_dimension: int = 64
    on_extract_error: str = "fail"
    stopwords: bool = False
    seed: int = 0
    host: str = "127.0.0.1"
    port: int = 8080

    def validate(self, require_paths: bool = False) -> None:
        if self.k < 1 or self.m < 1:
            raise ConfigError(f"K and M must be >= 1 (got K={self.k}, M={self.m})")
        if self.kind not in ("lexical", "dense"):
            raise ConfigError(f"unknown index kind {self.kind!r}")
        if self.recognizer not in ("lexical", "remote"):
            raise ConfigError(f"unknown recognizer backend {self.recognizer!r}")
        if self.on_extract_error not in ("fail", "blank"):
            raise ConfigError(f"on_extract_error must be fail|blank")
        if require_paths:
            for label, path in (("corpus", self.corpus_path),
                                ("index directory", self.index_dir)):
                if path and not os.path.exists(path):
                    raise ConfigError(f"{label} does not exist: {path}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: Optional[str] = None,
                overrides: Optional[dict] = None,
                env: Optional[dict[str, str]] = None) -> ServiceConfig:
    env = dict(os.environ if env is None else env)
    config = ServiceConfig()
    file_path = path or env.get(ENV_CONFIG)
    if file_path:
        try:
            with open(file_path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {file_path}: {exc}") from exc
        for key, value in data.items():
            if not hasattr(config, key):
                raise ConfigError(f"unknown config key {key!r} in {file_path}")
            setattr(config, key, value)
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, value)
    return config
