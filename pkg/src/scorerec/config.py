"""Run configuration: one flat dataclass, loaded from a sectioned TOML file."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError

PATH_KEYS = (
    "interactions", "metadata", "artifacts_dir", "corpus_dir", "split_dir", "crm_path", "car_path",
    "index_path", "assessments_path", "sare_path", "predictions_path", "report_path",
)


@dataclass
class RunConfig:
    # paths; empty artifact paths resolve under artifacts_dir
    interactions: str = ""
    metadata: str = ""
    artifacts_dir: str = "artifacts"
    corpus_dir: str = ""
    split_dir: str = ""
    crm_path: str = ""
    car_path: str = ""
    index_path: str = ""
    assessments_path: str = ""
    sare_path: str = ""
    predictions_path: str = ""
    report_path: str = ""

    # data
    threshold: int = 4
    window_months: int = 0
    min_interactions: int = 0
    train_end: int = 0
    val_end: int = 0
    train_months: int = 0
    val_months: int = 0

    # providers
    provider: str = "stub"
    embed_endpoint: str = ""
    llm_base_url: str = ""
    llm_model: str = ""
    concurrency: int = 4
    dim: int = 256

    # collaborative model
    crm_mode: str = "mean-of-items"
    d: int = 64
    crm_epochs: int = 30
    crm_lr: float = 0.05
    crm_l2: float = 1e-4

    # retriever
    k_c: int = 5
    tau_car: float = 0.1
    car_epochs: int = 50
    car_lr: float = 0.1
    batch_size: int = 16

    # reranker
    assess_split: str = "val"
    assess_samples: int = 10000
    k_e: int = 10
    tau_sare: float = 0.02
    rank_threshold: int = 5
    neg_count: int = 3
    sare_epochs: int = 50
    sare_lr: float = 0.05

    # inference
    k_s: int = 2
    max_items: int = 15

    seed: int = 0

    def validate(self) -> "RunConfig":
        for key in ("k_c", "k_e", "rank_threshold", "neg_count", "batch_size", "max_items", "d", "concurrency"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1", key)
        if self.dim < 2:
            raise ConfigError("dim must be >= 2", "dim")
        if self.k_s < 0:
            raise ConfigError("k_s must be >= 0", "k_s")
        for key in ("tau_car", "tau_sare", "crm_lr"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be > 0", key)
        for key in ("car_lr", "sare_lr", "crm_l2", "crm_epochs", "car_epochs", "sare_epochs", "window_months",
                    "min_interactions", "train_months", "val_months", "assess_samples"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0", key)
        if self.provider not in ("stub", "remote"):
            raise ConfigError("provider must be 'stub' or 'remote'", "provider")
        if self.crm_mode not in ("mean-of-items", "user-factor"):
            raise ConfigError("crm_mode must be 'mean-of-items' or 'user-factor'", "crm_mode")
        if self.assess_split not in ("train", "val", "test"):
            raise ConfigError("assess_split must be train, val or test", "assess_split")
        if (self.train_end or self.val_end) and not self.train_end < self.val_end:
            raise ConfigError("train_end must be < val_end", "val_end")
        return self

    def path(self, key: str, default_name: str) -> Path:
        value = getattr(self, key)
        return Path(value) if value else Path(self.artifacts_dir) / default_name

    def digest(self) -> str:
        """Hash of every non-path setting; stable across artifact locations."""
        d = {k: v for k, v in asdict(self).items() if k not in PATH_KEYS}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def with_overrides(self, overrides: dict) -> "RunConfig":
        return replace(self, **coerce(overrides))


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TYPES = {name: type(getattr(RunConfig(), name)) for name in _FIELDS}


def coerce(values: dict) -> dict:
    out = {}
    for key, raw in values.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key: {key}", key)
        typ = _TYPES[key]
        try:
            if typ is int:
                if isinstance(raw, bool) or isinstance(raw, float) and not raw.is_integer():
                    raise ValueError
                v = int(raw)
            elif typ is float:
                v = float(raw)
            else:
                v = str(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key}: {raw!r}", key) from None
        out[key] = v
    return out


def flatten(doc: dict) -> dict:
    flat = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            for k, v in value.items():
                if isinstance(v, dict):
                    raise ConfigError(f"nested section {key}.{k} not supported", k)
                flat[k] = v
        else:
            flat[key] = value
    return flat


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    values: dict = {}
    if path is not None:
        with open(path, "rb") as f:
            try:
                doc = tomllib.load(f)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        values.update(flatten(doc))
    if overrides:
        values.update(overrides)
    return RunConfig(**coerce(values)).validate()
