"""Pipeline configuration: defaults, then YAML file, then DNSJACK_* environment, then flags."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

import yaml

from .errors import InputError, ParameterError
from .ml.tree import PRESETS, TreeHyperparameters

ENV_PREFIX = "DNSJACK_"
_PATH_FIELDS = ("log", "benign", "malicious", "cryptojacked", "signatures", "corpus", "urls",
                "captures", "whois")


@dataclass
class PipelineConfig:
    log: str | None = None
    log_format: str = "csv"
    benign: str | None = None
    malicious: str | None = None
    cryptojacked: str | None = None
    signatures: str | None = None
    corpus: str | None = None
    urls: str | None = None
    captures: str | None = None
    whois: str | None = None
    out: str = "dnsjack-out"
    granularity_hours: int = 2
    burst_fraction: float = 0.8
    window_k_range: tuple[int, int] = (7, 24)
    resource_k_range: tuple[int, int] = (2, 15)
    probability_threshold: float = 0.99
    preset: str = "paper"
    tree: dict = field(default_factory=dict)
    seed: int = 0
    train_frac: float = 0.8
    positive_labels: tuple[str, ...] = ("cryptojacked",)
    negative_labels: tuple[str, ...] = ("benign", "unmarked")
    class_a: str = "cryptojacked"
    class_b: str = "benign"
    similarity_features: tuple[str, ...] = ()
    workers: int = 1
    fetch_concurrency: int = 8

    def hyperparameters(self) -> TreeHyperparameters:
        if self.preset == "custom":
            try:
                return TreeHyperparameters(**self.tree)
            except TypeError as exc:
                raise ParameterError(f"bad custom tree hyperparameters: {exc}") from exc
        return TreeHyperparameters.preset(self.preset)

    def validate(self, required: tuple[str, ...] = ()) -> "PipelineConfig":
        for name in ("burst_fraction", "probability_threshold", "train_frac"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ParameterError(f"{name}={value} must lie in (0, 1]")
        if self.train_frac == 1:
            raise ParameterError("train_frac must be below 1")
        for name in ("window_k_range", "resource_k_range"):
            lo, hi = getattr(self, name)
            if lo < 2 or hi < lo:
                raise ParameterError(f"{name}={[lo, hi]} must satisfy 2 <= lo <= hi")
        if self.granularity_hours < 1:
            raise ParameterError("granularity_hours must be positive")
        if self.preset not in PRESETS and self.preset != "custom":
            raise ParameterError(f"preset must be one of {sorted(PRESETS) + ['custom']}")
        if self.log_format not in ("csv", "jsonl"):
            raise ParameterError("log_format must be csv or jsonl")
        self.hyperparameters()
        for name in required:
            if getattr(self, name) is None:
                raise InputError(f"missing required input: {name}")
        for name in _PATH_FIELDS:
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise InputError(f"{name} path does not exist: {path}")
        return self

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}


def _plain(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def _coerce(name: str, value: Any):
    kind = {f.name: f.type for f in fields(PipelineConfig)}[name]
    if value is None:
        return None
    if kind.startswith("tuple[int"):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ParameterError(f"{name} must be a [lo, hi] pair")
        return (int(value[0]), int(value[1]))
    if kind.startswith("tuple[str"):
        if isinstance(value, str):
            value = [v for v in value.split(",") if v]
        return tuple(str(v) for v in value)
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    if kind == "dict":
        if not isinstance(value, Mapping):
            raise ParameterError(f"{name} must be a mapping")
        return dict(value)
    return str(value)


def load_config(path: str | None = None, overrides: Mapping[str, Any] | None = None,
                environ: Mapping[str, str] | None = None) -> PipelineConfig:
    """Merge configuration layers; unknown keys are rejected."""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError("config document must be a mapping")
        values.update(doc)
    known = {f.name for f in fields(PipelineConfig)}
    env = os.environ if environ is None else environ
    for key, raw in env.items():
        if key.startswith(ENV_PREFIX) and key not in ("DNSJACK_PURE_PYTHON", "DNSJACK_NO_EXT"):
            name = key[len(ENV_PREFIX):].lower()
            if name in known:
                values[name] = yaml.safe_load(raw)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(values) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    try:
        coerced = {k: _coerce(k, v) for k, v in values.items()}
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"bad config value: {exc}") from exc
    return dataclasses.replace(PipelineConfig(), **coerced)
