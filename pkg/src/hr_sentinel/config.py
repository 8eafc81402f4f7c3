"""Flat ``section.key = value`` run configuration shared by every command."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from hr_sentinel.domain import FilterThresholds
from hr_sentinel.estimator.network import EstimatorConfig
from hr_sentinel.ingest import IngestConfig
from hr_sentinel.metrics import DEFAULT_TAUS, GT_THRESHOLDS, TOLERANCES
from hr_sentinel.stream import SKIP, STRICT
from hr_sentinel.synth import SynthConfig
from hr_sentinel.windowing import WindowConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8

    def __post_init__(self) -> None:
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass(frozen=True)
class EvalConfig:
    taus: tuple[float, ...] = DEFAULT_TAUS
    gt_thresholds: tuple[float, ...] = GT_THRESHOLDS
    tolerances: tuple[float, ...] = TOLERANCES

    def __post_init__(self) -> None:
        if not self.taus:
            raise ValueError("taus must not be empty")


@dataclass(frozen=True)
class StreamConfig:
    gap_reset_s: int = 2
    policy: str = STRICT

    def __post_init__(self) -> None:
        if self.gap_reset_s < 2:
            raise ValueError("gap_reset_s must be >= 2")
        if self.policy not in (STRICT, SKIP):
            raise ValueError(f"policy must be {STRICT!r} or {SKIP!r}")


_SECTIONS: dict[str, type] = {
    "synth": SynthConfig,
    "ingest": IngestConfig,
    "window": WindowConfig,
    "split": SplitConfig,
    "estimator": EstimatorConfig,
    "filter": FilterThresholds,
    "eval": EvalConfig,
    "stream": StreamConfig,
}
# window length lives in [window] only; the other sections follow it
_DERIVED = {("synth", "k"), ("estimator", "k")}


def _parse_value(type_name: str, raw: str) -> Any:
    raw = raw.strip()
    optional = "None" in type_name
    if optional and raw.lower() in ("none", ""):
        return None
    base = type_name.replace(" | None", "")
    if base.startswith("tuple"):
        inner = "float" if "float" in base else "int"
        items = [x.strip() for x in raw.split(",") if x.strip()]
        return tuple(float(x) if inner == "float" else int(x) for x in items)
    if base == "int":
        return int(raw)
    if base == "float":
        return float(raw)
    if base == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


@dataclass
class RunConfig:
    values: dict[str, dict[str, Any]] = field(default_factory=lambda: {s: {} for s in _SECTIONS})

    def set(self, dotted: str, raw: str | Any) -> None:
        section, _, key = dotted.partition(".")
        if section not in _SECTIONS or not key:
            raise ConfigError(f"unknown config key {dotted!r}")
        fields = {f.name: f.type for f in dataclasses.fields(_SECTIONS[section])}
        if key not in fields or (section, key) in _DERIVED:
            raise ConfigError(f"unknown config key {dotted!r}")
        try:
            value = _parse_value(str(fields[key]), raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"{dotted}: {exc}") from None
        self.values[section][key] = value

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> RunConfig:
        cfg = cls()
        if path is None:
            return cfg
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
            try:
                cfg.set(key.strip(), value.strip())
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
        return cfg

    def build(self, section: str) -> Any:
        kwargs = dict(self.values[section])
        if section in ("synth", "estimator"):
            kwargs["k"] = self.build("window").k
        try:
            return _SECTIONS[section](**kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{section}] {exc}") from None

    def validate(self) -> None:
        for section in _SECTIONS:
            self.build(section)

    @property
    def synth(self) -> SynthConfig:
        return self.build("synth")

    @property
    def ingest(self) -> IngestConfig:
        return self.build("ingest")

    @property
    def window(self) -> WindowConfig:
        return self.build("window")

    @property
    def split(self) -> SplitConfig:
        return self.build("split")

    @property
    def estimator(self) -> EstimatorConfig:
        return self.build("estimator")

    @property
    def thresholds(self) -> FilterThresholds:
        return self.build("filter")

    @property
    def eval(self) -> EvalConfig:
        return self.build("eval")

    @property
    def stream(self) -> StreamConfig:
        return self.build("stream")
