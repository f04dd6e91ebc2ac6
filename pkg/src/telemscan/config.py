"""Pipeline configuration: TOML file, override resolution, provenance hash.

The config file is a flat key/value table read once at startup; every key
can be overridden by a CLI flag. The resolved values are hashed into the
provenance field embedded in results files, so two runs can only collide
when every effective setting matches.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError, MissingFileError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METHODS = ("nonparametric", "gaussian_tail")
PREDICTORS = ("persistence", "ar", "file")
SMIN_POLICIES = ("none", "label_max", "quantile")


@dataclass
class PipelineConfig:
    h: int = 2100
    batch_size: int = 70
    warmup_min: int = 500
    expansion_buffer: int = 50
    p: float = 0.13
    z_min: float = 2.5
    z_max: float = 10.0
    z_step: float = 0.5
    smoothing_span: int = 0  # 0 = auto: max(1, round(0.05 * h))
    predictor: str = "persistence"
    ar_order: int = 3
    ar_train_len: int = 0  # 0 = fit on the full series
    method: str = "nonparametric"
    epsilon_norm: float = 0.01
    l_short: int = 10
    l_w: int = 0  # 0 = same as h
    denominator: str = "variance"
    smin_policy: str = "none"
    smin_quantile: float = 0.9
    anomaly_rate_threshold: float = 0.1
    smin_feedback: str = ""

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.h < 1:
            raise ConfigError("h must be >= 1")
        if self.warmup_min > self.h:
            raise ConfigError("warmup_min must not exceed h")
        if not 0.0 <= self.p < 1.0:
            raise ConfigError("p must lie in [0, 1)")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"predictor must be one of {PREDICTORS}")
        if self.denominator not in ("variance", "stddev"):
            raise ConfigError("denominator must be 'variance' or 'stddev'")
        if self.smin_policy not in SMIN_POLICIES:
            raise ConfigError(f"smin_policy must be one of {SMIN_POLICIES}")
        if not 0.0 < self.epsilon_norm < 1.0:
            raise ConfigError("epsilon_norm must lie in (0, 1)")

    @property
    def effective_span(self) -> int:
        return self.smoothing_span if self.smoothing_span > 0 else max(1, round(0.05 * self.h))

    @property
    def effective_l_w(self) -> int:
        return self.l_w if self.l_w > 0 else self.h


def _known_keys() -> set[str]:
    return {f.name for f in fields(PipelineConfig)}


def load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise MissingFileError(f"no such config file: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = set(data) - _known_keys()
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def resolve_config(file_values: dict | None = None,
                   overrides: dict | None = None) -> PipelineConfig:
    """Defaults, then file values, then overrides; unknown keys rejected."""
    merged: dict = {}
    for source in (file_values or {}), (overrides or {}):
        unknown = set(source) - _known_keys()
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        merged.update(source)
    coerced = {}
    for f in fields(PipelineConfig):
        if f.name not in merged:
            continue
        raw = merged[f.name]
        try:
            if f.type == "int":
                coerced[f.name] = int(raw)
            elif f.type == "float":
                coerced[f.name] = float(raw)
            else:
                coerced[f.name] = str(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {f.name}: cannot coerce {raw!r}") from None
    return PipelineConfig(**coerced)


def config_hash(config: PipelineConfig) -> str:
    """Short stable digest of every effective setting."""
    payload = asdict(config)
    payload["effective_span"] = config.effective_span
    payload["effective_l_w"] = config.effective_l_w
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
