"""Run configuration: a flat YAML mapping validated into ``RunConfig``."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .attention import ATTENTION_MODES
from .backbone.base import ARCHITECTURES, DEFAULT_TEMPLATE
from .weighting import WEIGHTING_MODES, MixtureSpec

log = logging.getLogger(__name__)

_MISSING = object()


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # tuned per dataset; no defaults
    kappa: float
    lam: float
    alpha: float
    sam_layer: int
    backbone: str = "stub"
    architecture: str = "encoder_decoder"
    stub_seed: int = 0
    embedding_model: str = "backbone"
    sigma0: float = 0.3
    pi_c: float = 0.7
    pi_neighbor: float = 0.1
    k_sem: int = 3
    k_attn: int = 15
    window_w: int = 1
    max_tokens: int = 512
    n_top: int = 15
    weighting_mode: str = "full"
    attention_mode: str = "full"
    template_text: str = DEFAULT_TEMPLATE
    block_batch_size: int = 8
    workers: int = 1
    dataset: str | None = None
    output: str | None = None

    def __post_init__(self):
        validate(self)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    def hyperparameters(self) -> dict:
        """Settings that affect scores (no file paths)."""
        return {k: v for k, v in self.to_dict().items() if k not in PATH_KEYS}

    def replace(self, **changes) -> "RunConfig":
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        return dataclasses.replace(self, **changes)

    @property
    def mixture(self) -> MixtureSpec:
        return MixtureSpec.uniform(self.pi_c, self.pi_neighbor, self.k_sem)


REQUIRED = ("kappa", "lambda", "alpha", "sam_layer")
PATH_KEYS = ("dataset", "output")
_FIELD_TYPES = {("lambda" if f.name == "lam" else f.name): f.type for f in fields(RunConfig)}


def config_keys() -> list[str]:
    return list(_FIELD_TYPES)


def validate(cfg: RunConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.architecture in ARCHITECTURES, f"architecture must be one of {ARCHITECTURES}")
    need(cfg.weighting_mode in WEIGHTING_MODES, f"weighting_mode must be one of {WEIGHTING_MODES}")
    need(cfg.attention_mode in ATTENTION_MODES, f"attention_mode must be one of {ATTENTION_MODES}")
    need(cfg.sigma0 > 0, "sigma0 must be positive")
    need(cfg.kappa >= 0, "kappa must be non-negative")
    need(cfg.lam >= 0, "lambda must be non-negative")
    need(cfg.k_sem >= 0 and cfg.k_attn >= 0, "k_sem and k_attn must be non-negative")
    need(cfg.window_w >= 1, "window_w must be >= 1")
    need(cfg.sam_layer >= 0, "sam_layer must be >= 0")
    need(cfg.max_tokens >= 1, "max_tokens must be >= 1")
    need(cfg.n_top >= 1, "n_top must be >= 1")
    need(cfg.block_batch_size >= 1 and cfg.workers >= 1, "block_batch_size and workers must be >= 1")
    need("{candidate}" in cfg.template_text, "template_text must contain '{candidate}'")
    try:
        cfg.mixture
    except ValueError as exc:
        raise ConfigError(f"pi_c/pi_neighbor/k_sem: {exc}") from None


def _coerce(key: str, value):
    typ = _FIELD_TYPES[key]
    if value is None:
        if "None" in str(typ):
            return None
        raise ConfigError(f"{key} must not be null")
    try:
        if typ in ("float", float):
            return float(value)
        if typ in ("int", int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {key}: {value!r}") from None


def from_mapping(data: dict) -> RunConfig:
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in REQUIRED if data.get(k) is None]
    if missing:
        raise ConfigError(f"missing required config key: {', '.join(missing)}")
    defaulted = sorted(set(_FIELD_TYPES) - set(data))
    if defaulted:
        log.info("config keys using built-in defaults: %s", ", ".join(defaulted))
    kwargs = {("lam" if k == "lambda" else k): _coerce(k, v) for k, v in data.items()}
    return RunConfig(**kwargs)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    data.update(overrides or {})
    return from_mapping(data)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False, allow_unicode=True), encoding="utf-8")
