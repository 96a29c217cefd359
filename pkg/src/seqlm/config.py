"""Run configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .errors import ConfigError

OUTPUT_MODES = ("softmax", "crf")
DEV_METRICS = ("f05", "entity_f1", "accuracy")


@dataclass(frozen=True)
class RunConfig:
    gamma: float = 0.1
    hidden: int = 200
    embedding_dim: int = 300
    char_embedding_dim: int = 50
    char_hidden: int = 200
    combined_dim: int = 50
    lm_projection: int = 50
    lm_k: int = 7500
    batch_size: int = 64
    dropout_p: float = 0.5
    use_dropout: bool = True
    use_char: bool = True
    patience: int = 7
    max_epochs: int = 200
    seeds: tuple[int, ...] = tuple(range(1, 11))
    output_mode: str = "crf"
    dev_metric: str = "entity_f1"
    positive_label: str = "i"
    rho: float = 0.95
    epsilon: float = 1e-6
    learning_rate: float = 1.0
    embeddings_path: str = ""
    token_column: int = 0
    label_column: int = -1
    iob1: bool = False

    def __post_init__(self):
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        for name in ("hidden", "embedding_dim", "char_embedding_dim", "char_hidden", "combined_dim",
                     "lm_projection", "lm_k", "batch_size", "max_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.output_mode not in OUTPUT_MODES:
            raise ConfigError(f"output_mode must be one of {OUTPUT_MODES}, got {self.output_mode!r}")
        if self.dev_metric not in DEV_METRICS:
            raise ConfigError(f"dev_metric must be one of {DEV_METRICS}, got {self.dev_metric!r}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if not 0 < self.rho < 1 or self.epsilon <= 0 or self.learning_rate < 0:
            raise ConfigError("invalid AdaDelta settings")

    @property
    def effective_dropout(self) -> float:
        return self.dropout_p if self.use_dropout else 0.0

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        d = dict(d)
        if "seeds" in d:
            d["seeds"] = tuple(int(s) for s in d["seeds"])
        return cls(**d)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(name: str, default, text: str):
    if name == "seeds":
        return tuple(int(s) for s in text.replace(",", " ").split())
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    defaults = RunConfig()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not hasattr(defaults, key):
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, getattr(defaults, key), value)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(config: RunConfig) -> str:
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
