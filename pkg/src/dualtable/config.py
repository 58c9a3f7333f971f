"""Engine configuration: key=value file plus command-line overrides.

The config file (conventionally ``dualtable.toml``) is flat key=value
text, one pair per line, '#' comments allowed:

    data_dir = ./data
    W_M = 1e9
    R_M = 2e9
    W_A = 0.8e9
    R_A = 0.5e9
    k_default = 10
    compact_threshold = 0.25
    default_ratio = 0.05
    ewma_weight = 0.5

Rates are bytes/second. Defaults are the reference rates the cost-model
examples use, so a bare CLI works without a file. Every key can also be
set with ``--set key=value``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .cost_model import CostParams
from .errors import DualTableError


class ConfigError(DualTableError):
    """Unusable configuration file or override."""


@dataclass(frozen=True)
class Config:
    data_dir: str = "dualtable_data"
    W_M: float = 1e9
    R_M: float = 2e9
    W_A: float = 0.8e9
    R_A: float = 0.5e9
    k_default: float = 10
    compact_threshold: float = 0.25
    default_ratio: float = 0.05
    ewma_weight: float = 0.5

    def cost_params(self) -> CostParams:
        return CostParams(master_write_rate=self.W_M, master_read_rate=self.R_M,
                          attached_write_rate=self.W_A, attached_read_rate=self.R_A,
                          successive_reads_k=self.k_default)


_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        raw = raw[1:-1]
    if key == "data_dir":
        if not raw:
            raise ConfigError("data_dir must not be empty")
        return raw
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} wants a number, got {raw!r}") from None


def parse_config_text(text: str, base: Config | None = None) -> Config:
    cfg = base or Config()
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, raw = stripped.partition("=")
        if not sep:
            raise ConfigError(f"line {line_no}: expected key = value, got {line!r}")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        cfg = replace(cfg, **{key: _parse_value(key, raw)})
    return cfg


def load_config(path: str | None, overrides: list[str] | None = None,
                base: Config | None = None) -> Config:
    """Read the file (when given/present) and apply --set pairs on top."""
    cfg = base or Config()
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read(), cfg)
    for pair in overrides or ():
        key, sep, raw = pair.partition("=")
        key = key.strip()
        if not sep or key not in _FIELD_TYPES:
            raise ConfigError(f"bad --set {pair!r}; known keys: "
                              + ", ".join(sorted(_FIELD_TYPES)))
        cfg = replace(cfg, **{key: _parse_value(key, raw)})
    return cfg
