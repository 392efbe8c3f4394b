"""Plain-text ``key = value`` run configuration.

Every key and its default is listed in :data:`DEFAULTS` (desk scale). Two
presets ship with the package: ``desk.cfg`` (the defaults, written out) and
``paper.cfg`` (the full-scale settings). Unknown keys are rejected.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

DEFAULTS: dict[str, Any] = {
    # model
    "dim": 128,
    "heads": 4,
    "layers": 4,
    "max_len": 1024,
    # optimization
    "pretrain_lr": 0.0005,
    "finetune_lr": 0.0001,
    "beta1": 0.9,
    "beta2": 0.999,
    "weight_decay": 0.01,
    "decay_steps": 5000,
    "pretrain_steps": 5000,
    "finetune_steps": 2000,
    "pretrain_batch_size": 8,
    "finetune_batch_size": 8,
    "valid_interval": 500,
    # sampling
    "temperature": 1.0,
    "top_k": 20,
    "max_tokens": 1024,
    "enforce_condition": True,
}


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw: str) -> Any:
    default = DEFAULTS[key]
    text = raw.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, value)
    return out


def parse_overrides(pairs: Iterable[str]) -> dict[str, Any]:
    return parse_config("\n".join(pairs), "--set")


def preset_text(name: str) -> str:
    return resources.files("ctrlmusic.data").joinpath(f"{name}.cfg").read_text()


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Defaults, then the file (a path or a preset name like ``paper``), then overrides."""
    cfg = dict(DEFAULTS)
    if path is not None:
        p = Path(path)
        if p.exists():
            cfg.update(parse_config(p.read_text(), str(p)))
        elif str(path) in ("desk", "paper"):
            cfg.update(parse_config(preset_text(str(path)), f"{path}.cfg"))
        else:
            raise ConfigError(f"{path}: no such config file")
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    return cfg


def dump_config(cfg: Mapping[str, Any]) -> str:
    lines = []
    for key in DEFAULTS:
        value = cfg[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
