"""Replayable run configuration, stored as INI text (``key = value`` in
sections). Floats are written with ``repr`` so a saved config replays
bit-exactly."""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agingmodel import PUBLISHED_AF, DEFAULT_CELL_COUNT, ModelConfig, StressProfile
from .asr import SelectionConfig

DEFAULT_CREATED_AT = "1970-01-01T00:00:00+00:00"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 2024
    cell_count: int = DEFAULT_CELL_COUNT
    model: ModelConfig = field(default_factory=ModelConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    stress: StressProfile = field(default_factory=lambda: StressProfile(af_override=PUBLISHED_AF))
    stress_hours: float = 48.0
    repeats: int = 9
    corners_c: tuple[float, ...] = ()
    device_id: str = "sim-device"
    output: str = "run"
    created_at: str = DEFAULT_CREATED_AT
    workers: int = 1

    def __post_init__(self):
        if self.cell_count < 1:
            raise ConfigError("run.cell_count: must be >= 1")
        if self.repeats < 1:
            raise ConfigError("run.repeats: must be >= 1")
        if self.stress_hours < 0:
            raise ConfigError("run.stress_hours: must be >= 0")
        if self.workers < 1:
            raise ConfigError("run.workers: must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("run.seed: must be a 64-bit unsigned integer")


_RUN_KEYS = ("seed", "cell_count", "stress_hours", "repeats", "corners_c", "device_id", "output",
             "created_at", "workers")
_SELECTION_KEYS = {"n": "n_reevals", "rt_k": "rt", "ht_k": "ht"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def dumps(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    # workers is an execution knob; leaving it out keeps saved configs
    # identical across parallelism levels
    cp["run"] = {k: _fmt(getattr(cfg, k)) for k in _RUN_KEYS if k != "workers"}
    cp["model"] = {f.name: _fmt(getattr(cfg.model, f.name)) for f in fields(ModelConfig)}
    cp["selection"] = {k: _fmt(getattr(cfg.selection, a)) for k, a in _SELECTION_KEYS.items()}
    cp["stress"] = {f.name: _fmt(getattr(cfg.stress, f.name)) for f in fields(StressProfile)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _coerce(section: str, key: str, raw: str, proto):
    try:
        if isinstance(proto, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(proto, int):
            return int(raw)
        if isinstance(proto, float) or proto is None:
            return None if raw.strip() == "" else float(raw)
        if isinstance(proto, tuple):
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from None


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse INI text; keys absent from the text keep their ``base`` values."""
    base = base or RunConfig()
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    known = {"run", "model", "selection", "stress"}
    for s in cp.sections():
        if s not in known:
            raise ConfigError(f"unknown section [{s}]")
    run, model, selection, stress = {}, {}, {}, {}
    for key, raw in cp["run"].items() if cp.has_section("run") else ():
        if key not in _RUN_KEYS:
            raise ConfigError(f"run.{key}: unknown key")
        run[key] = _coerce("run", key, raw, getattr(base, key))
    for key, raw in cp["model"].items() if cp.has_section("model") else ():
        if not hasattr(base.model, key):
            raise ConfigError(f"model.{key}: unknown key")
        model[key] = _coerce("model", key, raw, getattr(base.model, key))
    for key, raw in cp["selection"].items() if cp.has_section("selection") else ():
        if key not in _SELECTION_KEYS:
            raise ConfigError(f"selection.{key}: unknown key")
        attr = _SELECTION_KEYS[key]
        selection[attr] = _coerce("selection", key, raw, getattr(base.selection, attr))
    for key, raw in cp["stress"].items() if cp.has_section("stress") else ():
        if not hasattr(base.stress, key):
            raise ConfigError(f"stress.{key}: unknown key")
        stress[key] = _coerce("stress", key, raw, getattr(base.stress, key))
    try:
        return replace(
            base,
            model=replace(base.model, **model),
            selection=replace(base.selection, **selection),
            stress=replace(base.stress, **stress),
            **run,
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None


def load(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    return loads(Path(path).read_text(encoding="utf-8"), base)


def save(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_bytes(dumps(cfg).encode("utf-8"))
