"""TOML configuration: sections [odometry], [selection], [splat], [harness].

`default.toml` ships with the package and mirrors every built-in default; a
user file only needs the keys it overrides. Unknown keys are rejected so typos
fail loudly.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidArgumentError, LoadError
from .harness.compare import CompareConfig
from .odometry import OdometryConfig
from .selection import SelectionConfig
from .splat.optim import TrainConfig


@dataclass(frozen=True)
class HarnessConfig:
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    checkpoints: tuple[int, ...] = (10, 15, 20, 30, 40, 60, 80, 120, 160, 240, 320, 480, 640)
    eval_every: int = 5
    workers: int = 1
    record_timing: bool = True
    frame_count: int = 30
    resolution: tuple[int, int] = (128, 128)
    textureless_fraction: float = 0.3
    texture_octaves: int = 4
    orbit_degrees: float = 70.0

    def compare_config(self) -> CompareConfig:
        return CompareConfig(
            checkpoints=self.checkpoints,
            eval_every=self.eval_every,
            workers=self.workers,
            record_timing=self.record_timing,
        )


@dataclass(frozen=True)
class AppConfig:
    odometry: OdometryConfig = field(default_factory=OdometryConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    splat: TrainConfig = field(default_factory=TrainConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)


_SECTIONS = {
    "odometry": OdometryConfig,
    "selection": SelectionConfig,
    "splat": TrainConfig,
    "harness": HarnessConfig,
}


def _coerce(value, target_type):
    if isinstance(value, list):
        return tuple(_coerce(v, None) for v in value)
    return value


def _build_section(cls, table: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key == "selection" and cls is OdometryConfig:
            continue  # nested selection handled at the top level
        if key not in known:
            raise InvalidArgumentError(f"unknown key [{section}] {key!r}")
        kwargs[key] = _coerce(value, known[key].type)
    return kwargs


def load_config(path=None) -> AppConfig:
    """Defaults overlaid with a TOML file when given."""
    if path is None:
        return AppConfig()
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise LoadError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InvalidArgumentError(f"malformed TOML in {path}: {exc}") from exc
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise InvalidArgumentError(f"unknown config sections: {sorted(unknown)}")
    sections = {}
    for name, cls in _SECTIONS.items():
        kwargs = _build_section(cls, data.get(name, {}), name)
        if name == "odometry":
            sel_kwargs = _build_section(SelectionConfig, data.get("selection", {}), "selection")
            kwargs["selection"] = SelectionConfig(**sel_kwargs)
        sections[name] = cls(**kwargs)
    return AppConfig(**sections)


def default_toml_path() -> Path:
    return Path(__file__).parent / "default.toml"


def config_as_toml(config: AppConfig) -> str:
    """Serialize a configuration in the same shape as default.toml."""
    out = []
    for name in _SECTIONS:
        section = getattr(config, name)
        out.append(f"[{name}]")
        for f in fields(section):
            if f.name == "selection":
                continue
            value = getattr(section, f.name)
            out.append(f"{f.name} = {_toml_value(value)}")
        out.append("")
    return "\n".join(out)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float, str)):
        return repr(value) if isinstance(value, str) else str(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    if dataclasses.is_dataclass(value):
        raise InvalidArgumentError(f"nested dataclass {value} not serializable here")
    raise InvalidArgumentError(f"cannot serialize {value!r} to TOML")
