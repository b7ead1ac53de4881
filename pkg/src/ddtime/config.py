"""Flat key-value run configuration.

Files are plain text, one ``section.key = value`` per line, ``#`` comments
allowed. Every key has a default (the published hyperparameters where those
exist), so a minimal config only names the data path. ``parse_config`` and
``serialize_config`` are exact inverses.
"""

from __future__ import annotations

import typing
from dataclasses import dataclass, field, fields, replace

from .distill import DistillConfig
from .errors import ConfigError
from .models import ModelSpec


@dataclass(frozen=True)
class DataConfig:
    path: str = ""
    delimiter: str = "auto"          # "auto" | "comma" | "tab"
    header: str = "auto"             # "auto" | "yes" | "no"
    train_ratio: float = 0.70
    val_ratio: float = 0.15
    test_ratio: float = 0.15
    t_in: int = 24
    t_out: int = 24
    stride: int = 12
    epsilon: float = 1e-8
    standardize_scope: str = "train"  # "train" | "global"


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "channel_linear"
    hidden_dims: tuple[int, ...] = ()


@dataclass(frozen=True)
class TeacherConfig:
    count: int = 40
    epochs: int = 80
    batch_size: int = 32
    lr: float = 5e-4
    momentum: float = 0.9
    buffer_group: int = 5


@dataclass(frozen=True)
class EvalConfig:
    steps: int = 500
    lr: float = 3e-4
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class RunConfig:
    """Complete declarative description of a run."""

    seed: int = 0
    out_dir: str = "runs/default"
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


_SECTIONS = {
    "data": DataConfig,
    "model": ModelConfig,
    "teacher": TeacherConfig,
    "distill": DistillConfig,
    "eval": EvalConfig,
}


def _parse_value(raw: str, kind, key: str):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        origin = typing.get_origin(kind)
        if origin is tuple:
            item = typing.get_args(kind)[0]
            if not raw:
                return ()
            return tuple(_parse_value(part, item, key) for part in raw.split(","))
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    raise ConfigError(f"{key}: unsupported field type {kind}")


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    """Parse config text; unknown keys and bad values raise ``ConfigError``."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        raw[key] = value.strip()

    section_values: dict[str, dict] = {name: {} for name in _SECTIONS}
    top: dict[str, object] = {}
    hints_cache = {
        name: typing.get_type_hints(cls) for name, cls in _SECTIONS.items()
    }
    for key, value in raw.items():
        if key == "seed":
            top["seed"] = _parse_value(value, int, key)
            continue
        if key == "output.dir":
            top["out_dir"] = value
            continue
        if "." not in key:
            raise ConfigError(f"unknown key {key!r}")
        section, name = key.split(".", 1)
        cls = _SECTIONS.get(section)
        if cls is None:
            raise ConfigError(f"unknown section {section!r} in key {key!r}")
        hints = hints_cache[section]
        if name not in hints:
            raise ConfigError(f"unknown key {key!r}")
        section_values[section][name] = _parse_value(value, hints[name], key)

    try:
        return RunConfig(
            seed=top.get("seed", 0),
            out_dir=top.get("out_dir", "runs/default"),
            data=DataConfig(**section_values["data"]),
            model=ModelConfig(**section_values["model"]),
            teacher=TeacherConfig(**section_values["teacher"]),
            distill=DistillConfig(**section_values["distill"]),
            eval=EvalConfig(**section_values["eval"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def serialize_config(config: RunConfig) -> str:
    """Write every key explicitly; ``parse_config`` inverts this exactly."""
    lines = [f"seed = {config.seed}", f"output.dir = {config.out_dir}"]
    for section, cls in _SECTIONS.items():
        value = getattr(config, section if section != "eval" else "eval")
        for f in fields(cls):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(value, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def save_config(config: RunConfig, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_config(config))


def with_overrides(
    config: RunConfig, seed: int | None = None, out_dir: str | None = None
) -> RunConfig:
    """Apply CLI flag overrides on top of a parsed config."""
    if seed is not None:
        config = replace(config, seed=seed)
    if out_dir is not None:
        config = replace(config, out_dir=out_dir)
    return config


def make_model_spec(config: RunConfig, n_vars: int) -> ModelSpec:
    """Bind the configured architecture to the dataset's variable count."""
    return ModelSpec(
        kind=config.model.kind,
        t_in=config.data.t_in,
        t_out=config.data.t_out,
        n_vars=n_vars,
        hidden_dims=config.model.hidden_dims,
    )
