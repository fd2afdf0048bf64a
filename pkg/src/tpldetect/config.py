"""Run configuration read from an INI file.

Example::

    [paths]
    corpus = corpus/manifest.tsv
    index = build/index
    models = build/models

    [models]
    ; optional per-(language, channel) overrides of <models>/<language>-<channel>.l2vm
    java.bytecode = build/models/custom.l2vm

    [detection]
    k = 5
    majority_fraction = 0.5
    required_channels = all
    threshold.java.bytecode = 0.99110
    threshold.python.source = 0.98359

    [training]
    epochs = 10
    vector_size = 10

    [adapters]
    java.source = my-decompiler {input}

    [logging]
    level = INFO

Relative paths resolve against the directory holding the file. The
``TPLDETECT_CONFIG`` environment variable names a file to use when no
``--config`` flag is given.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

from .core import Channel, Language, TPLDetectError
from .detect import DetectionPolicy, RequiredChannels
from .embed import TrainingConfig

CONFIG_ENV = "TPLDETECT_CONFIG"


class ConfigError(TPLDetectError):
    pass


def _pair(key: str) -> tuple[Language, Channel]:
    lang, _, ch = key.partition(".")
    try:
        return Language(lang.strip().lower()), Channel(ch.strip().lower())
    except ValueError:
        raise ConfigError(f"expected <language>.<channel>, got {key!r}") from None


@dataclass(frozen=True)
class RunConfig:
    corpus: tuple[Path, ...] = ()
    index_dir: Path | None = None
    models_dir: Path | None = None
    model_paths: Mapping[tuple[Language, Channel], Path] = field(default_factory=dict)
    detection: DetectionPolicy = DetectionPolicy()
    training: TrainingConfig = TrainingConfig()
    adapters: Mapping[tuple[Language, Channel], str] = field(default_factory=dict)
    log_level: str = "WARNING"

    def model_path(self, language: Language, channel: Channel) -> Path | None:
        if (language, channel) in self.model_paths:
            return self.model_paths[(language, channel)]
        if self.models_dir is None:
            return None
        return self.models_dir / model_filename(language, channel)

    def check_paths(self, *names: str) -> None:
        """Fail early when a referenced input is missing."""
        for name in names:
            value = getattr(self, name)
            paths = value if isinstance(value, tuple) else (value,)
            if not paths or any(p is None for p in paths):
                raise ConfigError(f"{name} is not configured")
            for p in paths:
                if not Path(p).exists():
                    raise ConfigError(f"{name}: {p} does not exist")


def model_filename(language: Language, channel: Channel) -> str:
    return f"{Language(language).value}-{Channel(channel).value}.l2vm"


def _coerce(kind, text: str):
    text = text.strip()
    if kind is bool:
        return text.lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


_TRAINING_TYPES = {"epochs": int, "vector_size": int, "sample_count": int, "window": int,
                   "negative": int, "min_count": int, "initial_lr": float, "final_lr": float,
                   "seed": int, "infer_epochs": int, "workers": int}


def _training(section: Mapping[str, str]) -> TrainingConfig:
    values = {}
    for key, text in section.items():
        if key not in _TRAINING_TYPES:
            raise ConfigError(f"[training] unknown key {key!r}")
        if key == "sample_count" and text.strip().upper() in ("", "ALL"):
            values[key] = None
        else:
            values[key] = _coerce(_TRAINING_TYPES[key], text)
    return TrainingConfig(**values)


def _detection(section: Mapping[str, str]) -> DetectionPolicy:
    thresholds, ranks, values = {}, {}, {}
    for key, text in section.items():
        if key.startswith("threshold."):
            thresholds[_pair(key[len("threshold."):])] = float(text)
        elif key.startswith("rank_threshold."):
            ranks[_pair(key[len("rank_threshold."):])] = float(text)
        elif key in ("k", "min_file_bytes"):
            values[key] = int(text)
        elif key == "majority_fraction":
            values[key] = float(text)
        elif key == "required_channels":
            values[key] = RequiredChannels(text.strip().lower())
        else:
            raise ConfigError(f"[detection] unknown key {key!r}")
    return DetectionPolicy(thresholds=thresholds, rank_thresholds=ranks or None, **values)


def load_config(path=None) -> RunConfig:
    """Read ``path`` (or the file named by $TPLDETECT_CONFIG); no file gives defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = path.parent

    def resolve(text: str) -> Path:
        p = Path(text.strip()).expanduser()
        return p if p.is_absolute() else base / p

    try:
        paths = parser["paths"] if parser.has_section("paths") else {}
        corpus = tuple(resolve(t) for t in paths.get("corpus", "").split() if t)
        cfg = RunConfig(
            corpus=corpus,
            index_dir=resolve(paths["index"]) if paths.get("index") else None,
            models_dir=resolve(paths["models"]) if paths.get("models") else None,
            model_paths={_pair(k): resolve(v) for k, v in parser.items("models")}
            if parser.has_section("models") else {},
            detection=_detection(parser["detection"]) if parser.has_section("detection")
            else DetectionPolicy(),
            training=_training(parser["training"]) if parser.has_section("training")
            else TrainingConfig(),
            adapters={_pair(k): v for k, v in parser.items("adapters")}
            if parser.has_section("adapters") else {},
            log_level=parser.get("logging", "level", fallback="WARNING").upper(),
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg


def override(cfg: RunConfig, **flags) -> RunConfig:
    """Apply command-line values on top of ``cfg``; ``None`` means "not given"."""
    training = {k: v for k, v in flags.items() if k in _TRAINING_TYPES and v is not None}
    detection = {k: v for k, v in flags.items()
                 if k in {f.name for f in fields(DetectionPolicy)} and v is not None}
    top = {k: v for k, v in flags.items()
           if k in {f.name for f in fields(RunConfig)} and v is not None}
    try:
        if training:
            top["training"] = replace(cfg.training, **training)
        if detection:
            top["detection"] = dataclasses.replace(cfg.detection, **detection)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return replace(cfg, **top)
