"""Run configuration: one JSON file naming the dataset pieces and the
modeling hyperparameters, with paths resolved relative to the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .cca import DEFAULT_POWER, DEFAULT_REG
from .cues import CueConfig
from .errors import ConfigError
from .fusion import NORMALIZATION_MODES


@dataclass(frozen=True)
class CueSpec:
    """One cue channel's name and scoring mode, as configured."""

    name: str
    mode: str = "fullimage"
    query: str = "prompt"
    top_m: int = 1

    def scoring(self) -> CueConfig:
        return CueConfig(mode=self.mode, query=self.query, top_m=self.top_m)


@dataclass(frozen=True)
class RunConfig:
    word_vectors: Path
    features: Path
    questions: dict[str, Path]
    cues: tuple[CueSpec, ...]
    lexicons: Path | None = None
    k: int = 8
    reg: float = DEFAULT_REG
    power: float = DEFAULT_POWER
    grid_step: float = 0.1
    normalization: str = "off"

    def cue_names(self) -> tuple[str, ...]:
        return tuple(spec.name for spec in self.cues)

    def cue_configs(self) -> dict[str, CueConfig]:
        return {spec.name: spec.scoring() for spec in self.cues}

    def split(self, name: str) -> Path:
        if name not in self.questions:
            raise ConfigError(
                f"no question split {name!r}; configured splits: {sorted(self.questions)}"
            )
        return self.questions[name]


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise ConfigError(f"{where}: missing required key {key!r}")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"{where}: key {key!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def _cue_spec(obj, where: str) -> CueSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: each cue must be an object")
    name = _require(obj, "name", str, where)
    unknown = set(obj) - {"name", "mode", "query", "top_m"}
    if unknown:
        raise ConfigError(f"{where}: unknown cue keys {sorted(unknown)}")
    try:
        spec = CueSpec(
            name=name,
            mode=obj.get("mode", "fullimage"),
            query=obj.get("query", "prompt"),
            top_m=obj.get("top_m", 1),
        )
        spec.scoring()
    except Exception as exc:
        raise ConfigError(f"{where}: cue {name!r}: {exc}") from None
    return spec


def load_config(path) -> RunConfig:
    """Parse and validate a run config; relative paths resolve against the
    config file's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    where = str(path)
    base = path.parent

    word_vectors = base / _require(obj, "word_vectors", str, where)
    features = base / _require(obj, "features", str, where)
    questions_obj = _require(obj, "questions", dict, where)
    if not questions_obj:
        raise ConfigError(f"{where}: 'questions' must name at least one split")
    questions = {}
    for split, rel in questions_obj.items():
        if not isinstance(rel, str):
            raise ConfigError(f"{where}: questions[{split!r}] must be a path string")
        questions[split] = base / rel

    cues_obj = _require(obj, "cues", list, where)
    if not cues_obj:
        raise ConfigError(f"{where}: 'cues' must list at least one cue")
    cues = tuple(_cue_spec(c, where) for c in cues_obj)
    names = [c.name for c in cues]
    if len(set(names)) != len(names):
        raise ConfigError(f"{where}: duplicate cue names in {names}")

    lexicons = obj.get("lexicons")
    if lexicons is not None and not isinstance(lexicons, str):
        raise ConfigError(f"{where}: 'lexicons' must be a path string")

    k = obj.get("k", 8)
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ConfigError(f"{where}: 'k' must be a positive integer")
    numbers = {}
    for key, default in (("reg", DEFAULT_REG), ("power", DEFAULT_POWER), ("grid_step", 0.1)):
        value = obj.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: {key!r} must be a number")
        numbers[key] = float(value)
    if numbers["reg"] < 0 or numbers["power"] < 0:
        raise ConfigError(f"{where}: 'reg' and 'power' must be nonnegative")
    if not 0 < numbers["grid_step"] <= 1:
        raise ConfigError(f"{where}: 'grid_step' must be in (0, 1]")
    normalization = obj.get("normalization", "off")
    if normalization not in NORMALIZATION_MODES:
        raise ConfigError(
            f"{where}: 'normalization' must be one of {NORMALIZATION_MODES}, got {normalization!r}"
        )
    known = {
        "word_vectors", "features", "questions", "cues", "lexicons",
        "k", "reg", "power", "grid_step", "normalization",
    }
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"{where}: unknown config keys {sorted(unknown)}")

    return RunConfig(
        word_vectors=word_vectors,
        features=features,
        questions=questions,
        cues=cues,
        lexicons=None if lexicons is None else base / lexicons,
        k=k,
        reg=numbers["reg"],
        power=numbers["power"],
        grid_step=numbers["grid_step"],
        normalization=normalization,
    )
