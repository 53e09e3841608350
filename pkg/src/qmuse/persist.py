"""Versioned model files: canonical JSON serialization of trained Q-tables.

A model file is a single UTF-8 JSON document with top-level keys, in order:
"format_version", "config", "hyperparams", "summary", "qtable". Q-table
entries are [state_key, [6 decimal strings]] pairs sorted by key; values are
rendered with 17 significant digits so floats round-trip bit-exactly in any
language. Equal models always serialize to identical bytes.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .agent import HyperParams, N_ACTIONS, QTable
from .track import GenConfig

FORMAT_VERSION = 1
MODEL_SUFFIX = ".hitlrl.json"

_NAME_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]{0,63}\Z")


class PersistError(Exception):
    """Base error for model file problems."""


class ModelVersionError(PersistError):
    """The file declares a format_version this code does not understand."""


class ModelParseError(PersistError):
    """The file is not a well-formed model document."""


@dataclass(frozen=True)
class ModelFile:
    """A trained model: configuration, hyperparameters, Q-table, and totals."""

    config: GenConfig
    hyperparams: HyperParams
    qtable: QTable
    episodes_completed: int
    total_steps: int
    format_version: int = FORMAT_VERSION


def safe_model_name(name: str) -> str:
    """Validate a user-supplied model name (no separators, no dotfiles)."""
    if not isinstance(name, str) or not _NAME_RE.fullmatch(name):
        raise ValueError(
            "model name must be 1-64 characters from [A-Za-z0-9._-] and not start with a punctuation character"
        )
    return name


def model_path(directory: str | Path, name: str) -> Path:
    return Path(directory) / (safe_model_name(name) + MODEL_SUFFIX)


def model_to_doc(model: ModelFile) -> dict:
    """The model's canonical JSON document (exact key order)."""
    return {
        "format_version": model.format_version,
        "config": {
            "base_note": model.config.base_note,
            "scale_type": model.config.scale_type,
            "track_length": model.config.track_length,
            "tempo_bpm": model.config.tempo_bpm,
            "volume": model.config.volume,
            "seed": model.config.seed,
        },
        "hyperparams": {
            "alpha": model.hyperparams.alpha,
            "gamma": model.hyperparams.gamma,
            "epsilon": model.hyperparams.epsilon,
            "episodes": model.hyperparams.episodes,
            "steps_per_episode": model.hyperparams.steps_per_episode,
            "seed": model.hyperparams.seed,
        },
        "summary": {
            "episodes_completed": model.episodes_completed,
            "total_steps": model.total_steps,
        },
        "qtable": [
            [key, [f"{v:.17g}" for v in model.qtable.entries[key]]]
            for key in sorted(model.qtable.entries)
        ],
    }


def _dump(model: ModelFile) -> str:
    return json.dumps(model_to_doc(model), indent=2) + "\n"


def save_model(path: str | Path, model: ModelFile) -> None:
    """Write the model atomically; equal models produce identical bytes."""
    if model.format_version != FORMAT_VERSION:
        raise ModelVersionError(
            f"cannot write format_version {model.format_version}; this build writes {FORMAT_VERSION}"
        )
    model.config.validate()
    model.hyperparams.validate()
    if model.episodes_completed < 0 or model.total_steps < 0:
        raise ValueError("summary counts must be non-negative")
    path = Path(path)
    text = _dump(model)
    try:
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(text)
            os.replace(tmp_name, path)
        except BaseException:
            os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise PersistError(f"cannot write model file {path}: {exc}") from exc


def _parse_summary(doc: dict, path: Path) -> tuple[int, int]:
    summary = doc.get("summary")
    if not isinstance(summary, dict):
        raise ModelParseError(f"{path}: missing or malformed summary")
    try:
        episodes = summary["episodes_completed"]
        steps = summary["total_steps"]
    except KeyError as exc:
        raise ModelParseError(f"{path}: summary missing key {exc}") from exc
    if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in (episodes, steps)):
        raise ModelParseError(f"{path}: summary counts must be non-negative integers")
    return episodes, steps


def _parse_qtable(doc: dict, path: Path) -> QTable:
    raw = doc.get("qtable")
    if not isinstance(raw, list):
        raise ModelParseError(f"{path}: missing or malformed qtable")
    entries: dict[str, list[float]] = {}
    keys: list[str] = []
    for index, item in enumerate(raw):
        where = f"{path}: qtable entry {index}"
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], str)):
            raise ModelParseError(f"{where}: expected [state_key, [6 values]]")
        key, values = item
        if not (isinstance(values, list) and len(values) == N_ACTIONS):
            raise ModelParseError(f"{where} ({key!r}): expected {N_ACTIONS} action values")
        parsed: list[float] = []
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (str, int, float)):
                raise ModelParseError(f"{where} ({key!r}): non-numeric action value {v!r}")
            try:
                parsed.append(float(v))
            except ValueError as exc:
                raise ModelParseError(f"{where} ({key!r}): non-numeric action value {v!r}") from exc
        if key in entries:
            raise ModelParseError(f"{where}: duplicate state key {key!r}")
        entries[key] = parsed
        keys.append(key)
    if keys != sorted(keys):
        raise ModelParseError(f"{path}: qtable entries are not sorted by state key")
    return QTable(entries)


def model_from_doc(doc: object, where: str | Path) -> ModelFile:
    """Validate a parsed JSON document as a model (inverse of model_to_doc)."""
    where = Path(where)
    if not isinstance(doc, dict):
        raise ModelParseError(f"{where}: top level must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(
            f"{where}: unsupported format_version {version!r} (supported: {FORMAT_VERSION})"
        )
    for section in ("config", "hyperparams"):
        if not isinstance(doc.get(section), dict):
            raise ModelParseError(f"{where}: missing or malformed {section}")
    try:
        config = GenConfig(**doc["config"])
        hp = HyperParams(**doc["hyperparams"])
    except TypeError as exc:
        raise ModelParseError(f"{where}: {exc}") from exc
    config.validate()
    hp.validate()
    episodes, steps = _parse_summary(doc, where)
    qtable = _parse_qtable(doc, where)
    return ModelFile(
        config=config,
        hyperparams=hp,
        qtable=qtable,
        episodes_completed=episodes,
        total_steps=steps,
        format_version=version,
    )


def load_model(path: str | Path) -> ModelFile:
    """Read and fully validate a model file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PersistError(f"cannot read model file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return model_from_doc(doc, path)


def list_models(directory: str | Path) -> list[dict]:
    """Summaries of every model file in a directory, sorted by name.

    Unreadable or corrupt files are reported with an "error" field instead of
    hiding them; other files are unaffected.
    """
    directory = Path(directory)
    try:
        files = sorted(
            p for p in directory.iterdir() if p.name.endswith(MODEL_SUFFIX) and p.is_file()
        )
    except OSError as exc:
        raise PersistError(f"cannot list models in {directory}: {exc}") from exc
    summaries: list[dict] = []
    for p in files:
        name = p.name[: -len(MODEL_SUFFIX)]
        try:
            stamp = datetime.fromtimestamp(p.stat().st_mtime, tz=timezone.utc)
            saved_at = stamp.isoformat(timespec="seconds").replace("+00:00", "Z")
        except OSError:
            saved_at = None
        try:
            model = load_model(p)
        except (PersistError, ValueError) as exc:
            summaries.append({"name": name, "saved_at": saved_at, "error": str(exc)})
            continue
        summaries.append(
            {
                "name": name,
                "saved_at": saved_at,
                "episodes_completed": model.episodes_completed,
            }
        )
    return summaries
