"""Precomputed feature storage and question files.

On-disk layout, all little-endian:

* manifest — JSON ``{"channels": [{"name", "dim", "index", "binary"}]}``
  with index/binary paths resolved relative to the manifest's directory.
* channel index — JSON lines, each
  ``{"image_id", "row_start", "row_count", "bboxes": [[x, y, w, h], ...]}``
  with ``row_count == len(bboxes)``.
* channel binary — magic ``MCFS``, version u32=1, dim u32, row_count u64,
  then row-major float32 rows.
* questions — JSON lines with ``id``, ``qtype``, ``image_id``, ``prompt``,
  ``candidates`` (>= 2 strings) and optional ``gold``; unknown extra
  fields are ignored.

Feature payloads are float32 on disk and float64 in memory, so a
load -> save -> load round trip is bit-exact.  Whole-image features are
plain entries with a single region whose bbox covers the image, which
keeps region selection and full-image scoring on one code path.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadGoldIndex,
    DataError,
    DimMismatch,
    DuplicateImageId,
    MagicMismatch,
    MissingField,
    NonFiniteInput,
    ParseError,
    TruncatedFile,
)
from .validation import readonly

FEATURE_MAGIC = b"MCFS"
FEATURE_VERSION = 1
_BIN_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, row_count


@dataclass(frozen=True)
class RegionFeature:
    """One candidate image region: pixel bbox (x, y, w, h) plus its feature vector."""

    bbox: tuple[float, float, float, float]
    vec: np.ndarray


@dataclass
class Channel:
    """All per-image features of one cue channel."""

    name: str
    dim: int
    entries: dict[str, list[RegionFeature]] = field(default_factory=dict)


class FeatureStore:
    """Keyed lookup of per-image region features, organized by channel.

    Immutable by convention after construction; vectors are stored
    read-only so the store is safe to share across threads.
    """

    def __init__(self, channels: dict[str, Channel] | None = None):
        self.channels: dict[str, Channel] = channels or {}

    def channel_names(self) -> list[str]:
        return list(self.channels)

    def dim(self, channel: str) -> int:
        return self._channel(channel).dim

    def has(self, channel: str, image_id: str) -> bool:
        ch = self.channels.get(channel)
        return ch is not None and image_id in ch.entries

    def regions(self, channel: str, image_id: str) -> list[RegionFeature]:
        ch = self._channel(channel)
        try:
            return ch.entries[image_id]
        except KeyError:
            raise DataError(f"image {image_id!r} has no features in channel {channel!r}") from None

    def add_entry(self, channel: str, dim: int, image_id: str, regions: list[RegionFeature]) -> None:
        ch = self.channels.setdefault(channel, Channel(channel, int(dim)))
        if ch.dim != dim:
            raise DimMismatch(f"channel {channel!r} has dim {ch.dim}, entry declares {dim}")
        if image_id in ch.entries:
            raise DuplicateImageId(f"channel {channel!r} already has image {image_id!r}")
        if not regions:
            raise DataError(f"entry for image {image_id!r} has no regions")
        checked = []
        for region in regions:
            vec = np.ascontiguousarray(region.vec, dtype=np.float64)
            if vec.shape != (ch.dim,):
                raise DimMismatch(
                    f"vector for image {image_id!r} has shape {vec.shape}, expected ({ch.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise NonFiniteInput(f"vector for image {image_id!r} in {channel!r} is not finite")
            checked.append(RegionFeature(_checked_bbox(region.bbox), readonly(vec)))
        ch.entries[image_id] = checked

    def _channel(self, channel: str) -> Channel:
        try:
            return self.channels[channel]
        except KeyError:
            raise DataError(f"unknown feature channel {channel!r}") from None


def _checked_bbox(bbox) -> tuple[float, float, float, float]:
    vals = tuple(float(v) for v in bbox)
    if len(vals) != 4:
        raise DataError(f"bbox must have 4 entries, got {len(vals)}")
    x, y, w, h = vals
    if not all(np.isfinite(v) for v in vals) or x < 0 or y < 0 or w <= 0 or h <= 0:
        raise DataError(f"malformed bbox {vals}")
    return vals


def whole_image_bbox(width: float, height: float) -> tuple[float, float, float, float]:
    return (0.0, 0.0, float(width), float(height))


# --- feature IO ---------------------------------------------------------


def _read_channel_binary(path: Path, expected_dim: int) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < _BIN_HEADER.size:
        raise TruncatedFile(f"{path}: {len(data)} bytes, header needs {_BIN_HEADER.size}")
    magic, version, dim, row_count = _BIN_HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise MagicMismatch(f"{path}: expected magic {FEATURE_MAGIC!r}, got {magic!r}")
    if version != FEATURE_VERSION:
        raise DataError(f"{path}: unsupported feature file version {version}")
    if dim != expected_dim:
        raise DimMismatch(f"{path}: binary header dim {dim} != manifest dim {expected_dim}")
    expected = _BIN_HEADER.size + row_count * dim * 4
    if len(data) < expected:
        raise TruncatedFile(f"{path}: {len(data)} bytes, expected {expected}")
    if len(data) > expected:
        raise DataError(f"{path}: {len(data) - expected} trailing bytes")
    rows = np.frombuffer(data, dtype="<f4", count=row_count * dim, offset=_BIN_HEADER.size)
    rows = rows.reshape(row_count, dim).astype(np.float64)
    if not np.all(np.isfinite(rows)):
        raise NonFiniteInput(f"{path}: feature rows contain NaN or infinity")
    return rows


def _parse_index_line(obj, path: Path, lineno: int, total_rows: int):
    for key in ("image_id", "row_start", "row_count", "bboxes"):
        if key not in obj:
            raise ParseError(f"missing key {key!r}", path=str(path), line=lineno)
    image_id = obj["image_id"]
    row_start, row_count = obj["row_start"], obj["row_count"]
    bboxes = obj["bboxes"]
    if not isinstance(image_id, str) or not image_id:
        raise ParseError("image_id must be a non-empty string", path=str(path), line=lineno)
    if not isinstance(row_start, int) or isinstance(row_start, bool) or row_start < 0:
        raise ParseError("row_start must be a non-negative integer", path=str(path), line=lineno)
    if not isinstance(row_count, int) or isinstance(row_count, bool) or row_count < 1:
        raise ParseError("row_count must be a positive integer", path=str(path), line=lineno)
    if not isinstance(bboxes, list) or len(bboxes) != row_count:
        raise ParseError(
            f"bboxes length {len(bboxes) if isinstance(bboxes, list) else '?'} != row_count {row_count}",
            path=str(path),
            line=lineno,
        )
    if row_start + row_count > total_rows:
        raise TruncatedFile(
            f"{path}:{lineno}: rows [{row_start}, {row_start + row_count}) exceed binary row count {total_rows}"
        )
    return image_id, row_start, row_count, bboxes


def load_features(manifest_path) -> FeatureStore:
    """Load every channel listed in a manifest into a FeatureStore."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=str(manifest_path)) from None
    if not isinstance(manifest, dict) or not isinstance(manifest.get("channels"), list):
        raise ParseError("manifest must be an object with a 'channels' list", path=str(manifest_path))
    base = manifest_path.parent
    store = FeatureStore()
    for spec in manifest["channels"]:
        for key in ("name", "dim", "index", "binary"):
            if key not in spec:
                raise ParseError(f"channel spec missing {key!r}", path=str(manifest_path))
        name, dim = spec["name"], spec["dim"]
        if name in store.channels:
            raise DataError(f"manifest lists channel {name!r} twice")
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise ParseError(f"channel {name!r} dim must be a positive integer", path=str(manifest_path))
        rows = _read_channel_binary(base / spec["binary"], dim)
        index_path = base / spec["index"]
        with index_path.open("r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc.msg}", path=str(index_path), line=lineno) from None
                image_id, row_start, row_count, bboxes = _parse_index_line(
                    obj, index_path, lineno, rows.shape[0]
                )
                try:
                    regions = [
                        RegionFeature(_checked_bbox(bboxes[i]), rows[row_start + i])
                        for i in range(row_count)
                    ]
                    store.add_entry(name, dim, image_id, regions)
                except DuplicateImageId:
                    raise DuplicateImageId(
                        f"{index_path}:{lineno}: duplicate image {image_id!r}"
                    ) from None
                except DataError as exc:
                    if isinstance(exc, ParseError):
                        raise
                    raise ParseError(str(exc), path=str(index_path), line=lineno) from None
    return store


def save_features(store: FeatureStore, out_dir, manifest_name: str = "features.json") -> Path:
    """Write a FeatureStore to ``out_dir``; returns the manifest path.

    Row payloads are cast to float32, so saving a store that was loaded
    from disk reproduces the binary payload bit-for-bit.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    channels = []
    for name, ch in store.channels.items():
        index_name, bin_name = f"{name}.index.jsonl", f"{name}.bin"
        row_blocks: list[np.ndarray] = []
        row_start = 0
        with (out_dir / index_name).open("w", encoding="utf-8") as fh:
            for image_id, regions in ch.entries.items():
                block = np.stack([r.vec for r in regions]).astype("<f4")
                row_blocks.append(block)
                fh.write(
                    json.dumps(
                        {
                            "image_id": image_id,
                            "row_start": row_start,
                            "row_count": len(regions),
                            "bboxes": [list(r.bbox) for r in regions],
                        }
                    )
                    + "\n"
                )
                row_start += len(regions)
        payload = b"".join(b.tobytes() for b in row_blocks)
        header = _BIN_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, ch.dim, row_start)
        (out_dir / bin_name).write_bytes(header + payload)
        channels.append({"name": name, "dim": ch.dim, "index": index_name, "binary": bin_name})
    manifest_path = out_dir / manifest_name
    manifest_path.write_text(json.dumps({"channels": channels}, indent=2) + "\n", encoding="utf-8")
    return manifest_path


# --- questions ----------------------------------------------------------


@dataclass(frozen=True)
class QuestionInstance:
    """One multiple-choice item; ``gold`` indexes ``candidates`` when known."""

    id: str
    qtype: str
    image_id: str
    prompt: str
    candidates: tuple[str, ...]
    gold: int | None = None


def _question_from_obj(obj, path: str, lineno: int) -> QuestionInstance:
    for key in ("id", "qtype", "image_id", "prompt", "candidates"):
        if key not in obj:
            raise MissingField(f"{path}:{lineno}: question missing field {key!r}")
    for key in ("id", "qtype", "image_id", "prompt"):
        if not isinstance(obj[key], str):
            raise ParseError(f"field {key!r} must be a string", path=path, line=lineno)
    candidates = obj["candidates"]
    if (
        not isinstance(candidates, list)
        or len(candidates) < 2
        or not all(isinstance(c, str) and c for c in candidates)
    ):
        raise ParseError("candidates must be a list of >= 2 non-empty strings", path=path, line=lineno)
    gold = obj.get("gold")
    if gold is not None:
        if isinstance(gold, bool) or not isinstance(gold, int) or not 0 <= gold < len(candidates):
            raise BadGoldIndex(
                f"{path}:{lineno}: gold={gold!r} invalid for {len(candidates)} candidates"
            )
    return QuestionInstance(
        id=obj["id"],
        qtype=obj["qtype"],
        image_id=obj["image_id"],
        prompt=obj["prompt"],
        candidates=tuple(candidates),
        gold=gold,
    )


def load_questions(path) -> list[QuestionInstance]:
    """Read a JSON-lines question file, preserving file order."""
    path = Path(path)
    questions = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("each line must be a JSON object", path=str(path), line=lineno)
            questions.append(_question_from_obj(obj, str(path), lineno))
    return questions


def save_questions(questions, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for q in questions:
            obj = {
                "id": q.id,
                "qtype": q.qtype,
                "image_id": q.image_id,
                "prompt": q.prompt,
                "candidates": list(q.candidates),
            }
            if q.gold is not None:
                obj["gold"] = q.gold
            fh.write(json.dumps(obj) + "\n")
    return path


# --- validation ---------------------------------------------------------


@dataclass(frozen=True)
class ValidationProblem:
    """A question whose image has no features in a required channel."""

    question_id: str
    image_id: str
    channel: str


def validate_dataset(
    store: FeatureStore, questions, required_channels
) -> list[ValidationProblem]:
    """Every (question, channel) pair lacking features; empty iff evaluable.

    A required channel that the store lacks entirely is a DataError, not
    a per-question problem.
    """
    for channel in required_channels:
        store._channel(channel)
    problems = []
    for q in questions:
        for channel in required_channels:
            if not store.has(channel, q.image_id):
                problems.append(ValidationProblem(q.id, q.image_id, channel))
    return problems
