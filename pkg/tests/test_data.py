import json
import struct

import numpy as np
import numpy.testing as npt
import pytest

from mcqa import (
    FeatureStore,
    QuestionInstance,
    RegionFeature,
    load_features,
    load_questions,
    save_features,
    save_questions,
    validate_dataset,
    whole_image_bbox,
)
from mcqa.data import FEATURE_MAGIC, FEATURE_VERSION, _BIN_HEADER
from mcqa.errors import (
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


def small_store(rng=None):
    rng = rng or np.random.default_rng(0)
    store = FeatureStore()
    for i in range(4):
        store.add_entry(
            "image", 5, f"img{i}",
            [RegionFeature(whole_image_bbox(64, 48), rng.standard_normal(5))],
        )
        store.add_entry(
            "boxes", 3, f"img{i}",
            [
                RegionFeature((1.0 * j, 2.0, 3.0, 4.0), rng.standard_normal(3))
                for j in range(i + 1)
            ],
        )
    return store


class TestFeatureStore:
    def test_lookup(self):
        store = small_store()
        assert store.channel_names() == ["image", "boxes"]
        assert store.dim("boxes") == 3
        assert store.has("image", "img2") and not store.has("image", "nope")
        assert len(store.regions("boxes", "img3")) == 4

    def test_unknown_channel_or_image(self):
        store = small_store()
        with pytest.raises(DataError):
            store.regions("nope", "img0")
        with pytest.raises(DataError):
            store.regions("image", "nope")

    def test_rejects_bad_entries(self):
        store = small_store()
        with pytest.raises(DuplicateImageId):
            store.add_entry("image", 5, "img0", [RegionFeature((0, 0, 1, 1), np.zeros(5))])
        with pytest.raises(DimMismatch):
            store.add_entry("image", 4, "new", [RegionFeature((0, 0, 1, 1), np.zeros(4))])
        with pytest.raises(DimMismatch):
            store.add_entry("image", 5, "new", [RegionFeature((0, 0, 1, 1), np.zeros(4))])
        with pytest.raises(DataError):
            store.add_entry("image", 5, "new", [])
        with pytest.raises(NonFiniteInput):
            store.add_entry(
                "image", 5, "new", [RegionFeature((0, 0, 1, 1), np.array([1, 2, np.inf, 4, 5.0]))]
            )
        for bbox in ((-1, 0, 1, 1), (0, 0, 0, 1), (0, 0, 1, -2), (0, 0, 1)):
            with pytest.raises(DataError):
                store.add_entry("image", 5, f"new{bbox}", [RegionFeature(bbox, np.zeros(5))])

    def test_vectors_read_only(self):
        store = small_store()
        with pytest.raises(ValueError):
            store.regions("image", "img0")[0].vec[0] = 9.0


class TestFeatureIO:
    def test_roundtrip_values_single_precision(self, tmp_path):
        store = small_store()
        manifest = save_features(store, tmp_path / "f")
        loaded = load_features(manifest)
        assert loaded.channel_names() == store.channel_names()
        for ch in store.channel_names():
            for i in range(4):
                orig = store.regions(ch, f"img{i}")
                back = loaded.regions(ch, f"img{i}")
                assert [r.bbox for r in orig] == [r.bbox for r in back]
                for a, b in zip(orig, back):
                    npt.assert_array_equal(np.float64(np.float32(a.vec)), b.vec)

    def test_save_load_save_is_byte_identical(self, tmp_path):
        store = small_store()
        m1 = save_features(store, tmp_path / "one")
        m2 = save_features(load_features(m1), tmp_path / "two")
        for name in ("features.json", "image.bin", "image.index.jsonl", "boxes.bin"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_bad_magic(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        bin_path = tmp_path / "image.bin"
        blob = bytearray(bin_path.read_bytes())
        blob[:4] = b"XXXX"
        bin_path.write_bytes(bytes(blob))
        with pytest.raises(MagicMismatch):
            load_features(manifest)

    def test_truncated_binary(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        bin_path = tmp_path / "image.bin"
        bin_path.write_bytes(bin_path.read_bytes()[:-4])
        with pytest.raises(TruncatedFile):
            load_features(manifest)

    def test_trailing_bytes_rejected(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        bin_path = tmp_path / "image.bin"
        bin_path.write_bytes(bin_path.read_bytes() + b"\x01")
        with pytest.raises(DataError):
            load_features(manifest)

    def test_dim_disagreement_with_manifest(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        obj = json.loads(manifest.read_text())
        obj["channels"][0]["dim"] = 6
        manifest.write_text(json.dumps(obj))
        with pytest.raises(DimMismatch):
            load_features(manifest)

    def test_unsupported_version(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        bin_path = tmp_path / "image.bin"
        blob = bytearray(bin_path.read_bytes())
        magic, _, dim, rows = _BIN_HEADER.unpack_from(blob)
        blob[: _BIN_HEADER.size] = _BIN_HEADER.pack(magic, FEATURE_VERSION + 1, dim, rows)
        bin_path.write_bytes(bytes(blob))
        with pytest.raises(DataError):
            load_features(manifest)

    def test_index_row_range_beyond_binary(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        index = tmp_path / "image.index.jsonl"
        lines = index.read_text().splitlines()
        obj = json.loads(lines[0])
        obj["row_start"] = 1000
        lines[0] = json.dumps(obj)
        index.write_text("\n".join(lines) + "\n")
        with pytest.raises(TruncatedFile):
            load_features(manifest)

    def test_index_parse_errors_carry_line_numbers(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        index = tmp_path / "image.index.jsonl"
        lines = index.read_text().splitlines()
        lines[2] = "{not json"
        index.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as err:
            load_features(manifest)
        assert f"{index}:3" in str(err.value)

    def test_index_duplicate_image(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        index = tmp_path / "image.index.jsonl"
        lines = index.read_text().splitlines()
        index.write_text("\n".join(lines + [lines[0]]) + "\n")
        with pytest.raises(DuplicateImageId):
            load_features(manifest)

    def test_index_missing_key(self, tmp_path):
        manifest = save_features(small_store(), tmp_path)
        index = tmp_path / "image.index.jsonl"
        lines = index.read_text().splitlines()
        obj = json.loads(lines[1])
        del obj["bboxes"]
        lines[1] = json.dumps(obj)
        index.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as err:
            load_features(manifest)
        assert "bboxes" in str(err.value)

    def test_header_layout_is_stable(self, tmp_path):
        save_features(small_store(), tmp_path)
        blob = (tmp_path / "boxes.bin").read_bytes()
        magic, version, dim, rows = struct.unpack_from("<4sIIQ", blob)
        assert (magic, version, dim, rows) == (FEATURE_MAGIC, 1, 3, 1 + 2 + 3 + 4)
        assert len(blob) == 20 + rows * dim * 4


def sample_questions():
    return [
        QuestionInstance(
            id=f"q{i}", qtype="color" if i % 2 else "shape", image_id=f"img{i}",
            prompt="the object is __", candidates=("red", "blue", "green"), gold=i % 3,
        )
        for i in range(6)
    ]


class TestQuestions:
    def test_roundtrip(self, tmp_path):
        path = save_questions(sample_questions(), tmp_path / "q.jsonl")
        assert load_questions(path) == sample_questions()

    def test_gold_is_optional(self, tmp_path):
        q = QuestionInstance("q0", "shape", "img0", "a __", ("x", "y"), None)
        path = save_questions([q], tmp_path / "q.jsonl")
        assert load_questions(path)[0].gold is None

    def test_blank_lines_skipped(self, tmp_path):
        path = save_questions(sample_questions(), tmp_path / "q.jsonl")
        path.write_text("\n" + path.read_text() + "\n\n", encoding="utf-8")
        assert load_questions(path) == sample_questions()

    def test_parse_errors_carry_line_numbers(self, tmp_path):
        path = save_questions(sample_questions(), tmp_path / "q.jsonl")
        lines = path.read_text().splitlines()
        obj = json.loads(lines[3])
        del obj["prompt"]
        lines[3] = json.dumps(obj)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(MissingField) as err:
            load_questions(path)
        assert f"{path}:4" in str(err.value)
        assert "prompt" in str(err.value)

    def test_bad_gold_index(self, tmp_path):
        path = tmp_path / "q.jsonl"
        obj = {
            "id": "q0", "qtype": "t", "image_id": "i", "prompt": "p",
            "candidates": ["a", "b"], "gold": 2,
        }
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(BadGoldIndex):
            load_questions(path)
        obj["gold"] = True
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(BadGoldIndex):
            load_questions(path)

    def test_too_few_candidates(self, tmp_path):
        path = tmp_path / "q.jsonl"
        obj = {"id": "q0", "qtype": "t", "image_id": "i", "prompt": "p", "candidates": ["a"]}
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(ParseError):
            load_questions(path)


def test_validate_dataset_reports_missing_pairs():
    store = small_store()
    questions = sample_questions() + [
        QuestionInstance("q9", "shape", "img9", "p __", ("a", "b"), 0)
    ]
    problems = validate_dataset(store, questions, ("image", "boxes"))
    assert [(p.question_id, p.image_id, p.channel) for p in problems] == [
        ("q4", "img4", "image"), ("q4", "img4", "boxes"),
        ("q5", "img5", "image"), ("q5", "img5", "boxes"),
        ("q9", "img9", "image"), ("q9", "img9", "boxes"),
    ]
    assert validate_dataset(store, sample_questions()[:4], ("image", "boxes")) == []
    with pytest.raises(DataError):
        validate_dataset(store, questions, ("missing_channel",))
