"""SVG rendering, provenance records, and artifact writers."""

import hashlib
import json
import xml.etree.ElementTree as ET

import pytest

from capmotion import EvalReport
from capmotion.report import (
    confusion_heatmap_svg,
    counting_summary_svg,
    provenance_record,
    text_summary,
    write_count_artifacts,
    write_eval_artifacts,
)


def _report(**overrides):
    base = dict(
        scheme="louo", seed=3, label_set_id="LEG7", feature_subset="all",
        model_kind="random_forest",
        config={"n_trees": 5},
        classes=("run", "walk"),
        confusion=[[3, 1], [0, 4]],
        per_class={
            "run": {"precision": 1.0, "recall": 0.75, "f1": 6.0 / 7.0,
                    "support": 4},
            "walk": {"precision": 0.8, "recall": 1.0, "f1": 8.0 / 9.0,
                     "support": 4},
        },
        macro_f=0.857, hamming=0.125,
        per_fold=[{"held_out": "u0", "macro_f": 0.857}],
        notes=("grouped protocol",),
    )
    base.update(overrides)
    return EvalReport(**base)


def _count_report():
    return {
        "source": "cap_raw",
        "n_segments": 4,
        "mean_accuracy": 0.9,
        "per_class": {
            "CrossSquat": {"mean_accuracy": 0.85, "n": 2},
            "StandardSquat": {"mean_accuracy": 0.95, "n": 2},
        },
        "segments": [
            {"session_id": "s0", "class": "StandardSquat", "true": 10,
             "fused": 10, "counts": {"cap_raw": 10}, "accuracy": 1.0},
            {"session_id": "s0", "class": "CrossSquat", "true": 10,
             "fused": 9, "counts": {"cap_raw": 9}, "accuracy": 0.9},
            {"session_id": "s1", "class": "StandardSquat", "true": 12,
             "fused": 11, "counts": {"cap_raw": 11}, "accuracy": 11 / 12},
            {"session_id": "s1", "class": "CrossSquat", "true": 8,
             "fused": 8, "counts": {"cap_raw": 8}, "accuracy": 1.0},
        ],
    }


def _texts(svg):
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    return [el.text for el in root.iter(f"{ns}text") if el.text]


class TestConfusionHeatmap:
    def test_parses_as_xml(self):
        svg = confusion_heatmap_svg([[3, 1], [0, 4]], ["walk", "run"])
        root = ET.fromstring(svg)
        assert root.tag.endswith("svg")
        assert svg.endswith("\n")

    def test_mentions_classes_and_counts(self):
        svg = confusion_heatmap_svg([[3, 1], [0, 4]], ["walk", "run"])
        texts = _texts(svg)
        # each class labels one row and one column
        assert texts.count("walk") == 2
        assert texts.count("run") == 2
        for count in ("3", "1", "0", "4"):
            assert count in texts

    def test_deterministic(self):
        a = confusion_heatmap_svg([[2, 0], [1, 5]], ["a", "b"])
        b = confusion_heatmap_svg([[2, 0], [1, 5]], ["a", "b"])
        assert a == b

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            confusion_heatmap_svg([[1, 2], [3, 4]], ["a", "b", "c"])
        with pytest.raises(ValueError):
            confusion_heatmap_svg([[1, 2, 3], [4, 5, 6]], ["a", "b"])

    def test_all_zero_row_renders(self):
        svg = confusion_heatmap_svg([[0, 0], [2, 2]], ["a", "b"])
        ET.fromstring(svg)

    def test_markup_in_class_names_is_escaped(self):
        svg = confusion_heatmap_svg([[1, 0], [0, 1]], ["a&b<c", "plain"])
        texts = _texts(svg)
        assert "a&b<c" in texts  # parsed back out of the entity escapes


class TestCountingSummary:
    def test_parses_and_mentions_classes(self):
        svg = counting_summary_svg(_count_report())
        texts = _texts(svg)
        assert "CrossSquat" in texts
        assert "StandardSquat" in texts
        assert any("cap_raw" in t for t in texts)
        assert svg.endswith("\n")

    def test_deterministic(self):
        assert counting_summary_svg(_count_report()) == \
            counting_summary_svg(_count_report())

    def test_missing_source_renders_placeholder(self):
        doc = _count_report()
        del doc["source"]
        texts = _texts(counting_summary_svg(doc))
        assert any("?" in t for t in texts)

    def test_empty_segments_raise(self):
        with pytest.raises(ValueError):
            counting_summary_svg({"segments": []})
        with pytest.raises(ValueError):
            counting_summary_svg({})


class TestProvenance:
    def test_keys(self):
        rec = provenance_record({"x": 1}, 9)
        assert set(rec) == {"config_hash", "seed", "generated_at",
                            "package_version", "numpy_version",
                            "python_version", "platform"}

    def test_config_hash_is_sha256_of_sorted_json(self):
        doc = {"b": 2, "a": {"z": 1, "y": [3, 4]}}
        expected = hashlib.sha256(
            json.dumps(doc, sort_keys=True).encode()).hexdigest()
        assert provenance_record(doc, 0)["config_hash"] == expected

    def test_hash_ignores_key_insertion_order(self):
        a = provenance_record({"a": 1, "b": 2}, 0)["config_hash"]
        b = provenance_record({"b": 2, "a": 1}, 0)["config_hash"]
        assert a == b

    def test_seed_recorded_as_int(self):
        rec = provenance_record({}, 7)
        assert rec["seed"] == 7
        assert isinstance(rec["seed"], int)

    def test_record_is_json_serializable(self):
        json.dumps(provenance_record({"k": [1, 2]}, 3))


class TestTextSummary:
    def test_mentions_classes_and_metrics(self):
        out = text_summary(_report())
        assert "run" in out
        assert "walk" in out
        assert "macro-F" in out
        assert "louo" in out
        assert out.endswith("\n")


class TestWriteEvalArtifacts:
    def test_writes_three_files(self, tmp_path):
        r = _report()
        paths = write_eval_artifacts(r, tmp_path, {"seed": 3})
        assert [p.name for p in paths] == ["report.json", "confusion.svg",
                                           "provenance.json"]
        for p in paths:
            assert p.exists()
        assert paths[0].read_text() == r.to_json()
        ET.fromstring(paths[1].read_text())
        prov = json.loads(paths[2].read_text())
        assert prov["seed"] == 3

    def test_report_json_byte_identical_on_rewrite(self, tmp_path):
        r = _report()
        write_eval_artifacts(r, tmp_path, {"seed": 3})
        first = (tmp_path / "report.json").read_bytes()
        write_eval_artifacts(r, tmp_path, {"seed": 3})
        assert (tmp_path / "report.json").read_bytes() == first

    def test_creates_nested_out_dir(self, tmp_path):
        out = tmp_path / "a" / "b"
        paths = write_eval_artifacts(_report(), out, {})
        assert all(p.parent == out for p in paths)


class TestWriteCountArtifacts:
    def test_writes_three_files(self, tmp_path):
        doc = _count_report()
        paths = write_count_artifacts(doc, tmp_path, {"seed": 5}, 5)
        assert [p.name for p in paths] == ["count.json", "counting.svg",
                                           "provenance.json"]
        expected = json.dumps(doc, sort_keys=True, indent=2) + "\n"
        assert paths[0].read_text() == expected
        ET.fromstring(paths[1].read_text())
        assert json.loads(paths[2].read_text())["seed"] == 5

    def test_count_json_byte_identical_on_rewrite(self, tmp_path):
        doc = _count_report()
        write_count_artifacts(doc, tmp_path, {}, 1)
        first = (tmp_path / "count.json").read_bytes()
        write_count_artifacts(doc, tmp_path, {}, 1)
        assert (tmp_path / "count.json").read_bytes() == first
