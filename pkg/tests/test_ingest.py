"""CSV + sidecar IO, detrending, capacitive-channel normalization."""

import json
import os

import numpy as np
import pytest

from capmotion import PreprocessConfig, load_session, save_session
from capmotion.errors import DataError, DomainError, ParseError
from capmotion.ingest import atomic_write_text, detrend, normalize_session_hbc

from conftest import build_session


def _awkward_session(n=25):
    """Floats that stress shortest-repr round-tripping."""
    r = np.random.default_rng(99)
    cap = r.normal(scale=123.456, size=n)
    cap[3] = 0.1
    cap[4] = 1.0 / 3.0
    cap[5] = -2.5e-7
    acc = r.normal(size=(n, 3))
    gyro = r.normal(scale=30.0, size=(n, 3))
    labels = np.array(["DISCARD"] * 5 + ["LegFrontLift"] * 10 + ["StandardSquat"] * 10)
    return build_session(labels, cap=cap, acc=acc, gyro=gyro,
                         extras={"note": "x", "nested": {"k": [1, 2]}})


class TestRoundTrip:
    def test_arrays_and_metadata_survive_exactly(self, tmp_path):
        s = _awkward_session()
        p = tmp_path / "sess.csv"
        save_session(s, p)
        back = load_session(p)
        np.testing.assert_array_equal(back.t, s.t)
        np.testing.assert_array_equal(back.acc, s.acc)
        np.testing.assert_array_equal(back.gyro, s.gyro)
        np.testing.assert_array_equal(back.cap_uv, s.cap_uv)
        assert list(back.labels) == list(s.labels)
        assert back.id == s.id
        assert back.user_id == s.user_id
        assert back.sample_rate_hz == s.sample_rate_hz
        assert back.label_set_id == s.label_set_id
        assert back.sensor_position == s.sensor_position
        assert back.extras == s.extras

    def test_save_load_save_is_byte_stable(self, tmp_path):
        s = _awkward_session()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_session(s, p1)
        save_session(load_session(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
        side1 = json.loads((tmp_path / "a.json").read_text())
        side2 = json.loads((tmp_path / "b.json").read_text())
        assert side1 == side2

    def test_sidecar_is_versioned_json(self, tmp_path):
        save_session(_awkward_session(), tmp_path / "s.csv")
        meta = json.loads((tmp_path / "s.json").read_text())
        assert meta["format_version"] == 1
        assert meta["label_set_id"] == "LEG7"
        assert meta["extras"]["nested"]["k"] == [1, 2]

    def test_refuses_to_save_invalid_session(self, tmp_path):
        s = build_session(["LegFrontLift"] * 5)
        object.__setattr__(s, "labels", np.array(["Jogging"] * 5))
        with pytest.raises(DataError, match="refusing to save"):
            save_session(s, tmp_path / "bad.csv")
        assert not (tmp_path / "bad.csv").exists()


class TestLoadErrors:
    @pytest.fixture
    def saved(self, tmp_path):
        p = tmp_path / "s.csv"
        save_session(_awkward_session(), p)
        return p

    def test_missing_csv(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_session(tmp_path / "nope.csv")

    def test_missing_sidecar(self, saved):
        os.unlink(saved.with_suffix(".json"))
        with pytest.raises(DataError, match="sidecar"):
            load_session(saved)

    def test_sidecar_bad_json(self, saved):
        saved.with_suffix(".json").write_text("{not json")
        with pytest.raises(ParseError, match="JSON"):
            load_session(saved)

    def test_sidecar_missing_key(self, saved):
        meta = json.loads(saved.with_suffix(".json").read_text())
        del meta["sample_rate_hz"]
        saved.with_suffix(".json").write_text(json.dumps(meta))
        with pytest.raises(DataError, match="sample_rate_hz"):
            load_session(saved)

    def test_empty_file_reports_line_1(self, saved):
        saved.write_text("")
        with pytest.raises(ParseError) as ei:
            load_session(saved)
        assert ei.value.line == 1

    def test_bad_header_reports_line_1(self, saved):
        lines = saved.read_text().splitlines()
        lines[0] = "time,ax,ay,az,gx,gy,gz,cap,label"
        saved.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as ei:
            load_session(saved)
        assert ei.value.line == 1

    def test_short_row_reports_its_line(self, saved):
        lines = saved.read_text().splitlines()
        lines[7] = "1,2,3"
        saved.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as ei:
            load_session(saved)
        assert ei.value.line == 8

    def test_non_numeric_value_reports_its_line(self, saved):
        lines = saved.read_text().splitlines()
        parts = lines[4].split(",")
        parts[7] = "oops"
        lines[4] = ",".join(parts)
        saved.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as ei:
            load_session(saved)
        assert ei.value.line == 5

    def test_blank_lines_are_tolerated(self, saved):
        lines = saved.read_text().splitlines()
        lines.insert(3, "")
        saved.write_text("\n".join(lines) + "\n")
        s = load_session(saved)
        assert s.n_frames == 25

    def test_label_outside_set_is_rejected_on_load(self, saved):
        lines = saved.read_text().splitlines()
        parts = lines[2].split(",")
        parts[8] = "Jogging"
        lines[2] = ",".join(parts)
        saved.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match="invalid session"):
            load_session(saved)


class TestDetrend:
    def test_linear_removes_exact_ramp(self):
        x = 3.25 * np.arange(50) - 7.0
        np.testing.assert_allclose(detrend(x, "linear"), 0.0, atol=1e-9)

    def test_mean_centers(self, rng):
        x = rng.normal(size=64) + 10.0
        out = detrend(x, "mean")
        assert abs(out.mean()) < 1e-12
        np.testing.assert_allclose(out, x - x.mean())

    def test_none_is_identity_copy(self, rng):
        x = rng.normal(size=10)
        out = detrend(x, "none")
        np.testing.assert_array_equal(out, x)
        assert out is not x

    def test_idempotent(self, rng):
        x = rng.normal(size=128).cumsum()
        once = detrend(x, "linear")
        np.testing.assert_allclose(detrend(once, "linear"), once, atol=1e-9)

    def test_single_sample_linear(self):
        np.testing.assert_array_equal(detrend(np.array([5.0]), "linear"), [0.0])

    def test_bad_mode(self):
        with pytest.raises(DomainError):
            detrend(np.zeros(4), "quadratic")

    def test_two_dimensional_rejected(self):
        with pytest.raises(DomainError):
            detrend(np.zeros((4, 2)), "mean")


class TestNormalizeHbc:
    def _session(self):
        cap = np.concatenate([np.linspace(-40.0, 60.0, 20), np.full(10, 300.0)])
        labels = np.array(["StandardSquat"] * 20 + ["LegFrontLift"] * 10)
        return build_session(labels, cap=cap)

    def test_anchor_span_maps_to_configured_range(self):
        cfg = PreprocessConfig(hbc_anchor_class="StandardSquat",
                               hbc_range_uv=(-500.0, 500.0))
        out = normalize_session_hbc(self._session(), cfg)
        anchor = out.cap_uv[:20]
        assert anchor.min() == pytest.approx(-500.0)
        assert anchor.max() == pytest.approx(500.0)
        # affine: out = (cap - amin)*scale + lo with amin=-40, scale=1000/100
        expected = (300.0 - (-40.0)) * 10.0 + (-500.0)
        np.testing.assert_allclose(out.cap_uv[20:], expected)

    def test_idempotent(self):
        cfg = PreprocessConfig(hbc_anchor_class="StandardSquat")
        once = normalize_session_hbc(self._session(), cfg)
        twice = normalize_session_hbc(once, cfg)
        np.testing.assert_allclose(twice.cap_uv, once.cap_uv, atol=1e-9)

    def test_other_channels_untouched(self):
        s = self._session()
        out = normalize_session_hbc(
            s, PreprocessConfig(hbc_anchor_class="StandardSquat"))
        np.testing.assert_array_equal(out.acc, s.acc)
        np.testing.assert_array_equal(out.labels, s.labels)

    def test_no_anchor_frames(self):
        cfg = PreprocessConfig(hbc_anchor_class="JumpSquat")
        with pytest.raises(DomainError, match="no frames"):
            normalize_session_hbc(self._session(), cfg)

    def test_constant_anchor(self):
        cfg = PreprocessConfig(hbc_anchor_class="LegFrontLift")
        with pytest.raises(DomainError, match="constant"):
            normalize_session_hbc(self._session(), cfg)

    def test_anchor_unset(self):
        with pytest.raises(DomainError):
            normalize_session_hbc(self._session(), PreprocessConfig())


class TestPreprocessConfig:
    @pytest.mark.parametrize("kw", [
        {"detrend_mode": "spline"},
        {"hbc_range_uv": (1.0, 1.0)},
        {"hbc_range_uv": (2.0, -2.0)},
        {"clip_quantiles": (0.5, 0.5)},
        {"clip_quantiles": (-0.1, 0.9)},
        {"clip_quantiles": (0.1, 1.1)},
    ])
    def test_invalid_configs_rejected(self, kw):
        with pytest.raises(DomainError):
            PreprocessConfig(**kw)


class TestAtomicWrite:
    def test_writes_content_and_leaves_no_temp_files(self, tmp_path):
        p = tmp_path / "out.txt"
        atomic_write_text(p, "hello\n")
        atomic_write_text(p, "world\n")  # overwrite in place
        assert p.read_text() == "world\n"
        assert sorted(f.name for f in tmp_path.iterdir()) == ["out.txt"]
