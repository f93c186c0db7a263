import json

import cv2
import numpy as np
import pytest

from lfiqa.lfio import (
    LightField,
    LightFieldError,
    ManifestEntry,
    ManifestError,
    load_lightfield,
    load_manifest,
    save_manifest,
    write_lightfield,
)


def _random_lightfield(rng, ns=3, nt=3, nx=8, ny=8):
    return LightField(views=rng.random((ns, nt, nx, ny, 3)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


class TestLightFieldType:
    def test_clamps_and_freezes(self):
        views = np.linspace(-0.5, 1.5, 2 * 2 * 4 * 4 * 3).reshape(2, 2, 4, 4, 3)
        lf = LightField(views=views)
        assert lf.views.min() >= 0.0 and lf.views.max() <= 1.0
        with pytest.raises(ValueError):
            lf.views[0, 0, 0, 0, 0] = 0.5

    def test_sizes(self, rng):
        lf = _random_lightfield(rng, ns=2, nt=5, nx=6, ny=7)
        assert lf.angular_size == (2, 5)
        assert lf.spatial_size == (6, 7)

    def test_rejects_bad_shape(self):
        with pytest.raises(LightFieldError):
            LightField(views=np.zeros((2, 2, 4, 4)))


class TestRoundTrip:
    def test_8bit_round_trip_is_exact(self, rng, tmp_path):
        lf = _random_lightfield(rng)
        quantized = LightField(views=np.rint(lf.views * 255) / 255)
        write_lightfield(quantized, tmp_path / "lf")
        loaded = load_lightfield(tmp_path / "lf")
        np.testing.assert_array_equal(loaded.views, quantized.views)

    def test_16bit_round_trip_is_exact(self, rng, tmp_path):
        lf = _random_lightfield(rng, ns=2, nt=2)
        quantized = LightField(views=np.rint(lf.views * 65535) / 65535)
        write_lightfield(quantized, tmp_path / "lf", bit_depth=16)
        loaded = load_lightfield(tmp_path / "lf")
        np.testing.assert_array_equal(loaded.views, quantized.views)

    def test_full_white_maps_to_one(self, tmp_path):
        lf = LightField(views=np.ones((1, 1, 4, 4, 3)))
        write_lightfield(lf, tmp_path / "lf")
        loaded = load_lightfield(tmp_path / "lf")
        assert np.all(loaded.views == 1.0)

    def test_filename_indices_place_views(self, rng, tmp_path):
        lf = _random_lightfield(rng, ns=2, nt=3)
        write_lightfield(lf, tmp_path / "lf")
        loaded = load_lightfield(tmp_path / "lf")
        # v_2_1.png must land at 0-based (1, 0)
        img = cv2.imread(str(tmp_path / "lf" / "v_2_1.png"), cv2.IMREAD_UNCHANGED)
        np.testing.assert_array_equal(loaded.views[1, 0], img[:, :, ::-1] / 255.0)


class TestLoadErrors:
    def test_missing_view_names_coordinates(self, rng, tmp_path):
        lf = _random_lightfield(rng)
        write_lightfield(lf, tmp_path / "lf")
        (tmp_path / "lf" / "v_3_2.png").unlink()
        with pytest.raises(LightFieldError, match=r"\(3,2\)"):
            load_lightfield(tmp_path / "lf")

    def test_expected_grid_detects_truncation(self, rng, tmp_path):
        lf = _random_lightfield(rng, ns=2, nt=2)
        write_lightfield(lf, tmp_path / "lf")
        with pytest.raises(LightFieldError, match=r"\(3,1\)"):
            load_lightfield(tmp_path / "lf", expected_grid=(3, 2))

    def test_inconsistent_sizes(self, rng, tmp_path):
        lf = _random_lightfield(rng, ns=1, nt=2)
        write_lightfield(lf, tmp_path / "lf")
        cv2.imwrite(str(tmp_path / "lf" / "v_1_2.png"), np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(LightFieldError, match="size"):
            load_lightfield(tmp_path / "lf")

    def test_empty_directory(self, tmp_path):
        (tmp_path / "lf").mkdir()
        with pytest.raises(LightFieldError):
            load_lightfield(tmp_path / "lf")


class TestManifest:
    def _write(self, tmp_path, entries):
        payload = {"version": 1, "entries": entries}
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(payload))
        return path

    def test_loads_valid_manifest(self, rng, tmp_path):
        for name in ("a", "b"):
            write_lightfield(_random_lightfield(rng, ns=1, nt=1), tmp_path / name)
        path = self._write(
            tmp_path,
            [
                {"id": "lf_a", "path": "a", "scene": "s1", "label": 4.5},
                {"id": "lf_b", "path": "b", "scene": "s2"},
            ],
        )
        manifest = load_manifest(path)
        assert len(manifest) == 2
        assert manifest.entries[0].label == 4.5
        assert manifest.entries[1].label is None
        assert manifest.entries[0].path.is_dir()

    def test_duplicate_id_reported(self, rng, tmp_path):
        write_lightfield(_random_lightfield(rng, ns=1, nt=1), tmp_path / "a")
        path = self._write(
            tmp_path,
            [
                {"id": "lf01", "path": "a", "scene": "s1"},
                {"id": "lf01", "path": "a", "scene": "s2"},
            ],
        )
        with pytest.raises(ManifestError, match="lf01"):
            load_manifest(path)

    def test_missing_directory_reported(self, tmp_path):
        path = self._write(tmp_path, [{"id": "ghost", "path": "nowhere", "scene": "s"}])
        with pytest.raises(ManifestError, match="ghost"):
            load_manifest(path)

    def test_empty_scene_rejected(self, rng, tmp_path):
        write_lightfield(_random_lightfield(rng, ns=1, nt=1), tmp_path / "a")
        path = self._write(tmp_path, [{"id": "x", "path": "a", "scene": ""}])
        with pytest.raises(ManifestError, match="scene"):
            load_manifest(path)

    def test_parse_failure(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        with pytest.raises(ManifestError, match="parse"):
            load_manifest(path)

    def test_save_load_round_trip(self, rng, tmp_path):
        write_lightfield(_random_lightfield(rng, ns=1, nt=1), tmp_path / "a")
        entries = [ManifestEntry(id="x", path=tmp_path / "a", scene="s", label=2.0)]
        path = save_manifest(tmp_path / "manifest.json", entries)
        manifest = load_manifest(path)
        assert manifest.entries[0].id == "x"
        assert manifest.entries[0].label == 2.0
