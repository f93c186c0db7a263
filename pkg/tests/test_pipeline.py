import numpy as np
import pytest

from lfiqa.pipeline import (
    FEATURE_COLUMNS,
    FEATURE_SIZE,
    extract_orientation_features,
    select_columns,
    stack_features,
)
from lfiqa.synth import SynthSpec, generate
from lfiqa.tucker import first_principal_component
from lfiqa.viewstack import ViewStack


@pytest.fixture(scope="module")
def small_field():
    return generate(SynthSpec(seed=5, angular_size=(5, 5), spatial_size=(32, 32), disparity=0.5))


class TestFeatureColumns:
    def test_count_and_names_unique(self):
        assert len(FEATURE_COLUMNS) == FEATURE_SIZE == 59
        names = [c["column"] for c in FEATURE_COLUMNS]
        assert names == [f"f{i + 1:03d}" for i in range(59)]

    def test_group_sizes(self):
        pcsc = [c for c in FEATURE_COLUMNS if c["group"] == "pcsc"]
        tavi = [c for c in FEATURE_COLUMNS if c["group"] == "tavi"]
        assert len(pcsc) == 38 and len(tavi) == 21

    def test_channel_sizes(self):
        per_channel = {ch: 0 for ch in ("L", "a", "b", "Lab")}
        for c in FEATURE_COLUMNS:
            per_channel[c["channel"]] += 1
        assert per_channel == {"L": 18, "a": 18, "b": 18, "Lab": 5}


class TestSelectColumns:
    def test_defaults_select_everything(self):
        assert select_columns() == list(range(59))

    def test_feature_group_subsets(self):
        assert len(select_columns(features=["pcsc"])) == 38
        assert len(select_columns(features=["tavi"])) == 21

    def test_single_channel_drops_joint_block(self):
        idx = select_columns(channels=["L"])
        assert len(idx) == 18
        assert all(FEATURE_COLUMNS[i]["channel"] == "L" for i in idx)

    def test_all_channels_keep_joint_block(self):
        idx = select_columns(channels=["L", "a", "b"])
        assert len(idx) == 59

    def test_combined_selection(self):
        idx = select_columns(channels=["a"], features=["tavi"])
        assert len(idx) == 7

    def test_unknown_names_rejected(self):
        with pytest.raises(ValueError):
            select_columns(channels=["chroma"])
        with pytest.raises(ValueError):
            select_columns(features=["wavelet"])


class TestStackFeatures:
    def test_layout(self):
        rng = np.random.default_rng(0)
        stacks = [
            ViewStack(data=rng.random((16, 16, 4)), orientation=0, origin=(0, 0), channel=ch)
            for ch in ("L", "a", "b")
        ]
        feats = stack_features(stacks)
        assert feats.shape == (59,)
        assert np.all(np.isfinite(feats))

    def test_accepts_precomputed_components(self):
        rng = np.random.default_rng(1)
        stacks = [
            ViewStack(data=rng.random((16, 16, 4)), orientation=0, origin=(0, 0))
            for _ in range(3)
        ]
        pcs = [first_principal_component(st) for st in stacks]
        np.testing.assert_array_equal(stack_features(stacks), stack_features(stacks, pcs))


class TestExtract:
    def test_all_orientations_present(self, small_field):
        of = extract_orientation_features(small_field)
        for vec in (of.f0, of.f45, of.f90, of.f135):
            assert vec is not None
            assert vec.shape == (59,)
            assert np.all(np.isfinite(vec))

    def test_by_orientation_mapping(self, small_field):
        of = extract_orientation_features(small_field)
        mapping = of.by_orientation()
        assert set(mapping) == {0, 45, 90, 135}
        np.testing.assert_array_equal(mapping[0], of.f0)

    def test_deterministic(self, small_field):
        a = extract_orientation_features(small_field)
        b = extract_orientation_features(small_field)
        for va, vb in zip(
            (a.f0, a.f45, a.f90, a.f135), (b.f0, b.f45, b.f90, b.f135)
        ):
            np.testing.assert_array_equal(va, vb)

    def test_min_stack_len_can_empty_diagonals(self):
        # a 2x2 grid has diagonal chains of length <= 2 only
        lf = generate(SynthSpec(seed=6, angular_size=(2, 2), spatial_size=(32, 32), disparity=0.5))
        of = extract_orientation_features(lf, min_stack_len=3)
        assert of.f45 is None and of.f135 is None
        assert of.f0 is None and of.f90 is None  # rows/columns have 2 views

    def test_row_only_grid(self):
        lf = generate(SynthSpec(seed=7, angular_size=(1, 5), spatial_size=(32, 32), disparity=0.5))
        of = extract_orientation_features(lf)
        assert of.f0 is not None
        assert of.f45 is None and of.f90 is None and of.f135 is None
