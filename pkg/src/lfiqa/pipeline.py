"""Per-light-field feature extraction.

One light field yields four 59-value orientation vectors: for each stack
family the three CIELAB channels are stacked, decomposed, and summarized
by the 38 spatial values plus the 21 angular values per stack, averaged
over the family's usable stacks. ``FEATURE_COLUMNS`` documents the fixed
column layout consumed by the regression stage and by ablation column
selection.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from .colorspace import srgb_to_lab_array
from .lfio import LightField
from .pcsc import PCSC_SIZE, pcsc_features
from .tavi import CHANNEL_DYNAMIC_RANGES, TAVI_SIZE, tavi_features
from .tucker import first_principal_component
from .viewstack import ORIENTATIONS, build_stacks, filter_usable

log = logging.getLogger(__name__)

CHANNELS = ("L", "a", "b")
FEATURE_SIZE = PCSC_SIZE + TAVI_SIZE  # 59
DEFAULT_MIN_STACK_LEN = 3


def _feature_columns():
    cols = []
    for ch in CHANNELS:
        for name in ("aggd_alpha", "aggd_sigma_left", "aggd_sigma_right", "aggd_eta"):
            cols.append({"channel": ch, "group": "pcsc", "subgroup": "aggd", "name": name})
        for name in (
            "dct_entropy_whole",
            "dct_entropy_band_low",
            "dct_entropy_band_mid",
            "dct_entropy_band_high",
            "dct_entropy_sector_1",
            "dct_entropy_sector_2",
            "dct_entropy_sector_3",
        ):
            cols.append({"channel": ch, "group": "pcsc", "subgroup": "dct", "name": name})
    for name in (
        "mggd_shape",
        "mggd_scale",
        "mggd_scatter_L_a",
        "mggd_scatter_L_b",
        "mggd_scatter_a_b",
    ):
        cols.append({"channel": "Lab", "group": "pcsc", "subgroup": "mggd", "name": name})
    for ch in CHANNELS:
        for name in ("quad_f1", "quad_f2", "quad_f3"):
            cols.append({"channel": ch, "group": "tavi", "subgroup": "quad", "name": name})
        for name in ("cooc_contrast", "cooc_asm", "cooc_entropy", "cooc_idm"):
            cols.append({"channel": ch, "group": "tavi", "subgroup": "cooc", "name": name})
    for i, col in enumerate(cols):
        col["column"] = f"f{i + 1:03d}"
    return tuple(cols)


FEATURE_COLUMNS = _feature_columns()
assert len(FEATURE_COLUMNS) == FEATURE_SIZE


@dataclass(frozen=True)
class OrientationFeatures:
    """Per-orientation 59-value vectors; ``None`` marks an orientation
    with no usable stacks rather than silently zero-filling it."""

    f0: np.ndarray | None
    f45: np.ndarray | None
    f90: np.ndarray | None
    f135: np.ndarray | None

    def by_orientation(self):
        return dict(zip(ORIENTATIONS, (self.f0, self.f45, self.f90, self.f135)))


def stack_features(stacks, components=None) -> np.ndarray:
    """59-value vector for one aligned (L, a, b) stack triple."""
    if components is None:
        components = [first_principal_component(st) for st in stacks]
    ranges = [CHANNEL_DYNAMIC_RANGES[ch] for ch in CHANNELS]
    spatial = pcsc_features(components)
    angular = tavi_features(stacks, components, ranges)
    return np.concatenate([spatial, angular])


def extract_orientation_features(
    lf: LightField, min_stack_len=DEFAULT_MIN_STACK_LEN
) -> OrientationFeatures:
    """Extract the four orientation vectors of one light field."""
    start = time.perf_counter()
    lab = srgb_to_lab_array(lf.views)  # (S, T, X, Y, 3)
    grids = [lab[..., c] for c in range(3)]
    per_orientation = {}
    for orientation in ORIENTATIONS:
        families = [
            filter_usable(build_stacks(grid, orientation, channel=ch), min_stack_len)
            for grid, ch in zip(grids, CHANNELS)
        ]
        counts = {len(f) for f in families}
        assert len(counts) == 1, "channel stack families must align"
        if not families[0]:
            log.warning("orientation %d has no stacks of length >= %d", orientation, min_stack_len)
            per_orientation[orientation] = None
            continue
        vectors = [stack_features(triple) for triple in zip(*families)]
        vector = np.mean(vectors, axis=0)
        if not np.all(np.isfinite(vector)):
            raise ValueError(f"non-finite features for orientation {orientation}")
        per_orientation[orientation] = vector
    log.debug("feature extraction took %.2fs", time.perf_counter() - start)
    return OrientationFeatures(
        f0=per_orientation[0],
        f45=per_orientation[45],
        f90=per_orientation[90],
        f135=per_orientation[135],
    )


def select_columns(channels=None, features=None, columns=FEATURE_COLUMNS):
    """Indices of feature columns matching a channel/group subset.

    ``channels`` is a subset of {"L", "a", "b"}; joint Lab columns are
    kept only when all three channels are selected. ``features`` is a
    subset of {"pcsc", "tavi"}.
    """
    channels = set(channels) if channels else set(CHANNELS)
    features = set(features) if features else {"pcsc", "tavi"}
    unknown = channels - set(CHANNELS)
    if unknown:
        raise ValueError(f"unknown channels {sorted(unknown)}")
    unknown = features - {"pcsc", "tavi"}
    if unknown:
        raise ValueError(f"unknown feature groups {sorted(unknown)}")
    indices = []
    for i, col in enumerate(columns):
        if col["group"] not in features:
            continue
        if col["channel"] == "Lab":
            if channels == set(CHANNELS):
                indices.append(i)
        elif col["channel"] in channels:
            indices.append(i)
    return indices
