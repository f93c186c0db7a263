"""Light fields and dataset manifests on disk.

Canonical layout: one directory per light field holding one PNG per
sub-aperture view, named ``v_<s>_<t>.png`` with 1-based angular indices.
A dataset is described by a JSON manifest::

    {"version": 1, "entries": [
        {"id": "lf01", "path": "lf01", "label": 4.2, "scene": "kitchen"},
        ...
    ]}

Entry paths are resolved relative to the manifest's directory; ``label``
is optional (prediction-only entries), ``scene`` groups entries that share
content so evaluation splits can avoid leakage.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1

_VIEW_RE = re.compile(r"^v_(\d+)_(\d+)\.(\w+)$")


class ManifestError(ValueError):
    pass


class LightFieldError(ValueError):
    pass


@dataclass(frozen=True)
class LightField:
    """A 4D light field: ``views[s, t, x, y]`` is an RGB triple in [0,1]."""

    views: np.ndarray

    def __post_init__(self):
        views = np.asarray(self.views, dtype=float)
        if views.ndim != 5 or views.shape[-1] != 3:
            raise LightFieldError(
                f"views must have shape (S, T, X, Y, 3), got {views.shape}"
            )
        views = np.clip(views, 0.0, 1.0)
        views.setflags(write=False)
        object.__setattr__(self, "views", views)

    @property
    def angular_size(self):
        return self.views.shape[0], self.views.shape[1]

    @property
    def spatial_size(self):
        return self.views.shape[2], self.views.shape[3]


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: Path
    scene: str
    label: float | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    root: Path

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def load_manifest(path) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Raises :class:`ManifestError` naming the offending entry on duplicate
    ids, unresolvable paths, or schema violations.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot parse manifest {path}: {exc}") from exc
    if not isinstance(raw, dict) or raw.get("version") != MANIFEST_VERSION:
        raise ManifestError(
            f"manifest {path} must be an object with version={MANIFEST_VERSION}"
        )
    root = path.parent
    entries = []
    seen = set()
    for i, item in enumerate(raw.get("entries", [])):
        entry_id = item.get("id")
        if not entry_id or not isinstance(entry_id, str):
            raise ManifestError(f"entry #{i} has no usable id")
        if entry_id in seen:
            raise ManifestError(f"duplicate entry id {entry_id!r}")
        seen.add(entry_id)
        scene = item.get("scene")
        if not scene or not isinstance(scene, str):
            raise ManifestError(f"entry {entry_id!r} has an empty scene")
        if "path" not in item:
            raise ManifestError(f"entry {entry_id!r} has no path")
        entry_path = (root / item["path"]).resolve()
        if not entry_path.is_dir():
            raise ManifestError(f"entry {entry_id!r}: directory {entry_path} not found")
        label = item.get("label")
        if label is not None:
            try:
                label = float(label)
            except (TypeError, ValueError):
                raise ManifestError(f"entry {entry_id!r}: label {label!r} is not a number")
        entries.append(ManifestEntry(id=entry_id, path=entry_path, scene=scene, label=label))
    return DatasetManifest(entries=tuple(entries), root=root)


def save_manifest(path, entries) -> Path:
    """Write a manifest; entry paths are stored relative to its directory."""
    path = Path(path)
    items = []
    for e in entries:
        item = {"id": e.id, "path": str(Path(e.path).relative_to(path.parent)), "scene": e.scene}
        if e.label is not None:
            item["label"] = e.label
        items.append(item)
    path.write_text(json.dumps({"version": MANIFEST_VERSION, "entries": items}, indent=1))
    return path


def _scan_views(directory):
    found = {}
    for p in sorted(directory.iterdir()):
        m = _VIEW_RE.match(p.name)
        if m:
            found[(int(m.group(1)), int(m.group(2)))] = p
    return found


def load_lightfield(entry, expected_grid=None) -> LightField:
    """Load a light field from its view directory.

    ``entry`` is a manifest entry or a directory path. The angular grid is
    inferred from the largest indices present unless ``expected_grid``
    pins it. Integer samples are mapped to [0,1] by dividing by the dtype
    maximum (255 or 65535). The result is independent of directory
    listing order: views are read in (s, t) order.
    """
    directory = Path(getattr(entry, "path", entry))
    if not directory.is_dir():
        raise LightFieldError(f"{directory} is not a directory")
    found = _scan_views(directory)
    if not found:
        raise LightFieldError(f"no v_<s>_<t> view files in {directory}")
    if expected_grid is not None:
        grid_s, grid_t = expected_grid
    else:
        grid_s = max(s for s, _ in found)
        grid_t = max(t for _, t in found)
    views = None
    for s in range(1, grid_s + 1):
        for t in range(1, grid_t + 1):
            if (s, t) not in found:
                raise LightFieldError(f"missing view ({s},{t}) in {directory}")
            img = cv2.imread(str(found[(s, t)]), cv2.IMREAD_UNCHANGED)
            if img is None:
                raise LightFieldError(f"unreadable view ({s},{t}): {found[(s, t)]}")
            if img.ndim != 3 or img.shape[2] < 3:
                raise LightFieldError(
                    f"view ({s},{t}) in {directory} is not an RGB image"
                )
            rgb = img[:, :, 2::-1]  # BGR(A) -> RGB
            if rgb.dtype == np.uint8:
                data = rgb.astype(float) / 255.0
            elif rgb.dtype == np.uint16:
                data = rgb.astype(float) / 65535.0
            else:
                raise LightFieldError(
                    f"view ({s},{t}) has unsupported dtype {rgb.dtype}"
                )
            if views is None:
                views = np.empty((grid_s, grid_t) + data.shape, dtype=float)
            elif data.shape != views.shape[2:]:
                raise LightFieldError(
                    f"view ({s},{t}) size {data.shape[:2]} does not match "
                    f"{views.shape[2:4]} in {directory}"
                )
            views[s - 1, t - 1] = data
    return LightField(views=views)


def write_lightfield(lf: LightField, directory, bit_depth=8) -> Path:
    """Write a light field as the canonical per-view PNG layout."""
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    peak = 255 if bit_depth == 8 else 65535
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    grid_s, grid_t = lf.angular_size
    for s in range(grid_s):
        for t in range(grid_t):
            img = np.rint(lf.views[s, t] * peak).astype(dtype)
            ok = cv2.imwrite(str(directory / f"v_{s + 1}_{t + 1}.png"), img[:, :, ::-1])
            if not ok:
                raise LightFieldError(f"failed to write view ({s + 1},{t + 1}) in {directory}")
    return directory
