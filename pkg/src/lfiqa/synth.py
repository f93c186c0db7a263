"""Synthetic light fields with graded distortions.

Scenes are procedural multi-frequency textures rendered as a
fronto-parallel plane: every view samples the same continuous pattern
shifted by ``disparity`` pixels per angular step, so angular structure is
exact and reproducible from the seed. Distortions come in two spatial
kinds (Gaussian blur, uniform quantization), two angular kinds that
emulate view reconstruction from a sparse set of anchor columns
(nearest-anchor substitution and anchor blending, with anchor spacing
growing by severity) and a color-inconsistency kind (chroma rotation of
alternate views), each on a 1..5 severity scale.

``build_dataset`` materializes a labeled benchmark in the canonical
on-disk layout, labeling each item 6 - severity (pristine items get 6).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from .colorspace import lab_to_srgb_array, srgb_to_lab_array
from .lfio import LightField, ManifestEntry, save_manifest, write_lightfield

log = logging.getLogger(__name__)

DISTORTION_KINDS = ("blur", "quantize", "nn_view", "linear_view", "chroma_shift")
SEVERITIES = (1, 2, 3, 4, 5)

BLUR_SIGMAS = (0.5, 1.0, 1.5, 2.0, 2.5)
QUANT_LEVELS = (64, 32, 16, 8, 4)
# angular severities grow the anchor spacing of an emulated view
# reconstruction: views off the anchor lattice are rebuilt from the kept
# anchors, so both the rebuilt fraction and the anchor distance grow
ANCHOR_SPACINGS = (2, 3, 4, 6, 8)
CHROMA_ANGLES = (15.0, 30.0, 45.0, 60.0, 75.0)  # degrees of (a*, b*) rotation

TEXTURES = ("multifreq", "stripes")


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    angular_size: tuple[int, int] = (9, 9)
    spatial_size: tuple[int, int] = (64, 64)
    disparity: float = 1.0
    texture: str = "multifreq"

    def __post_init__(self):
        ns, nt = self.angular_size
        nx, ny = self.spatial_size
        if ns < 1 or nt < 1 or nx < 1 or ny < 1:
            raise ValueError("angular and spatial sizes must be positive")
        if self.disparity * max(ns, nt) >= min(nx, ny) / 4:
            raise ValueError(
                f"disparity {self.disparity} too large for {ns}x{nt} views "
                f"at {nx}x{ny}: content would drift out of frame"
            )
        if self.texture not in TEXTURES:
            raise ValueError(f"unknown texture {self.texture!r}, expected one of {TEXTURES}")


@dataclass(frozen=True)
class DistortionSpec:
    kind: str
    severity: int

    def __post_init__(self):
        if self.kind not in DISTORTION_KINDS:
            raise ValueError(f"unknown distortion {self.kind!r}")
        if self.severity not in SEVERITIES:
            raise ValueError(f"severity must be in {SEVERITIES}, got {self.severity}")


def _texture_components(rng, spec):
    if spec.texture == "multifreq":
        # stratified spectrum: log-spaced base frequencies with per-scene
        # jitter keep the spectral envelope comparable across scenes while
        # orientations and phases make each scene distinct
        count = 12
        freqs = np.geomspace(0.05, 0.35, count) * np.exp(rng.uniform(-0.12, 0.12, size=count))
        thetas = rng.uniform(0.0, np.pi, size=count)
    else:  # stripes: fine variation concentrated along rows. Row-wise view
        # stacks see nearly identical views, while views one row apart are
        # strongly decorrelated, so cross-row substitution is clearly
        # visible at any substitution rate.
        count = 8
        freqs = np.exp(rng.uniform(np.log(0.22), np.log(0.38), size=count))
        thetas = rng.uniform(-0.05, 0.05, size=count)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=count)
    amps = 1.0 / freqs**0.5
    # per-channel gains and wide phase offsets decorrelate the RGB
    # channels enough to give the texture strong spatial chroma
    gains = rng.uniform(0.3, 1.0, size=(count, 3))
    chroma_phases = rng.uniform(-2.2, 2.2, size=(count, 3))
    # keep every channel inside [0.05, 0.95] so quantization and chroma
    # rotations stay in gamut
    budget = (amps[:, None] * gains).sum(axis=0).max()
    amps *= 0.45 / budget
    return freqs, thetas, phases, amps, gains, chroma_phases


def generate(spec: SynthSpec) -> LightField:
    """Render the light field of one procedural scene, bitwise-reproducible."""
    rng = np.random.default_rng(spec.seed)
    freqs, thetas, phases, amps, gains, chroma_phases = _texture_components(rng, spec)
    ns, nt = spec.angular_size
    nx, ny = spec.spatial_size
    sc, tc = (ns - 1) / 2.0, (nt - 1) / 2.0
    cos_cp = np.cos(chroma_phases)
    sin_cp = np.sin(chroma_phases)
    views = np.full((ns, nt, nx, ny, 3), 0.5)
    xs = np.arange(nx, dtype=float)
    ys = np.arange(ny, dtype=float)
    for s in range(ns):
        for t in range(nt):
            u = xs + spec.disparity * (s - sc)
            v = ys + spec.disparity * (t - tc)
            for k in range(freqs.size):
                proj = np.cos(thetas[k]) * u[:, None] + np.sin(thetas[k]) * v[None, :]
                arg = 2.0 * np.pi * freqs[k] * proj + phases[k]
                sin_a, cos_a = np.sin(arg), np.cos(arg)
                for c in range(3):
                    # sin(arg + chroma_phase) expanded to reuse sin/cos
                    views[s, t, :, :, c] += (
                        amps[k] * gains[k, c] * (sin_a * cos_cp[k, c] + cos_a * sin_cp[k, c])
                    )
    return LightField(views=views)


def _nearest_anchor(x, spacing, size):
    # nearest multiple of ``spacing`` below ``size``; ties toward zero
    lo = spacing * (x // spacing)
    hi = lo + spacing
    if hi >= size or x - lo <= hi - x:
        return lo
    return hi


def distort(lf: LightField, spec: DistortionSpec) -> LightField:
    """Apply one graded distortion; deterministic given (lf, spec)."""
    views = np.array(lf.views)
    level = spec.severity - 1
    if spec.kind == "blur":
        sigma = BLUR_SIGMAS[level]
        views = scipy.ndimage.gaussian_filter(views, sigma=(0, 0, sigma, sigma, 0), mode="reflect")
    elif spec.kind == "quantize":
        steps = QUANT_LEVELS[level] - 1
        views = np.rint(views * steps) / steps
    elif spec.kind == "nn_view":
        # sparse capture on a 2D anchor lattice, rebuilt by nearest-anchor
        # copying in both angular axes
        ns, nt = lf.angular_size
        spacing = ANCHOR_SPACINGS[level]
        original = views.copy()
        for s in range(ns):
            a_s = _nearest_anchor(s, spacing, ns)
            for t in range(nt):
                a_t = _nearest_anchor(t, spacing, nt)
                if (a_s, a_t) != (s, t):
                    views[s, t] = original[a_s, a_t]
    elif spec.kind == "linear_view":
        # horizontal reconstruction: non-anchor columns become a ghosted
        # blend of the flanking anchor columns (single one past the last)
        ns, nt = lf.angular_size
        spacing = ANCHOR_SPACINGS[level]
        original = views.copy()
        for t in range(nt):
            lo = spacing * (t // spacing)
            hi = lo + spacing if lo + spacing < nt else lo
            if t != lo:
                views[:, t] = (original[:, lo] + original[:, hi]) / 2.0
    elif spec.kind == "chroma_shift":
        angle = np.deg2rad(CHROMA_ANGLES[level])
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        ns, nt = lf.angular_size
        flat = views.reshape(ns * nt, *views.shape[2:])
        for m in range(1, flat.shape[0], 2):
            lab = srgb_to_lab_array(flat[m])
            lab[..., 1:] = lab[..., 1:] @ rot.T
            flat[m] = lab_to_srgb_array(lab)
        views = flat.reshape(views.shape)
    return LightField(views=views)


def build_dataset(
    root,
    n_scenes=12,
    angular_size=(9, 9),
    spatial_size=(64, 64),
    disparity=1.0,
    kinds=DISTORTION_KINDS,
    severities=SEVERITIES,
    include_pristine=True,
    base_seed=0,
):
    """Write a labeled synthetic benchmark and return its manifest path."""
    from pathlib import Path

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n_scenes):
        scene = f"scene{i:02d}"
        spec = SynthSpec(
            seed=base_seed + i,
            angular_size=angular_size,
            spatial_size=spatial_size,
            disparity=disparity,
        )
        pristine = generate(spec)
        variants = []
        if include_pristine:
            variants.append((f"{scene}_pristine", pristine, 6.0))
        for kind in kinds:
            for severity in severities:
                distorted = distort(pristine, DistortionSpec(kind=kind, severity=severity))
                variants.append((f"{scene}_{kind}_s{severity}", distorted, float(6 - severity)))
        for item_id, field, label in variants:
            directory = write_lightfield(field, root / item_id)
            entries.append(ManifestEntry(id=item_id, path=directory, scene=scene, label=label))
        log.info("wrote scene %s (%d items)", scene, len(variants))
    return save_manifest(root / "manifest.json", entries)
