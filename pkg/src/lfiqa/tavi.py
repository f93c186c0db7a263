"""Angular-consistency features of a view stack.

Each view is compared against the stack's first angular principal
component with single-scale SSIM, giving a similarity curve over the
angular coordinate. A consistent stack produces a smooth curve; view
substitution and interpolation artifacts make it ragged. The curve is
summarized by a quadratic fit over normalized positions plus
co-occurrence texture descriptors of its quantized level transitions,
7 values per channel (21 total).
"""

from dataclasses import dataclass

import numpy as np
import scipy.ndimage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
COOC_LEVELS = 8

# nominal CIELAB dynamic ranges used for the SSIM constants; fixed so the
# similarity values are comparable across images and databases
CHANNEL_DYNAMIC_RANGES = {"L": 100.0, "a": 255.0, "b": 255.0}

TAVI_SIZE = 21


@dataclass(frozen=True)
class SsCurve:
    """Per-view similarity values and normalized angular positions."""

    values: np.ndarray
    positions: np.ndarray

    @property
    def length(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class QuadFit:
    f1: float
    f2: float
    f3: float
    residual_rms: float


@dataclass(frozen=True)
class CoocFeatures:
    contrast: float
    asm: float
    entropy: float
    idm: float


def _ssim_kernel():
    ax = np.arange(SSIM_WINDOW, dtype=float) - (SSIM_WINDOW - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


_SSIM_KERNEL = _ssim_kernel()


def _windowed_mean(img):
    out = scipy.ndimage.correlate1d(img, _SSIM_KERNEL, axis=0, mode="reflect")
    out = scipy.ndimage.correlate1d(out, _SSIM_KERNEL, axis=1, mode="reflect")
    m = SSIM_WINDOW // 2
    return out[m:-m, m:-m]


def ssim(a, b, dynamic_range) -> float:
    """Single-scale SSIM with the standard 11x11 Gaussian window.

    C1 = (0.01 R)^2 and C2 = (0.03 R)^2 for dynamic range R; the map is
    evaluated where the window fits entirely (no padded samples) and
    averaged.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be 2D and at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    if not dynamic_range > 0:
        raise ValueError("dynamic_range must be positive")
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    mu_a = _windowed_mean(a)
    mu_b = _windowed_mean(b)
    var_a = _windowed_mean(a * a) - mu_a * mu_a
    var_b = _windowed_mean(b * b) - mu_b * mu_b
    cov = _windowed_mean(a * b) - mu_a * mu_b
    ssim_map = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())


def ss_curve(stack, pc, dynamic_range) -> SsCurve:
    """Similarity of every view in a stack against its principal component."""
    data = np.asarray(getattr(stack, "data", stack), dtype=float)
    pc = np.asarray(pc, dtype=float)
    if data.ndim != 3:
        raise ValueError(f"expected an (X, Y, V) stack, got ndim={data.ndim}")
    if pc.shape != data.shape[:2]:
        raise ValueError(f"component size {pc.shape} does not match views {data.shape[:2]}")
    nv = data.shape[2]
    values = np.array([ssim(data[:, :, i], pc, dynamic_range) for i in range(nv)])
    positions = np.arange(nv) / (nv - 1) if nv > 1 else np.zeros(1)
    return SsCurve(values=values, positions=positions)


def fit_quadratic(curve: SsCurve) -> QuadFit:
    """Least-squares quadratic over normalized positions (needs >= 3 views)."""
    if curve.length < 3:
        raise ValueError(f"quadratic fit needs at least 3 points, got {curve.length}")
    p = curve.positions
    design = np.column_stack([p * p, p, np.ones_like(p)])
    coef = np.linalg.solve(design.T @ design, design.T @ curve.values)
    resid = design @ coef - curve.values
    return QuadFit(
        f1=float(coef[0]),
        f2=float(coef[1]),
        f3=float(coef[2]),
        residual_rms=float(np.sqrt(np.mean(resid * resid))),
    )


def cooc_features(curve: SsCurve, levels=COOC_LEVELS) -> CoocFeatures:
    """Co-occurrence descriptors of consecutive quantized curve values.

    Values are clamped to [0, 1] and quantized to ``levels`` bins over
    that fixed range; the matrix of consecutive (i, i+1) pairs is
    symmetrized and normalized, then reduced to contrast, angular second
    moment, entropy (natural log) and inverse difference moment.
    """
    if curve.length < 2:
        raise ValueError(f"co-occurrence needs at least 2 points, got {curve.length}")
    v = np.clip(curve.values, 0.0, 1.0)
    bins = np.minimum((v * levels).astype(int), levels - 1)
    mat = np.zeros((levels, levels))
    np.add.at(mat, (bins[:-1], bins[1:]), 1.0)
    mat = (mat + mat.T) / 2.0
    mat /= mat.sum()
    lo, hi = np.indices((levels, levels))
    d2 = (lo - hi).astype(float) ** 2
    nz = mat > 0
    return CoocFeatures(
        contrast=float(np.sum(d2 * mat)),
        asm=float(np.sum(mat * mat)),
        entropy=float(-np.sum(mat[nz] * np.log(mat[nz]))),
        idm=float(np.sum(mat / (1.0 + d2))),
    )


def tavi_features(stacks, pcs, dynamic_ranges) -> np.ndarray:
    """21-value angular block for one stack's three channels.

    Layout per channel: quadratic coefficients (f1, f2, f3), then
    contrast, ASM, entropy and IDM of the similarity curve.
    """
    if not (len(stacks) == len(pcs) == len(dynamic_ranges) == 3):
        raise ValueError("expected aligned stacks, components and ranges for 3 channels")
    feats = []
    for stack, pc, rng in zip(stacks, pcs, dynamic_ranges):
        curve = ss_curve(stack, pc, rng)
        quad = fit_quadratic(curve)
        cooc = cooc_features(curve)
        feats.extend([quad.f1, quad.f2, quad.f3, cooc.contrast, cooc.asm, cooc.entropy, cooc.idm])
    out = np.asarray(feats, dtype=float)
    assert out.size == TAVI_SIZE
    return out
