"""sRGB to CIELAB conversion (2-degree observer, D65 illuminant).

The pipeline works on one lightness channel (L*, 0..100 for in-gamut
input) and two chrominance channels (a*: green-red axis, b*: blue-yellow
axis), all kept at their native CIELAB scale.
"""

from dataclasses import dataclass

import numpy as np

# linear sRGB -> XYZ, D65 white (IEC 61966-2-1)
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class LabImage:
    """CIELAB channels of one image, each a 2D array of the source size."""

    L: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def channels(self):
        return self.L, self.a, self.b


def _srgb_to_linear(v):
    v = np.asarray(v, dtype=float)
    return np.where(v > 0.04045, ((v + 0.055) / 1.055) ** 2.4, v / 12.92)


def _linear_to_srgb(v):
    v = np.asarray(v, dtype=float)
    vc = np.maximum(v, 0.0)
    return np.where(vc > 0.0031308, 1.055 * vc ** (1.0 / 2.4) - 0.055, 12.92 * vc)


def _lab_f(t):
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3.0 * _DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(f):
    return np.where(f > _DELTA, f**3, 3.0 * _DELTA**2 * (f - 4.0 / 29.0))


def srgb_to_lab_array(rgb):
    """Convert an array with a trailing RGB axis (values in [0,1]) to Lab.

    Accepts any leading shape, e.g. (H, W, 3) or (S, T, H, W, 3), and
    returns the same shape with (L*, a*, b*) on the last axis.
    """
    rgb = np.asarray(rgb, dtype=float)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected a trailing RGB axis of size 3, got shape {rgb.shape}")
    xyz = _srgb_to_linear(rgb) @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE_D65)
    out = np.empty_like(xyz)
    out[..., 0] = 116.0 * f[..., 1] - 16.0
    out[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    out[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return out


def lab_to_srgb_array(lab):
    """Inverse of :func:`srgb_to_lab_array`; out-of-gamut values are clipped."""
    lab = np.asarray(lab, dtype=float)
    if lab.shape[-1] != 3:
        raise ValueError(f"expected a trailing Lab axis of size 3, got shape {lab.shape}")
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE_D65
    rgb = _linear_to_srgb(xyz @ _XYZ_TO_RGB.T)
    return np.clip(rgb, 0.0, 1.0)


def srgb_to_cielab(image) -> LabImage:
    """Convert one (H, W, 3) sRGB image with channel values in [0,1].

    Values outside [0,1] violate the contract; they are not clipped here.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 3 or image.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {image.shape}")
    lab = srgb_to_lab_array(image)
    return LabImage(L=lab[..., 0], a=lab[..., 1], b=lab[..., 2])
