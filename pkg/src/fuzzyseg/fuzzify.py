"""Gaussian softening of hard masks into fuzzy ground truth.

Two kernel shapes are supported:

``paper-eq1``
    ``exp(-(p^2 + q^2) / sigma^2) / (2 pi sigma^2)`` -- the exponent lacks the
    usual factor 2, so the analytic prefactor does not normalise it.
``standard``
    ``exp(-(p^2 + q^2) / (2 sigma^2)) / (2 pi sigma^2)``.

Either may be rescaled to sum to one over its truncated support, which keeps
fuzzy targets inside [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VARIANTS = ("paper-eq1", "standard")
NORMALIZATIONS = ("analytic", "sum-to-one")
PADDINGS = ("zero", "reflect")


@dataclass(frozen=True)
class KernelSpec:
    sigma_px: float
    truncation_factor: float = 3.0
    variant: str = "standard"
    normalization: str = "sum-to-one"

    def __post_init__(self):
        if not (math.isfinite(self.sigma_px) and self.sigma_px > 0):
            raise ValueError(f"sigma_px must be positive, got {self.sigma_px}")
        if not self.truncation_factor >= 1:
            raise ValueError(f"truncation_factor must be >= 1, got {self.truncation_factor}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def half_width(self) -> int:
        return max(1, math.ceil(self.truncation_factor * self.sigma_px))

    @property
    def _exp_denominator(self) -> float:
        s2 = self.sigma_px ** 2
        return s2 if self.variant == "paper-eq1" else 2.0 * s2


def gaussian_kernel_2d(spec: KernelSpec) -> np.ndarray:
    """Square kernel of side ``2 * half_width + 1`` evaluated on integer offsets."""
    h = spec.half_width
    p = np.arange(-h, h + 1, dtype=np.float64)
    r2 = p[:, None] ** 2 + p[None, :] ** 2
    k = np.exp(-r2 / spec._exp_denominator) / (2.0 * math.pi * spec.sigma_px ** 2)
    if spec.normalization == "sum-to-one":
        k /= k.sum()
    return k


def gaussian_kernel_1d(spec: KernelSpec) -> np.ndarray:
    """1D factor whose outer product with itself is :func:`gaussian_kernel_2d`."""
    h = spec.half_width
    p = np.arange(-h, h + 1, dtype=np.float64)
    k = np.exp(-p ** 2 / spec._exp_denominator) / (math.sqrt(2.0 * math.pi) * spec.sigma_px)
    if spec.normalization == "sum-to-one":
        k /= k.sum()
    return k


def _convolve_rows(padded: np.ndarray, taps: np.ndarray, out_len: int) -> np.ndarray:
    # Fixed tap order keeps results independent of any internal threading.
    out = taps[0] * padded[:, :out_len]
    for i in range(1, taps.size):
        out += taps[i] * padded[:, i:i + out_len]
    return out


def convolve_separable(raster: np.ndarray, k1d: np.ndarray, padding: str = "reflect") -> np.ndarray:
    """Convolve a 2D raster with ``outer(k1d, k1d)`` as two 1D passes.

    The output has the raster's shape.  ``reflect`` mirrors about the edge
    pixel without repeating it.
    """
    raster = np.asarray(raster, dtype=np.float64)
    k1d = np.asarray(k1d, dtype=np.float64)
    if raster.ndim != 2:
        raise ValueError(f"expected a 2D raster, got shape {raster.shape}")
    if k1d.ndim != 1 or k1d.size % 2 == 0:
        raise ValueError("kernel must be a 1D vector of odd length")
    if not np.all(np.isfinite(raster)):
        raise ValueError("raster contains non-finite values")
    if padding not in PADDINGS:
        raise ValueError(f"unknown padding {padding!r}")
    h = k1d.size // 2
    mode = "constant" if padding == "zero" else "reflect"
    # kernel is reversed so this is a true convolution even for asymmetric input
    taps = k1d[::-1]
    height, width = raster.shape
    padded = np.pad(raster.T, ((0, 0), (h, h)), mode=mode)
    tmp = _convolve_rows(padded, taps, height).T
    padded = np.pad(tmp, ((0, 0), (h, h)), mode=mode)
    return _convolve_rows(padded, taps, width)


def fuzzify_mask(mask: np.ndarray, spec: KernelSpec, padding: str = "reflect") -> np.ndarray:
    """Turn a binary mask into a fuzzy membership raster in [0, 1].

    A 3D ``(H, W, C)`` stack is softened channel by channel.
    """
    mask = np.asarray(mask)
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("fuzzify_mask expects a binary mask")
    k1d = gaussian_kernel_1d(spec)
    if mask.ndim == 3:
        out = np.stack([convolve_separable(mask[..., c], k1d, padding)
                        for c in range(mask.shape[-1])], axis=-1)
    else:
        out = convolve_separable(mask, k1d, padding)
    return np.clip(out, 0.0, 1.0)
