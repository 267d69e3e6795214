"""Normalized Laplacian pyramid distance."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .image import ImageTooSmall, as_luma, check_pair

NLPD_LEVELS = 6
NLPD_EPS = 0.1
_TAPS = np.array([0.05, 0.25, 0.4, 0.25, 0.05])
PYRAMID_KERNEL = np.outer(_TAPS, _TAPS)
AMPLITUDE_KERNEL = np.full((3, 3), 1.0 / 9.0)


def _blur(a: np.ndarray, gain: float = 1.0) -> np.ndarray:
    return ndimage.correlate(a, gain * PYRAMID_KERNEL, mode="reflect")


def laplacian_pyramid(a: np.ndarray, levels: int = NLPD_LEVELS) -> list[np.ndarray]:
    """``levels - 1`` band-pass images followed by the low-pass residual."""
    bands = []
    cur = a
    for _ in range(levels - 1):
        low = _blur(cur)[::2, ::2]
        up = np.zeros_like(cur)
        up[::2, ::2] = low
        bands.append(cur - _blur(up, 4.0))
        cur = low
    bands.append(cur)
    return bands


def normalize_band(band: np.ndarray, eps: float = NLPD_EPS) -> np.ndarray:
    amplitude = ndimage.correlate(np.abs(band), AMPLITUDE_KERNEL, mode="reflect")
    return band / (eps + amplitude)


def nlpd(ref, dist, levels: int = NLPD_LEVELS) -> float:
    """Root of the mean over levels of the squared per-level RMS difference.

    Inputs are rescaled to a 0..255 range before decomposition so ``NLPD_EPS``
    has a fixed meaning regardless of bit depth.
    """
    ref, dist = as_luma(ref), as_luma(dist)
    check_pair(ref, dist)
    min_side = 2 ** (levels - 1)
    if min(ref.shape) < min_side:
        raise ImageTooSmall(f"NLPD needs both sides >= {min_side}, got {ref.width}x{ref.height}")
    scale = 255.0 / ref.data_range
    px = laplacian_pyramid(ref.samples * scale, levels)
    py = laplacian_pyramid(dist.samples * scale, levels)
    per_level = [
        np.mean((normalize_band(bx) - normalize_band(by)) ** 2) for bx, by in zip(px, py)
    ]
    return float(np.sqrt(np.mean(per_level)))
