"""Luminance-domain full-reference metrics: PSNR-Y, SSIM, MS-SSIM, GMSD, UQI.

All windowed operations use symmetric (half-sample) border extension, i.e.
``scipy.ndimage`` mode ``"reflect"`` / numpy pad mode ``"symmetric"``.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .image import ImageTooSmall, LumaImage, as_luma, check_pair

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

MS_SSIM_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
MS_SSIM_SCALES = len(MS_SSIM_WEIGHTS)

GMSD_C = 170.0  # for a 0..255 signal
PREWITT_X = np.array([[1.0, 0.0, -1.0]] * 3) / 3.0

UQI_WINDOW = 8
# A window whose variance is below (FLAT_TOL * data_range)**2 counts as flat.
FLAT_TOL = 1e-9


def _pair(ref, dist) -> tuple[LumaImage, LumaImage]:
    ref, dist = as_luma(ref), as_luma(dist)
    check_pair(ref, dist)
    return ref, dist


def psnr_y(ref, dist, data_range: float | None = None) -> float:
    """PSNR on luminance in dB. Identical inputs give ``math.inf``."""
    ref, dist = _pair(ref, dist)
    if data_range is None:
        data_range = ref.data_range
    mse = float(np.mean((ref.samples - dist.samples) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    k = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(k**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def _ssim_maps(x: np.ndarray, y: np.ndarray, data_range: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel SSIM and contrast-structure maps."""
    win = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def filt(a):
        return ndimage.correlate(a, win, mode="reflect")

    mu_x, mu_y = filt(x), filt(y)
    sxx = filt(x * x) - mu_x**2
    syy = filt(y * y) - mu_y**2
    sxy = filt(x * y) - mu_x * mu_y
    cs = (2.0 * sxy + c2) / (sxx + syy + c2)
    lum = (2.0 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)
    return lum * cs, cs


def ssim(ref, dist) -> float:
    ref, dist = _pair(ref, dist)
    if min(ref.shape) < SSIM_WINDOW:
        raise ImageTooSmall(
            f"SSIM needs both sides >= {SSIM_WINDOW}, got {ref.width}x{ref.height}"
        )
    smap, _ = _ssim_maps(ref.samples, dist.samples, ref.data_range)
    return float(np.mean(smap))


def downsample2(a: np.ndarray) -> np.ndarray:
    """2x2 block mean; odd sizes are first extended by one mirrored sample."""
    h, w = a.shape
    if h % 2 or w % 2:
        a = np.pad(a, ((0, h % 2), (0, w % 2)), mode="symmetric")
    h, w = a.shape
    return a.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def ms_ssim(ref, dist) -> float:
    """Five-scale MS-SSIM.

    Exponents are normalized to sum to 1. Negative per-scale terms are clipped
    to zero before exponentiation so the result stays real.
    """
    ref, dist = _pair(ref, dist)
    min_side = 2 ** (MS_SSIM_SCALES - 1) * SSIM_WINDOW
    if min(ref.shape) < min_side:
        raise ImageTooSmall(
            f"MS-SSIM needs both sides >= {min_side}, got {ref.width}x{ref.height}"
        )
    weights = MS_SSIM_WEIGHTS / MS_SSIM_WEIGHTS.sum()
    x, y = ref.samples, dist.samples
    terms = []
    for scale in range(MS_SSIM_SCALES):
        smap, csmap = _ssim_maps(x, y, ref.data_range)
        if scale == MS_SSIM_SCALES - 1:
            terms.append(float(np.mean(smap)))
        else:
            terms.append(float(np.mean(csmap)))
            x, y = downsample2(x), downsample2(y)
    terms = np.maximum(np.array(terms), 0.0)
    return float(np.prod(terms**weights))


def gradient_magnitude(a: np.ndarray) -> np.ndarray:
    gx = ndimage.correlate(a, PREWITT_X, mode="reflect")
    gy = ndimage.correlate(a, PREWITT_X.T, mode="reflect")
    return np.sqrt(gx**2 + gy**2)


def gms_map(ref, dist) -> np.ndarray:
    ref, dist = _pair(ref, dist)
    c = GMSD_C * (ref.data_range / 255.0) ** 2
    gr = gradient_magnitude(downsample2(ref.samples))
    gd = gradient_magnitude(downsample2(dist.samples))
    return (2.0 * gr * gd + c) / (gr**2 + gd**2 + c)


def gmsd(ref, dist) -> float:
    """Population standard deviation of the gradient-magnitude similarity map."""
    return float(np.std(gms_map(ref, dist)))


def uqi_window_index(mx, my, vx, vy, cov, data_range: float = 255.0):
    """Universal quality index of windows from their moments.

    Flat-vs-flat windows score their luminance term only (1 for equal means).
    """
    flat = (FLAT_TOL * data_range) ** 2
    msum = mx * mx + my * my
    vsum = vx + vy
    with np.errstate(divide="ignore", invalid="ignore"):
        lum = np.where(msum == 0.0, 1.0, 2.0 * mx * my / np.where(msum == 0.0, 1.0, msum))
        both_flat = (vx <= flat) & (vy <= flat)
        cs = np.where(both_flat, 1.0, 2.0 * cov / np.where(both_flat, 1.0, vsum))
    return lum * cs


def uqi_map(ref, dist, rows_per_chunk: int = 64) -> np.ndarray:
    ref, dist = _pair(ref, dist)
    k = UQI_WINDOW
    before, after = (k - 1) // 2, k - 1 - (k - 1) // 2
    px = np.pad(ref.samples, ((before, after), (before, after)), mode="symmetric")
    py = np.pad(dist.samples, ((before, after), (before, after)), mode="symmetric")
    h, w = ref.shape
    out = np.empty((h, w))
    for r0 in range(0, h, rows_per_chunk):
        r1 = min(h, r0 + rows_per_chunk)
        wx = sliding_window_view(px[r0 : r1 + k - 1], (k, k))
        wy = sliding_window_view(py[r0 : r1 + k - 1], (k, k))
        mx = wx.mean(axis=(-2, -1))
        my = wy.mean(axis=(-2, -1))
        dx = wx - mx[..., None, None]
        dy = wy - my[..., None, None]
        vx = (dx * dx).mean(axis=(-2, -1))
        vy = (dy * dy).mean(axis=(-2, -1))
        cov = (dx * dy).mean(axis=(-2, -1))
        out[r0:r1] = uqi_window_index(mx, my, vx, vy, cov, ref.data_range)
    return out


def uqi(ref, dist) -> float:
    """Mean universal quality index over 8x8 sliding windows."""
    return float(np.mean(uqi_map(ref, dist)))
