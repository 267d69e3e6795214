"""Haar wavelet-based perceptual similarity index on RGB images.

Follows the reference construction: YIQ conversion, 2x2 pre-subsampling,
three-scale Haar filter responses, two finest scales for local similarity,
coarsest scale magnitudes as weights, chroma similarity on smoothed I/Q.
Borders use symmetric extension.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from .image import RgbImage, check_pair

HAARPSI_C = 30.0
HAARPSI_ALPHA = 4.2
HAAR_SCALES = 3

_YIQ = np.array(
    [
        [0.299, 0.587, 0.114],
        [0.596, -0.274, -0.322],
        [0.211, -0.523, 0.312],
    ]
)
_BOX2 = np.full((2, 2), 0.25)


def _conv_same(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return convolve2d(a, kernel, mode="same", boundary="symm")


def haar_kernel(scale: int) -> np.ndarray:
    """Horizontal-edge Haar filter of side 2**scale (transpose for vertical)."""
    n = 2**scale
    k = np.full((n, n), 2.0**-scale)
    k[: n // 2] *= -1.0
    return k


def haar_responses(a: np.ndarray, scales: int = HAAR_SCALES) -> np.ndarray:
    """Stack of shape (2, scales, H, W): orientation, scale."""
    out = np.empty((2, scales) + a.shape)
    for s in range(1, scales + 1):
        k = haar_kernel(s)
        out[0, s - 1] = _conv_same(a, k)
        out[1, s - 1] = _conv_same(a, k.T)
    return out


def _subsample(a: np.ndarray) -> np.ndarray:
    return _conv_same(a, _BOX2)[::2, ::2]


def _sigmoid(x, alpha):
    return 1.0 / (1.0 + np.exp(-alpha * x))


def _logit(p, alpha):
    return np.log(p / (1.0 - p)) / alpha


def _to_yiq(img: RgbImage) -> np.ndarray:
    px = img.pixels.astype(np.float64) * (255.0 / img.data_range)
    return np.einsum("ij,hwj->ihw", _YIQ, px)


def haar_psi(ref: RgbImage, dist: RgbImage) -> float:
    check_pair(ref, dist)
    c, alpha = HAARPSI_C, HAARPSI_ALPHA
    yiq_r = [_subsample(p) for p in _to_yiq(ref)]
    yiq_d = [_subsample(p) for p in _to_yiq(dist)]

    hr = haar_responses(yiq_r[0])
    hd = haar_responses(yiq_d[0])
    h, w = yiq_r[0].shape
    sims = np.empty((3, h, w))
    weights = np.empty((3, h, w))
    for o in range(2):
        weights[o] = np.maximum(np.abs(hr[o, HAAR_SCALES - 1]), np.abs(hd[o, HAAR_SCALES - 1]))
        mr, md = np.abs(hr[o, :2]), np.abs(hd[o, :2])
        sims[o] = ((2.0 * mr * md + c) / (mr**2 + md**2 + c)).sum(axis=0) / 2.0

    chroma = []
    for ch in (1, 2):
        ar, ad = np.abs(_conv_same(yiq_r[ch], _BOX2)), np.abs(_conv_same(yiq_d[ch], _BOX2))
        chroma.append((2.0 * ar * ad + c) / (ar**2 + ad**2 + c))
    sims[2] = (chroma[0] + chroma[1]) / 2.0
    weights[2] = (weights[0] + weights[1]) / 2.0

    total = weights.sum()
    if total == 0.0:
        # Flat images carry no high-frequency weight; fall back to uniform.
        weights = np.ones_like(weights)
        total = weights.sum()
    top = _sigmoid(1.0, alpha)
    # Pooled around the maximum so identical inputs pool to exactly `top`.
    pooled = top + float(((_sigmoid(sims, alpha) - top) * weights).sum() / total)
    # logit(top) / alpha == 1 analytically; subtract it so ties map to 1.0 exactly.
    score = 1.0 + float(_logit(pooled, alpha) - _logit(top, alpha))
    return min(1.0, score**2)
