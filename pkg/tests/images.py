"""Deterministic synthetic test images."""

import numpy as np
from scipy import ndimage


def textured_rgb(h: int, w: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.normal(size=(h, w, 3)), sigma=(2.0, 2.0, 0))
    base = (base - base.min()) / np.ptp(base)
    yy, xx = np.mgrid[0:h, 0:w]
    ramp = (xx + yy) / (h + w)
    img = 0.6 * base + 0.4 * ramp[..., None]
    img[: h // 4, : w // 4] = 0.5  # flat patch exercises degenerate windows
    return np.round(img * 255).astype(np.uint8)


def distorted(img: np.ndarray, kind: str, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = img.astype(np.float64)
    if kind == "noise":
        x = x + rng.normal(scale=8.0, size=x.shape)
    elif kind == "blur":
        x = ndimage.gaussian_filter(x, sigma=(1.2, 1.2, 0))
    elif kind == "shift":
        x = x * 0.9 + 12.0
    else:
        raise ValueError(kind)
    return np.clip(np.round(x), 0, 255).astype(np.uint8)


def pairs(h: int = 64, w: int = 64):
    ref = textured_rgb(h, w, 1)
    return [(kind, ref, distorted(ref, kind, 2)) for kind in ("noise", "blur", "shift")]
