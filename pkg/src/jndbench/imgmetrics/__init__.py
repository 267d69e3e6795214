"""Natively computed full-reference image metrics."""

from __future__ import annotations

import math
import os

from .fullref import gmsd, ms_ssim, psnr_y, ssim, uqi
from .haarpsi import haar_psi
from .image import (
    DecodeError,
    DimensionMismatch,
    ImageError,
    ImageTooSmall,
    LumaImage,
    RgbImage,
    check_pair,
    decode_png,
    encode_png,
    to_luma_bt709,
)
from .nlpd import nlpd

NATIVE_METRICS = ("psnr_y", "ssim", "ms_ssim", "gmsd", "uqi", "nlpd", "haar_psi")

# Value each metric takes on identical inputs.
PERFECT_VALUES = {
    "psnr_y": math.inf,
    "ssim": 1.0,
    "ms_ssim": 1.0,
    "gmsd": 0.0,
    "uqi": 1.0,
    "nlpd": 0.0,
    "haar_psi": 1.0,
}

_LUMA_METRICS = {
    "psnr_y": psnr_y,
    "ssim": ssim,
    "ms_ssim": ms_ssim,
    "gmsd": gmsd,
    "uqi": uqi,
    "nlpd": nlpd,
}


def compute_images(ref: RgbImage, dist: RgbImage) -> list[tuple[str, float]]:
    check_pair(ref, dist)
    ly, dy = to_luma_bt709(ref), to_luma_bt709(dist)
    out = [(name, fn(ly, dy)) for name, fn in _LUMA_METRICS.items()]
    out.append(("haar_psi", haar_psi(ref, dist)))
    return out


def compute_all(ref_path: str | os.PathLike, dist_path: str | os.PathLike) -> list[tuple[str, float]]:
    """All native metrics for one reference/distorted PNG pair, in NATIVE_METRICS order."""
    return compute_images(decode_png(ref_path), decode_png(dist_path))


__all__ = [
    "NATIVE_METRICS",
    "PERFECT_VALUES",
    "DecodeError",
    "DimensionMismatch",
    "ImageError",
    "ImageTooSmall",
    "LumaImage",
    "RgbImage",
    "compute_all",
    "compute_images",
    "decode_png",
    "encode_png",
    "gmsd",
    "haar_psi",
    "ms_ssim",
    "nlpd",
    "psnr_y",
    "ssim",
    "to_luma_bt709",
    "uqi",
]
