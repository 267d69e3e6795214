"""PNG decoding and luminance conversion."""

from __future__ import annotations

import os
from dataclasses import dataclass

import cv2
import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# BT.709 luma weights; they sum to exactly 1.
LUMA_WEIGHTS = (0.2125, 0.7154, 0.0721)


class ImageError(ValueError):
    pass


class DecodeError(ImageError):
    pass


class DimensionMismatch(ImageError):
    def __init__(self, ref_shape, dist_shape):
        self.ref_shape, self.dist_shape = tuple(ref_shape), tuple(dist_shape)
        super().__init__(
            "reference is {}x{} but distorted is {}x{}".format(
                self.ref_shape[1], self.ref_shape[0], self.dist_shape[1], self.dist_shape[0]
            )
        )


class ImageTooSmall(ImageError):
    pass


@dataclass(frozen=True, eq=False)
class RgbImage:
    """An RGB image as an (H, W, 3) array of 8- or 16-bit samples."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ImageError(f"expected (H, W, 3) pixels, got shape {px.shape}")
        if px.shape[0] * px.shape[1] == 0:
            raise ImageError("image has no pixels")
        if px.dtype not in (np.uint8, np.uint16):
            raise ImageError(f"unsupported sample type {px.dtype}")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def bit_depth(self) -> int:
        return 8 if self.pixels.dtype == np.uint8 else 16

    @property
    def data_range(self) -> float:
        return float(2**self.bit_depth - 1)


@dataclass(frozen=True, eq=False)
class LumaImage:
    samples: np.ndarray
    data_range: float = 255.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.size == 0:
            raise ImageError(f"expected a non-empty 2-D plane, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ImageError("luma samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]


def decode_png(path: str | os.PathLike) -> RgbImage:
    """Decode an 8/16-bit RGB or grayscale PNG without any conversion.

    Grayscale is replicated to three planes. Images with alpha are rejected.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
    except OSError as exc:
        raise DecodeError(f"cannot read {path}: {exc.strerror}") from exc
    if head != PNG_SIGNATURE:
        raise DecodeError(f"{path} is not a PNG file")
    data = np.fromfile(path, dtype=np.uint8)
    px = cv2.imdecode(data, cv2.IMREAD_UNCHANGED)
    if px is None:
        raise DecodeError(f"{path} is corrupt or truncated")
    if px.dtype not in (np.uint8, np.uint16):
        raise DecodeError(f"{path}: unsupported bit depth ({px.dtype})")
    if px.ndim == 2:
        px = np.repeat(px[:, :, None], 3, axis=2)
    elif px.shape[2] == 3:
        px = px[:, :, ::-1]
    else:
        raise DecodeError(f"{path}: alpha channel present ({px.shape[2]} channels)")
    return RgbImage(np.ascontiguousarray(px))


def encode_png(img: RgbImage | np.ndarray, path: str | os.PathLike) -> None:
    px = img.pixels if isinstance(img, RgbImage) else np.asarray(img)
    if px.ndim == 3:
        px = px[:, :, ::-1]
    if not cv2.imwrite(os.fspath(path), np.ascontiguousarray(px)):
        raise ImageError(f"failed to write {path}")


def to_luma_bt709(img: RgbImage) -> LumaImage:
    px = img.pixels.astype(np.float64)
    wr, wg, wb = LUMA_WEIGHTS
    y = wr * px[:, :, 0] + wg * px[:, :, 1] + wb * px[:, :, 2]
    return LumaImage(y, img.data_range)


def as_luma(x: LumaImage | np.ndarray, data_range: float = 255.0) -> LumaImage:
    return x if isinstance(x, LumaImage) else LumaImage(np.asarray(x, dtype=np.float64), data_range)


def check_pair(ref, dist) -> None:
    a = ref.pixels.shape if isinstance(ref, RgbImage) else ref.shape
    b = dist.pixels.shape if isinstance(dist, RgbImage) else dist.shape
    if a[:2] != b[:2]:
        raise DimensionMismatch(a, b)
