"""Raster images, colour conversions, binary erosion and PNG/PPM/PGM I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import InvalidInputError, UnsupportedFormatError

__all__ = [
    "ImageBuffer", "BinaryMask", "rgb_to_gray", "rgb_to_hsv", "erode",
    "read_image", "write_image", "read_mask", "write_mask",
]

GRAY_WEIGHTS = (0.299, 0.587, 0.114)

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit raster, row-major with origin at the top-left corner.

    ``pixels`` has shape ``(height, width)`` for grey images and
    ``(height, width, 3)`` for RGB, so ``pixels.tobytes()`` is the
    interleaved sample stream.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise InvalidInputError(f"expected uint8 samples, got {px.dtype}")
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise InvalidInputError(f"unsupported pixel array shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidInputError("image must be at least 1x1")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    @classmethod
    def from_bytes(cls, width: int, height: int, channels: int, data: bytes) -> "ImageBuffer":
        if channels not in (1, 3):
            raise InvalidInputError(f"channels must be 1 or 3, got {channels}")
        if len(data) != width * height * channels:
            raise InvalidInputError(
                f"data length {len(data)} != {width}x{height}x{channels}")
        arr = np.frombuffer(data, dtype=np.uint8)
        shape = (height, width) if channels == 1 else (height, width, 3)
        return cls(arr.reshape(shape).copy())


@dataclass(frozen=True)
class BinaryMask:
    """Foreground map; ``bits[y, x]`` is True for foreground."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2:
            raise InvalidInputError(f"mask must be 2-D, got shape {b.shape}")
        object.__setattr__(self, "bits", np.ascontiguousarray(b))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())


def _require_rgb(img: ImageBuffer) -> np.ndarray:
    if img.channels != 3:
        raise InvalidInputError(f"expected a 3-channel image, got {img.channels}")
    return img.pixels.astype(np.float64)


def rgb_to_gray(img: ImageBuffer) -> ImageBuffer:
    """BT.601 luma, rounded half up."""
    rgb = _require_rgb(img)
    wr, wg, wb = GRAY_WEIGHTS
    y = wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2]
    return ImageBuffer(np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8))


def rgb_to_hsv(img: ImageBuffer):
    """Hexcone HSV. Returns ``(h, s, v)`` float arrays.

    Hue is in degrees on [0, 360) and is 0 for achromatic pixels;
    saturation and value are on [0, 1].
    """
    rgb = _require_rgb(img)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn

    v = mx / 255.0
    s = np.divide(delta, mx, out=np.zeros_like(mx), where=mx > 0)

    chroma = delta > 0
    safe = np.where(chroma, delta, 1.0)
    h = np.zeros_like(mx)
    is_r = chroma & (mx == r)
    is_g = chroma & (mx == g) & ~is_r
    is_b = chroma & ~is_r & ~is_g
    h[is_r] = np.mod((g - b)[is_r] / safe[is_r], 6.0)
    h[is_g] = (b - r)[is_g] / safe[is_g] + 2.0
    h[is_b] = (r - g)[is_b] / safe[is_b] + 4.0
    h *= 60.0
    h[h >= 360.0] -= 360.0
    return h, s, v


def erode(mask: BinaryMask, se_radius: int = 1, iterations: int = 1) -> BinaryMask:
    """Binary erosion with a (2r+1)x(2r+1) square; outside pixels count as background."""
    if se_radius < 1 or iterations < 1:
        raise InvalidInputError("se_radius and iterations must be >= 1")
    size = 2 * se_radius + 1
    out = ndimage.binary_erosion(
        mask.bits, structure=np.ones((size, size), dtype=bool),
        iterations=iterations, border_value=0)
    return BinaryMask(out)


def _sniff(path: Path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(_PNG_MAGIC):
        return "png"
    if head[:2] in (b"P5", b"P6") and len(head) > 2 and head[2:3].isspace():
        return "pnm"
    raise UnsupportedFormatError(f"{path}: not a PNG or binary PPM/PGM file")


def read_image(path) -> ImageBuffer:
    """Decode a PNG or binary PPM (P6) / PGM (P5) file."""
    path = Path(path)
    kind = _sniff(path)
    with Image.open(path) as im:
        im.load()
        mode = im.mode
        if kind == "pnm" and mode not in ("L", "RGB", "1"):
            raise UnsupportedFormatError(f"{path}: only 8-bit PPM/PGM supported (mode {mode})")
        if mode in ("L", "1", "LA"):
            arr = np.asarray(im.convert("L"))
        elif mode in ("RGB", "RGBA", "P"):
            arr = np.asarray(im.convert("RGB"))
        else:
            raise UnsupportedFormatError(f"{path}: unsupported pixel mode {mode}")
    return ImageBuffer(arr.copy())


def write_image(path, img: ImageBuffer) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        fmt = "PNG"
    elif suffix in (".ppm", ".pgm", ".pnm"):
        if (suffix == ".ppm" and img.channels != 3) or (suffix == ".pgm" and img.channels != 1):
            raise UnsupportedFormatError(
                f"{path}: {img.channels}-channel image cannot be written as {suffix}")
        fmt = "PPM"
    else:
        raise UnsupportedFormatError(f"{path}: unsupported output format {suffix!r}")
    Image.fromarray(img.pixels).save(path, format=fmt)


def read_mask(path) -> BinaryMask:
    img = read_image(path)
    px = img.pixels if img.channels == 1 else img.pixels.max(axis=-1)
    return BinaryMask(px > 127)


def write_mask(path, mask: BinaryMask) -> None:
    write_image(path, ImageBuffer(np.where(mask.bits, 255, 0).astype(np.uint8)))
