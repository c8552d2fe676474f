"""RGB8 images, boolean glitch masks, and PNG I/O.

Images are held as ``uint8`` arrays of shape ``(height, width, 3)``; masks
as ``bool`` arrays of shape ``(height, width)``. On disk masks are 8-bit
grayscale PNGs with 255 marking glitch pixels.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ImageIOError, UsageError


@dataclass(eq=False)
class ImageRGB:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise UsageError(f"ImageRGB needs an (H, W, 3) array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise UsageError(f"ImageRGB needs width, height >= 1, got {px.shape[1]}x{px.shape[0]}")
        self.pixels = np.ascontiguousarray(px, dtype=np.uint8)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width, height, color):
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[...] = np.asarray(color, dtype=np.uint8)
        return cls(px)

    def copy(self):
        return ImageRGB(self.pixels.copy())

    def __eq__(self, other):
        return isinstance(other, ImageRGB) and np.array_equal(self.pixels, other.pixels)


@dataclass(eq=False)
class GlitchMask:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise UsageError(f"GlitchMask needs an (H, W) array, got shape {v.shape}")
        self.values = np.ascontiguousarray(v, dtype=bool)

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def area(self):
        return int(self.values.sum())

    @property
    def density(self):
        return self.area / self.values.size

    @classmethod
    def empty(cls, width, height):
        return cls(np.zeros((height, width), dtype=bool))

    def resized(self, width, height):
        """Nearest-neighbour resample (pixel centers)."""
        rows = np.minimum(((np.arange(height) + 0.5) * self.height / height).astype(np.int64), self.height - 1)
        cols = np.minimum(((np.arange(width) + 0.5) * self.width / width).astype(np.int64), self.width - 1)
        return GlitchMask(self.values[rows][:, cols])

    def __or__(self, other):
        return GlitchMask(self.values | other.values)

    def __eq__(self, other):
        return isinstance(other, GlitchMask) and np.array_equal(self.values, other.values)


def read_image(path):
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            return ImageRGB(np.asarray(im.convert("RGB")))
    except FileNotFoundError:
        raise ImageIOError(path, "no such file") from None
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageIOError(path, f"cannot decode image ({exc})") from exc


def write_image(path, image):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(image.pixels).save(path, format="PNG", optimize=False)
    except OSError as exc:
        raise ImageIOError(path, f"cannot write image ({exc})") from exc


def read_mask(path):
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            return GlitchMask(np.asarray(im.convert("L")) >= 128)
    except FileNotFoundError:
        raise ImageIOError(path, "no such file") from None
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageIOError(path, f"cannot decode mask ({exc})") from exc


def write_mask(path, mask):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(mask.values.astype(np.uint8) * 255).save(path, format="PNG", optimize=False)
    except OSError as exc:
        raise ImageIOError(path, f"cannot write mask ({exc})") from exc


def rotate_clockwise(pixels):
    return np.ascontiguousarray(np.rot90(pixels, k=-1, axes=(0, 1)))


def _bilinear_axis(src, dst):
    # half-pixel centers, edge clamped; identity when src == dst
    pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0, src - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = (pos - lo).astype(np.float32)
    return lo, hi, frac


def resize_bilinear(arr, width, height):
    """Stretch-resize a float ``(H, W[, C])`` array to ``(height, width[, C])``."""
    arr = np.asarray(arr, dtype=np.float32)
    h, w = arr.shape[:2]
    if (h, w) == (height, width):
        return arr.copy()
    r0, r1, fr = _bilinear_axis(h, height)
    c0, c1, fc = _bilinear_axis(w, width)
    extra = (1,) * (arr.ndim - 2)
    fr = fr.reshape((-1, 1) + extra)
    fc = fc.reshape((1, -1) + extra)
    top = arr[r0][:, c0] * (1 - fc) + arr[r0][:, c1] * fc
    bot = arr[r1][:, c0] * (1 - fc) + arr[r1][:, c1] * fc
    return (top * (1 - fr) + bot * fr).astype(np.float32)
