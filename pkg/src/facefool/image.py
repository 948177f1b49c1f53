"""Grayscale images, binary PGM (P5) serialization, and perturbation primitives.

Images are immutable byte buffers in raster order (top-left origin,
row-major), one byte per pixel. The two perturbation primitives here are
the building blocks of every attack: shifting a single pixel by half the
intensity range, and checkerboard-signed random noise over all pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PgmError
from .rng import Pcg32


class PixelCoordinate(NamedTuple):
    x: int
    y: int


class GridCell(NamedTuple):
    origin: PixelCoordinate
    side: int


@dataclass(frozen=True)
class GrayscaleImage:
    """Immutable 8-bit grayscale image."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid image dimensions {self.width}x{self.height}")
        if len(self.pixels) != self.width * self.height:
            raise ValueError(
                f"pixel payload holds {len(self.pixels)} bytes, "
                f"expected {self.width * self.height}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "GrayscaleImage":
        """Build from an [height, width] array; values are clipped to [0, 255]."""
        a = np.asarray(arr)
        if a.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {a.shape}")
        clipped = np.clip(np.rint(a), 0, 255).astype(np.uint8)
        return cls(a.shape[1], a.shape[0], clipped.tobytes())

    def to_array(self) -> np.ndarray:
        """Pixels as a uint8 array of shape [height, width]."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width)

    def get(self, x: int, y: int) -> int:
        self.check_bounds(x, y)
        return self.pixels[y * self.width + x]

    def check_bounds(self, x: int, y: int) -> None:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise IndexError(f"({x}, {y}) lies outside a {self.width}x{self.height} image")


_WS = frozenset(b" \t\n\r\x0b\x0c")
_COMMENT = 0x23  # '#'


def _next_header_token(data: bytes, pos: int) -> tuple[str | None, int]:
    """Scan past whitespace and '#' comments, then read one header token."""
    n = len(data)
    while pos < n:
        b = data[pos]
        if b in _WS:
            pos += 1
        elif b == _COMMENT:
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
        else:
            break
    if pos >= n:
        return None, pos
    start = pos
    while pos < n and data[pos] not in _WS and data[pos] != _COMMENT:
        pos += 1
    return data[start:pos].decode("ascii", "replace"), pos


def load_pgm(data: bytes) -> GrayscaleImage:
    """Parse a binary (P5) PGM byte string.

    Header comments are tolerated anywhere before the payload; maxval must
    fit in one byte. Raster order is preserved as-is.
    """
    if not data.startswith(b"P5"):
        raise PgmError("not a binary PGM: magic 'P5' missing")
    if len(data) > 2 and data[2] not in _WS and data[2] != _COMMENT:
        raise PgmError("magic 'P5' not followed by whitespace")
    pos = 2
    fields: list[int] = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_header_token(data, pos)
        if token is None:
            raise PgmError(f"header ended before {name}")
        if not token.isdigit():
            raise PgmError(f"non-numeric {name} field {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PgmError(f"invalid dimensions {width}x{height}")
    if maxval > 255:
        raise PgmError(f"maxval {maxval} exceeds 255 (one byte per pixel)")
    if maxval < 1:
        raise PgmError(f"invalid maxval {maxval}")
    if pos >= len(data) or data[pos] not in _WS:
        raise PgmError("missing whitespace between header and pixel payload")
    pos += 1
    payload = data[pos : pos + width * height]
    if len(payload) < width * height:
        raise PgmError(
            f"pixel payload truncated: need {width * height} bytes, found {len(payload)}"
        )
    return GrayscaleImage(width, height, bytes(payload))


def save_pgm(image: GrayscaleImage) -> bytes:
    """Serialize as binary PGM: b"P5\\n<w> <h>\\n255\\n" followed by raw pixels."""
    return b"P5\n%d %d\n255\n" % (image.width, image.height) + image.pixels


def invert_pixel(image: GrayscaleImage, at: PixelCoordinate) -> GrayscaleImage:
    """Return a copy with the pixel at `at` shifted by +128 modulo 256.

    The shift is an involution: applying it twice restores the original.
    """
    x, y = at
    image.check_bounds(x, y)
    buf = bytearray(image.pixels)
    i = y * image.width + x
    buf[i] = (buf[i] + 128) % 256
    return GrayscaleImage(image.width, image.height, bytes(buf))


def partition_grid(image: GrayscaleImage, side: int) -> list[GridCell]:
    """Tile the image with side x side cells in row-major order.

    The side must divide both dimensions, so the cells are disjoint and
    jointly cover the image.
    """
    if side <= 0:
        raise ValueError(f"cell side must be positive, got {side}")
    if image.width % side or image.height % side:
        raise ValueError(
            f"cell side {side} does not divide {image.width}x{image.height}"
        )
    return [
        GridCell(PixelCoordinate(x, y), side)
        for y in range(0, image.height, side)
        for x in range(0, image.width, side)
    ]


def apply_checkerboard_noise(
    image: GrayscaleImage, lo: int, hi: int, rng: Pcg32
) -> GrayscaleImage:
    """Perturb every pixel by a magnitude drawn uniformly from [lo, hi].

    The sign alternates like a checkerboard: magnitudes are added where
    (x + y) is even and subtracted where it is odd, then clamped to
    [0, 255]. One magnitude is drawn per pixel in raster order, so a fixed
    seed yields a bit-identical result.
    """
    if not (0 <= lo <= hi <= 255):
        raise ValueError(f"invalid magnitude band [{lo}, {hi}]")
    span = hi - lo + 1
    threshold = (1 << 32) % span
    next_u32 = rng.next_u32
    buf = bytearray(image.pixels)
    i = 0
    for y in range(image.height):
        for x in range(image.width):
            r = next_u32()
            while r < threshold:
                r = next_u32()
            m = lo + r % span
            v = buf[i] + m if ((x + y) & 1) == 0 else buf[i] - m
            buf[i] = 0 if v < 0 else 255 if v > 255 else v
            i += 1
    return GrayscaleImage(image.width, image.height, bytes(buf))
