"""Grayscale images, PGM I/O and integral-image rectangle sums.

Everything downstream (Haar features, cascade scanning, window
normalization) is built on the O(1) rectangle queries provided here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PgmError

_WHITESPACE = b" \t\r\n\x0b\x0c"


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: top-left corner (x, y), extent (w, h)."""

    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h


class GrayImage:
    """8-bit grayscale image, row-major pixels.

    Immutable after construction; safe to share across threads.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        a = np.asarray(pixels)
        if a.ndim != 2 or a.size == 0:
            raise ValueError(f"expected a non-empty 2-D pixel array, got shape {a.shape}")
        if a.dtype != np.uint8:
            if np.any((a < 0) | (a > 255)):
                raise ValueError("pixel intensities must lie in [0, 255]")
            a = a.astype(np.uint8)
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "pixels", a)

    def __setattr__(self, name, value):
        raise AttributeError("GrayImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def crop(self, r: Rect) -> "GrayImage":
        if not (0 <= r.x and 0 <= r.y and r.x + r.w <= self.width and r.y + r.h <= self.height
                and r.w >= 1 and r.h >= 1):
            raise ValueError(f"crop rect {r} outside {self.width}x{self.height} image")
        return GrayImage(self.pixels[r.y:r.y + r.h, r.x:r.x + r.w].copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


class IntegralImage:
    """Cumulative sum tables over an image, with a zero border.

    `ii` and `sq` are (height+1, width+1) int64 tables so that rectangle
    sums need no edge special-cases. 64-bit accumulators are required:
    the squared sum of a 384x286 8-bit image already exceeds 32 bits.
    """

    __slots__ = ("ii", "sq", "width", "height")

    def __init__(self, ii: np.ndarray, sq: np.ndarray):
        object.__setattr__(self, "ii", ii)
        object.__setattr__(self, "sq", sq)
        object.__setattr__(self, "width", ii.shape[1] - 1)
        object.__setattr__(self, "height", ii.shape[0] - 1)

    def __setattr__(self, name, value):
        raise AttributeError("IntegralImage is immutable")


def compute_integral(image: GrayImage) -> IntegralImage:
    """Build the integral and squared-integral tables in one sweep."""
    p = image.pixels.astype(np.int64)
    h, w = p.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(p, axis=0), axis=1, out=ii[1:, 1:])
    np.cumsum(np.cumsum(p * p, axis=0), axis=1, out=sq[1:, 1:])
    ii.setflags(write=False)
    sq.setflags(write=False)
    return IntegralImage(ii, sq)


def _check_bounds(integral: IntegralImage, r: Rect) -> None:
    if r.w < 0 or r.h < 0 or r.x < 0 or r.y < 0 \
            or r.x + r.w > integral.width or r.y + r.h > integral.height:
        raise ValueError(
            f"rect {r} out of bounds for {integral.width}x{integral.height} image"
        )


def rect_sum(integral: IntegralImage, r: Rect) -> int:
    """Pixel sum over `r` in four table lookups."""
    _check_bounds(integral, r)
    t = integral.ii
    return int(t[r.y + r.h, r.x + r.w] - t[r.y, r.x + r.w]
               - t[r.y + r.h, r.x] + t[r.y, r.x])


def rect_sq_sum(integral: IntegralImage, r: Rect) -> int:
    """Squared-pixel sum over `r`."""
    _check_bounds(integral, r)
    t = integral.sq
    return int(t[r.y + r.h, r.x + r.w] - t[r.y, r.x + r.w]
               - t[r.y + r.h, r.x] + t[r.y, r.x])


def window_stats(integral: IntegralImage, r: Rect) -> tuple[float, float]:
    """Mean and variance of the window, from the two integral tables.

    Variance is clamped at 0 so callers may take sqrt without guarding
    against floating-point cancellation on near-constant windows.
    """
    _check_bounds(integral, r)
    area = r.area
    if area <= 0:
        raise ValueError(f"zero-area rect {r} has no statistics")
    mean = rect_sum(integral, r) / area
    var = rect_sq_sum(integral, r) / area - mean * mean
    return mean, max(var, 0.0)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c in b"#":
            while pos < n and data[pos:pos + 1] not in b"\r\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PgmError("truncated PGM header")
    return data[start:pos], pos


def _int_token(data: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, pos = _next_token(data, pos)
    try:
        return int(tok), pos
    except ValueError:
        raise PgmError(f"non-numeric {what} token {tok!r} in PGM header") from None


def decode_pgm(data: bytes) -> GrayImage:
    """Decode a binary (P5) or ASCII (P2) PGM with maxval <= 255.

    Comment lines are permitted anywhere in the header. Raises PgmError
    with a distinct message for a bad magic number, an oversized maxval,
    a non-numeric header token or a truncated pixel payload.
    """
    if len(data) < 2:
        raise PgmError("malformed PGM magic number: input too short")
    magic = bytes(data[:2])
    if magic not in (b"P5", b"P2"):
        raise PgmError(f"malformed PGM magic number {magic!r} (expected P5 or P2)")
    pos = 2
    width, pos = _int_token(data, pos, "width")
    height, pos = _int_token(data, pos, "height")
    maxval, pos = _int_token(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PgmError(f"invalid PGM dimensions {width}x{height}")
    if maxval > 255:
        raise PgmError(f"PGM maxval {maxval} exceeds 255 (only 8-bit images supported)")
    if maxval < 1:
        raise PgmError(f"invalid PGM maxval {maxval}")

    n = width * height
    if magic == b"P5":
        # Exactly one whitespace byte separates the header from the payload.
        if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
            raise PgmError("truncated PGM payload: missing header terminator")
        pos += 1
        payload = data[pos:pos + n]
        if len(payload) < n:
            raise PgmError(
                f"truncated PGM payload: expected {n} bytes, got {len(payload)}"
            )
        pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    else:
        values = np.empty(n, dtype=np.int64)
        for i in range(n):
            try:
                v, pos = _int_token(data, pos, "sample")
            except PgmError as exc:
                if "truncated" in str(exc):
                    raise PgmError(
                        f"truncated PGM payload: expected {n} samples, got {i}"
                    ) from None
                raise
            values[i] = v
        if np.any((values < 0) | (values > maxval)):
            raise PgmError(f"PGM sample outside [0, {maxval}]")
        pixels = values.astype(np.uint8).reshape(height, width)
    return GrayImage(pixels.copy())


def encode_pgm(image: GrayImage) -> bytes:
    """Encode as binary P5, byte-exact round-trip with decode_pgm."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def write_pgm(path, image: GrayImage) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(image))
