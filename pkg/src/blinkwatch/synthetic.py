"""Procedural surrogate datasets for desk-scale training and testing.

The eye surrogate is a dark horizontal bar on a bright noisy background;
the face surrogate adds a dark lower band and optional eye bars in the
upper half. Geometry is kept proportional between training patches and
rendered frames so detectors trained on the patches find the planted
patterns at larger scales.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imaging import GrayImage, Rect, write_pgm

EYE_WINDOW = (16, 8)
FACE_WINDOW = (24, 24)

# Bar placement inside an eye patch, as fractions of the window.
_BAR_X = (0.125, 0.875)
_BAR_Y = (0.25, 0.75)

# Face-box fractions: lower band and the two eye bars.
_BAND_X = (0.083, 0.917)
_BAND_Y = (0.583, 0.792)
_EYE_Y = (0.218, 0.301)
_LEFT_EYE_X = (0.15, 0.40)
_RIGHT_EYE_X = (0.60, 0.85)


def _noise(rng, shape, mean, sigma, lo, hi):
    return np.clip(rng.normal(mean, sigma, shape), lo, hi)


def _bright(rng, shape):
    return _noise(rng, shape, 205.0, 10.0, 150, 255)


def _dark(rng, shape):
    return _noise(rng, shape, 45.0, 8.0, 0, 100)


def _span(lo_frac: float, hi_frac: float, extent: int, offset: int = 0) -> slice:
    return slice(offset + round(lo_frac * extent), offset + round(hi_frac * extent))


def draw_eye_pattern(canvas: np.ndarray, rect: Rect, rng) -> None:
    """Plant a bar pattern proportioned like an eye training patch."""
    ys = _span(0.0, 1.0, rect.h, rect.y)
    xs = _span(0.0, 1.0, rect.w, rect.x)
    canvas[ys, xs] = _bright(rng, (ys.stop - ys.start, xs.stop - xs.start))
    by = _span(*_BAR_Y, rect.h, rect.y)
    bx = _span(*_BAR_X, rect.w, rect.x)
    canvas[by, bx] = _dark(rng, (by.stop - by.start, bx.stop - bx.start))


def eye_positive(rng, size=EYE_WINDOW) -> GrayImage:
    """Centered dark bar with jittered position and contrast.

    The jitter keeps the task from collapsing to a single perfect stump
    and teaches tolerance to the scan grid's alignment wobble.
    """
    w, h = size
    canvas = _noise(rng, (h, w), rng.uniform(190, 220), 10.0, 150, 255)
    jx = int(rng.integers(-1, 2))
    jy = int(rng.integers(-1, 2))
    by = _span(*_BAR_Y, h)
    bx = _span(*_BAR_X, w)
    ys = slice(max(by.start + jy, 0), min(by.stop + jy, h))
    xs = slice(max(bx.start + jx, 0), min(bx.stop + jx, w))
    canvas[ys, xs] = _noise(rng, (ys.stop - ys.start, xs.stop - xs.start),
                            rng.uniform(30, 70), 8.0, 0, 110)
    return GrayImage(canvas.round())


def eye_negative(rng, size=EYE_WINDOW) -> GrayImage:
    """Hard background patch: noise, gradients, misplaced or partial bars."""
    w, h = size
    kind = rng.integers(0, 8)
    canvas = _bright(rng, (h, w))
    bar_level = rng.uniform(30, 70)
    if kind == 0:
        pass  # plain bright noise
    elif kind == 1:
        base = rng.uniform(120, 220)
        slope = rng.uniform(-3, 3)
        ramp = base + slope * np.arange(w)
        canvas = np.clip(ramp[None, :] + rng.normal(0, 8, (h, w)), 0, 255)
    elif kind == 2:
        # vertical dark bar: wrong orientation
        x0 = int(rng.integers(0, max(1, w - 3)))
        canvas[:, x0:x0 + 3] = _noise(rng, (h, 3), bar_level, 8.0, 0, 110)
    elif kind == 3:
        canvas = _noise(rng, (h, w), rng.uniform(60, 200), 25.0, 0, 255)
    elif kind == 4:
        # bar hugging the top edge
        canvas[0:h // 4, _span(*_BAR_X, w)] = _noise(
            rng, (h // 4, _span(*_BAR_X, w).stop - _span(*_BAR_X, w).start),
            bar_level, 8.0, 0, 110)
    elif kind == 5:
        # bar hugging the bottom edge
        canvas[h - h // 4:h, _span(*_BAR_X, w)] = _noise(
            rng, (h // 4, _span(*_BAR_X, w).stop - _span(*_BAR_X, w).start),
            bar_level, 8.0, 0, 110)
    elif kind == 6:
        # half-width bar at the correct rows
        by = _span(*_BAR_Y, h)
        if rng.uniform() < 0.5:
            xs = slice(0, w // 2 - 1)
        else:
            xs = slice(w // 2 + 1, w)
        canvas[by, xs] = _noise(rng, (by.stop - by.start, xs.stop - xs.start),
                                bar_level, 8.0, 0, 110)
    else:
        # inverted contrast: bright bar on dark background
        canvas = _noise(rng, (h, w), rng.uniform(30, 70), 10.0, 0, 110)
        canvas[_span(*_BAR_Y, h), _span(*_BAR_X, w)] = _noise(
            rng, (_span(*_BAR_Y, h).stop - _span(*_BAR_Y, h).start,
                  _span(*_BAR_X, w).stop - _span(*_BAR_X, w).start),
            205.0, 10.0, 150, 255)
    return GrayImage(canvas.round())


def face_positive(rng, size=FACE_WINDOW, eyes_probability: float = 0.5) -> GrayImage:
    w, h = size
    canvas = _bright(rng, (h, w))
    canvas[_span(*_BAND_Y, h), _span(*_BAND_X, w)] = _dark(
        rng, (_span(*_BAND_Y, h).stop - _span(*_BAND_Y, h).start,
              _span(*_BAND_X, w).stop - _span(*_BAND_X, w).start))
    if rng.uniform() < eyes_probability:
        for ex in (_LEFT_EYE_X, _RIGHT_EYE_X):
            ys = _span(*_EYE_Y, h)
            xs = _span(*ex, w)
            canvas[ys, xs] = _dark(rng, (ys.stop - ys.start, xs.stop - xs.start))
    return GrayImage(canvas.round())


def face_negative(rng, size=FACE_WINDOW) -> GrayImage:
    w, h = size
    kind = rng.integers(0, 4)
    if kind == 0:
        canvas = _bright(rng, (h, w))
    elif kind == 1:
        # band at the top instead of the lower area
        canvas = _bright(rng, (h, w))
        canvas[_span(0.05, 0.25, h), _span(*_BAND_X, w)] = _dark(
            rng, (_span(0.05, 0.25, h).stop - _span(0.05, 0.25, h).start,
                  _span(*_BAND_X, w).stop - _span(*_BAND_X, w).start))
    elif kind == 2:
        canvas = np.clip(rng.uniform(0, 255) + rng.normal(0, 20, (h, w)), 0, 255)
    else:
        base = rng.uniform(100, 220)
        slope = rng.uniform(-4, 4)
        ramp = base + slope * np.arange(h)
        canvas = np.clip(ramp[:, None] + rng.normal(0, 10, (h, w)), 0, 255)
    return GrayImage(canvas.round())


def eye_dataset(n_pos: int, n_neg: int, seed: int = 0) -> tuple[list[GrayImage], list[GrayImage]]:
    rng = np.random.default_rng(seed)
    return ([eye_positive(rng) for _ in range(n_pos)],
            [eye_negative(rng) for _ in range(n_neg)])


def face_dataset(n_pos: int, n_neg: int, seed: int = 0) -> tuple[list[GrayImage], list[GrayImage]]:
    rng = np.random.default_rng(seed)
    return ([face_positive(rng) for _ in range(n_pos)],
            [face_negative(rng) for _ in range(n_neg)])


def eye_centers_in_face(face: Rect) -> tuple[tuple[float, float], tuple[float, float]]:
    """Ground-truth surrogate eye centers for a rendered face box."""
    cy = face.y + (_EYE_Y[0] + _EYE_Y[1]) / 2 * face.h
    left = (face.x + (_LEFT_EYE_X[0] + _LEFT_EYE_X[1]) / 2 * face.w, cy)
    right = (face.x + (_RIGHT_EYE_X[0] + _RIGHT_EYE_X[1]) / 2 * face.w, cy)
    return left, right


def render_frame(width: int, height: int, face: Rect, eyes_open: bool, rng) -> GrayImage:
    """One stream frame with a planted face surrogate."""
    canvas = _bright(rng, (height, width))
    fy = _span(0.0, 1.0, face.h, face.y)
    fx = _span(0.0, 1.0, face.w, face.x)
    canvas[fy, fx] = _bright(rng, (fy.stop - fy.start, fx.stop - fx.start))
    ys = _span(*_BAND_Y, face.h, face.y)
    xs = _span(*_BAND_X, face.w, face.x)
    canvas[ys, xs] = _dark(rng, (ys.stop - ys.start, xs.stop - xs.start))
    if eyes_open:
        for ex in (_LEFT_EYE_X, _RIGHT_EYE_X):
            ys = _span(*_EYE_Y, face.h, face.y)
            xs = _span(*ex, face.w, face.x)
            canvas[ys, xs] = _dark(rng, (ys.stop - ys.start, xs.stop - xs.start))
    return GrayImage(canvas.round())


def write_patch_dirs(root, n_pos: int = 200, n_neg: int = 1000,
                     kind: str = "eye", seed: int = 0) -> tuple[Path, Path]:
    """Write pos/ and neg/ PGM patch directories for the train command."""
    make = eye_dataset if kind == "eye" else face_dataset
    pos, neg = make(n_pos, n_neg, seed)
    root = Path(root)
    pos_dir = root / "pos"
    neg_dir = root / "neg"
    pos_dir.mkdir(parents=True, exist_ok=True)
    neg_dir.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(pos):
        write_pgm(pos_dir / f"{kind}_{i:05d}.pgm", img)
    for i, img in enumerate(neg):
        write_pgm(neg_dir / f"bg_{i:05d}.pgm", img)
    return pos_dir, neg_dir


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "synth_data"
    kind = sys.argv[2] if len(sys.argv) > 2 else "eye"
    pos_dir, neg_dir = write_patch_dirs(target, kind=kind)
    print(f"wrote {pos_dir} and {neg_dir}")
