"""Pseudo-Haar features: enumeration, scaling and evaluation.

A feature is a signed sum of pixel sums over adjacent rectangles inside a
base window. Five kinds are supported; their nominal weights balance so
that any constant image yields exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .imaging import IntegralImage, Rect, rect_sum


class FeatureKind(IntEnum):
    TWO_RECT_HORIZONTAL = 0   # left half positive, right half negative
    TWO_RECT_VERTICAL = 1     # top half positive, bottom half negative
    THREE_RECT_HORIZONTAL = 2  # outer thirds positive, middle third weight -2
    THREE_RECT_VERTICAL = 3
    FOUR_RECT_CHECKERBOARD = 4  # diagonal quadrants positive


# (width divisor, height divisor) each kind's extent must satisfy
_KIND_DIVISORS = {
    FeatureKind.TWO_RECT_HORIZONTAL: (2, 1),
    FeatureKind.TWO_RECT_VERTICAL: (1, 2),
    FeatureKind.THREE_RECT_HORIZONTAL: (3, 1),
    FeatureKind.THREE_RECT_VERTICAL: (1, 3),
    FeatureKind.FOUR_RECT_CHECKERBOARD: (2, 2),
}


def _iround(v: float) -> int:
    # Arithmetic rounding; round() would use banker's rounding at .5.
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class HaarFeature:
    """One feature: kind plus position/extent in base-window pixels."""

    kind: FeatureKind
    x: int
    y: int
    w: int
    h: int

    def rects(self) -> tuple[tuple[Rect, float], ...]:
        """Weighted sub-rectangles at unit scale."""
        return self.scaled_rects(1.0, 0, 0)

    def scaled_rects(self, scale: float, ox: int, oy: int) -> tuple[tuple[Rect, float], ...]:
        """Weighted sub-rectangles scaled by `scale` and shifted to (ox, oy).

        Boundary coordinates are rounded to the nearest pixel, then the
        negative weights are rescaled so the weighted areas still cancel;
        this keeps constant windows at feature value 0 under any scale.
        """
        x0 = _iround(self.x * scale)
        y0 = _iround(self.y * scale)
        x1 = _iround((self.x + self.w) * scale)
        y1 = _iround((self.y + self.h) * scale)
        k = self.kind
        if k == FeatureKind.TWO_RECT_HORIZONTAL:
            xm = _iround((self.x + self.w / 2) * scale)
            parts = [
                (Rect(x0, y0, xm - x0, y1 - y0), 1.0),
                (Rect(xm, y0, x1 - xm, y1 - y0), -1.0),
            ]
        elif k == FeatureKind.TWO_RECT_VERTICAL:
            ym = _iround((self.y + self.h / 2) * scale)
            parts = [
                (Rect(x0, y0, x1 - x0, ym - y0), 1.0),
                (Rect(x0, ym, x1 - x0, y1 - ym), -1.0),
            ]
        elif k == FeatureKind.THREE_RECT_HORIZONTAL:
            xa = _iround((self.x + self.w / 3) * scale)
            xb = _iround((self.x + 2 * self.w / 3) * scale)
            parts = [
                (Rect(x0, y0, xa - x0, y1 - y0), 1.0),
                (Rect(xa, y0, xb - xa, y1 - y0), -2.0),
                (Rect(xb, y0, x1 - xb, y1 - y0), 1.0),
            ]
        elif k == FeatureKind.THREE_RECT_VERTICAL:
            ya = _iround((self.y + self.h / 3) * scale)
            yb = _iround((self.y + 2 * self.h / 3) * scale)
            parts = [
                (Rect(x0, y0, x1 - x0, ya - y0), 1.0),
                (Rect(x0, ya, x1 - x0, yb - ya), -2.0),
                (Rect(x0, yb, x1 - x0, y1 - yb), 1.0),
            ]
        elif k == FeatureKind.FOUR_RECT_CHECKERBOARD:
            xm = _iround((self.x + self.w / 2) * scale)
            ym = _iround((self.y + self.h / 2) * scale)
            parts = [
                (Rect(x0, y0, xm - x0, ym - y0), 1.0),
                (Rect(xm, y0, x1 - xm, ym - y0), -1.0),
                (Rect(x0, ym, xm - x0, y1 - ym), -1.0),
                (Rect(xm, ym, x1 - xm, y1 - ym), 1.0),
            ]
        else:
            raise ValueError(f"unknown feature kind {k}")

        pos_area = sum(r.area * w for r, w in parts if w > 0)
        neg_area = sum(r.area * -w for r, w in parts if w < 0)
        if neg_area > 0 and pos_area != neg_area:
            factor = pos_area / neg_area
            parts = [(r, w if w > 0 else w * factor) for r, w in parts]
        return tuple(
            (Rect(r.x + ox, r.y + oy, r.w, r.h), w) for r, w in parts
        )


def enumerate_features(width: int, height: int | None = None,
                       kinds: tuple[FeatureKind, ...] | None = None) -> list[HaarFeature]:
    """All features of the requested kinds fitting a width x height window.

    Deterministic order: kind, then y, x, h, w ascending. A 24x24 window
    yields 162,336 features over all five kinds.
    """
    if height is None:
        height = width
    if width < 1 or height < 1:
        raise ValueError("base window must be at least 1x1")
    if kinds is None:
        kinds = tuple(FeatureKind)
    out: list[HaarFeature] = []
    for kind in kinds:
        dw, dh = _KIND_DIVISORS[kind]
        for y in range(height):
            for x in range(width):
                for h in range(dh, height - y + 1, dh):
                    for w in range(dw, width - x + 1, dw):
                        out.append(HaarFeature(kind, x, y, w, h))
    return out


def count_features(width: int, height: int | None = None) -> int:
    """Closed-form feature count, independent of enumerate_features."""
    if height is None:
        height = width
    total = 0
    for kind in FeatureKind:
        dw, dh = _KIND_DIVISORS[kind]
        xs = sum(width - w + 1 for w in range(dw, width + 1, dw))
        ys = sum(height - h + 1 for h in range(dh, height + 1, dh))
        total += xs * ys
    return total


def eval_feature(feature: HaarFeature, integral: IntegralImage,
                 ox: int = 0, oy: int = 0, scale: float = 1.0,
                 norm: float | None = None) -> float:
    """Weighted rectangle-sum value of `feature` at offset (ox, oy).

    When `norm` is given (window standard deviation for lighting
    normalization) the raw value is divided by it.
    """
    value = 0.0
    for r, w in feature.scaled_rects(scale, ox, oy):
        value += w * rect_sum(integral, r)
    if norm is not None:
        value /= norm
    return value
