"""Cascade model serialization: native binary format and legacy XML import.

Native format (version 1, all integers little-endian):

    magic 'HCSC' | version u16 | window w u16, h u16 | stage count u32
    per stage: threshold f64 | weak count u32
    per weak:  feature kind u8 | x,y,w,h u16 | polarity i8
               | threshold f64 | alpha f64

The legacy importer reads the old stump-based haar-cascade XML dialect
(per-stage weak trees of depth 1). Each tree node is folded into
(alpha, WeakClassifier): the node's constant part shifts the stage
threshold, a sign-flipped feature folds into the polarity, and node
thresholds are rescaled by the base-window area because the legacy
runtime compares per-pixel-averaged sums while this engine compares raw
sums normalized by stddev times area ratio. Tree-based (depth > 1),
tilted-feature and newer-dialect cascades are rejected.
"""

from __future__ import annotations

import math
import struct
import xml.etree.ElementTree as ET

import numpy as np

from .boosting import StrongClassifier, WeakClassifier
from .cascade import CascadeModel, CascadeStage
from .errors import (CascadeXmlError, ModelFormatError, ModelInvariantError,
                     ModelTruncationError, ModelVersionError, UnsupportedCascadeError)
from .haar import FeatureKind, HaarFeature

MAGIC = b"HCSC"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHHHI")
_STAGE = struct.Struct("<dI")
_WEAK = struct.Struct("<BHHHHbdd")

_KIND_DIVISORS = {
    FeatureKind.TWO_RECT_HORIZONTAL: (2, 1),
    FeatureKind.TWO_RECT_VERTICAL: (1, 2),
    FeatureKind.THREE_RECT_HORIZONTAL: (3, 1),
    FeatureKind.THREE_RECT_VERTICAL: (1, 3),
    FeatureKind.FOUR_RECT_CHECKERBOARD: (2, 2),
}


def save_model(model: CascadeModel) -> bytes:
    out = [_HEADER.pack(MAGIC, FORMAT_VERSION, model.window_w, model.window_h,
                        len(model.stages))]
    for stage in model.stages:
        out.append(_STAGE.pack(stage.threshold, len(stage.classifier.weaks)))
        for alpha, weak in stage.classifier.weaks:
            f = weak.feature
            out.append(_WEAK.pack(int(f.kind), f.x, f.y, f.w, f.h,
                                  weak.polarity, weak.threshold, alpha))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: struct.Struct):
        end = self.pos + fmt.size
        if end > len(self.data):
            raise ModelTruncationError(
                f"model data truncated at byte {self.pos}: "
                f"need {fmt.size} more bytes, have {len(self.data) - self.pos}"
            )
        vals = fmt.unpack_from(self.data, self.pos)
        self.pos = end
        return vals


def _validate_feature(kind_code: int, x: int, y: int, w: int, h: int,
                      win_w: int, win_h: int) -> HaarFeature:
    try:
        kind = FeatureKind(kind_code)
    except ValueError:
        raise ModelInvariantError(f"unknown feature kind code {kind_code}") from None
    dw, dh = _KIND_DIVISORS[kind]
    if w < dw or h < dh or w % dw or h % dh:
        raise ModelInvariantError(
            f"feature extent {w}x{h} incompatible with kind {kind.name}")
    if x + w > win_w or y + h > win_h:
        raise ModelInvariantError(
            f"feature at ({x},{y}) size {w}x{h} exceeds the {win_w}x{win_h} base window")
    return HaarFeature(kind, x, y, w, h)


def load_model(data: bytes) -> CascadeModel:
    """Decode a native model; validates every structural invariant."""
    reader = _Reader(data)
    magic, version, win_w, win_h, n_stages = reader.take(_HEADER)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ModelVersionError(
            f"unsupported model format version {version} (supported: {FORMAT_VERSION})")
    if win_w < 1 or win_h < 1:
        raise ModelInvariantError(f"invalid base window {win_w}x{win_h}")
    stages = []
    for _ in range(n_stages):
        threshold, n_weaks = reader.take(_STAGE)
        weaks: list[tuple[float, WeakClassifier]] = []
        for _ in range(n_weaks):
            kind_code, x, y, w, h, polarity, weak_threshold, alpha = reader.take(_WEAK)
            feature = _validate_feature(kind_code, x, y, w, h, win_w, win_h)
            if polarity not in (-1, 1):
                raise ModelInvariantError(f"invalid polarity {polarity}")
            if not (math.isfinite(alpha) and alpha >= 0.0):
                raise ModelInvariantError(f"alpha {alpha} must be finite and >= 0")
            weaks.append((alpha, WeakClassifier(feature, weak_threshold, polarity)))
        strong = StrongClassifier(weaks, 0.5 * sum(a for a, _ in weaks))
        try:
            stages.append(CascadeStage(strong, threshold))
        except ValueError as exc:
            raise ModelInvariantError(str(exc)) from None
    return CascadeModel(win_w, win_h, stages)


def read_model(path) -> CascadeModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())


def _text(elem, tag: str, context: str) -> str:
    child = elem.find(tag)
    if child is None or child.text is None:
        raise UnsupportedCascadeError(f"missing <{tag}> in {context}")
    return child.text.strip()


def _weight_map(rects: list[tuple[int, int, int, int, float]]):
    """Per-pixel net weight over the rect union's bounding box."""
    bx = min(r[0] for r in rects)
    by = min(r[1] for r in rects)
    bx2 = max(r[0] + r[2] for r in rects)
    by2 = max(r[1] + r[3] for r in rects)
    grid = np.zeros((by2 - by, bx2 - bx), dtype=np.float64)
    for x, y, w, h, wgt in rects:
        grid[y - by:y - by + h, x - bx:x - bx + w] += wgt
    return bx, by, bx2 - bx, by2 - by, grid


def _kind_template(kind: FeatureKind, w: int, h: int) -> np.ndarray | None:
    dw, dh = _KIND_DIVISORS[kind]
    if w % dw or h % dh:
        return None
    t = np.zeros((h, w), dtype=np.float64)
    if kind == FeatureKind.TWO_RECT_HORIZONTAL:
        t[:, :w // 2] = 1.0
        t[:, w // 2:] = -1.0
    elif kind == FeatureKind.TWO_RECT_VERTICAL:
        t[:h // 2, :] = 1.0
        t[h // 2:, :] = -1.0
    elif kind == FeatureKind.THREE_RECT_HORIZONTAL:
        t[:, :] = 1.0
        t[:, w // 3:2 * w // 3] = -2.0
    elif kind == FeatureKind.THREE_RECT_VERTICAL:
        t[:, :] = 1.0
        t[h // 3:2 * h // 3, :] = -2.0
    else:
        t[:h // 2, :w // 2] = 1.0
        t[:h // 2, w // 2:] = -1.0
        t[h // 2:, :w // 2] = -1.0
        t[h // 2:, w // 2:] = 1.0
    return t


def _canonicalize_feature(rects) -> tuple[HaarFeature, int]:
    """Match a legacy weighted-rect list to (five-kind feature, sign)."""
    bx, by, bw, bh, grid = _weight_map(rects)
    for kind in FeatureKind:
        template = _kind_template(kind, bw, bh)
        if template is None:
            continue
        if np.allclose(grid, template, atol=1e-6):
            return HaarFeature(kind, bx, by, bw, bh), 1
        if np.allclose(grid, -template, atol=1e-6):
            return HaarFeature(kind, bx, by, bw, bh), -1
    raise UnsupportedCascadeError(
        f"unsupported feature kind: rect list {rects} matches none of the "
        f"five supported neighborhood patterns")


def _parse_node(node, win_area: int, index: str) -> tuple[float, float, WeakClassifier]:
    """One depth-1 tree node -> (alpha, constant part, weak classifier)."""
    for forbidden in ("left_node", "right_node"):
        if node.find(forbidden) is not None:
            raise UnsupportedCascadeError(
                f"tree depth > 1 at {index}: only stump cascades are supported")
    feature_elem = node.find("feature")
    if feature_elem is None:
        raise UnsupportedCascadeError(f"missing <feature> in {index}")
    tilted = feature_elem.find("tilted")
    if tilted is not None and tilted.text and int(tilted.text.strip()):
        raise UnsupportedCascadeError(f"tilted feature at {index} is unsupported")
    rects_elem = feature_elem.find("rects")
    if rects_elem is None:
        raise UnsupportedCascadeError(f"missing <rects> in {index}")
    rects = []
    for r in rects_elem:
        parts = (r.text or "").split()
        if len(parts) != 5:
            raise UnsupportedCascadeError(f"malformed rect entry {r.text!r} in {index}")
        try:
            x, y, w, h = (int(p) for p in parts[:4])
            wgt = float(parts[4])
        except ValueError:
            raise UnsupportedCascadeError(
                f"non-numeric rect entry {r.text!r} in {index}") from None
        rects.append((x, y, w, h, wgt))
    if not rects:
        raise UnsupportedCascadeError(f"empty rect list in {index}")
    feature, sign = _canonicalize_feature(rects)

    node_threshold = float(_text(node, "threshold", index))
    left = float(_text(node, "left_val", index))
    right = float(_text(node, "right_val", index))

    # Legacy values compare per-pixel-averaged sums against threshold*stddev;
    # rescale by the window area to match raw sums over stddev*area ratio.
    threshold = node_threshold * win_area
    if sign < 0:
        polarity, threshold = -1, -threshold
    else:
        polarity = 1
    # value = right + (left - right) * [condition]; fold the constant part
    # into the stage threshold and keep alpha nonnegative.
    if left >= right:
        alpha, base = left - right, right
    else:
        alpha, base = right - left, left
        polarity = -polarity
    return alpha, base, WeakClassifier(feature, threshold, polarity)


def parse_legacy_cascade_xml(data: bytes) -> CascadeModel:
    """Import a legacy stump-based haar-cascade XML file."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise CascadeXmlError(f"malformed XML: {exc}") from None
    if root.tag != "opencv_storage":
        raise UnsupportedCascadeError(
            f"unsupported root element <{root.tag}>, expected <opencv_storage>")
    classifier = None
    for child in root:
        if child.get("type_id") == "opencv-haar-classifier":
            classifier = child
            break
        if child.get("type_id") == "opencv-cascade-classifier" or child.tag == "cascade":
            raise UnsupportedCascadeError(
                "newer cascade dialect is unsupported; only the legacy "
                "stump-based haar dialect can be imported")
    if classifier is None:
        raise UnsupportedCascadeError("no opencv-haar-classifier element found")

    size_parts = _text(classifier, "size", "cascade header").split()
    if len(size_parts) != 2:
        raise UnsupportedCascadeError(f"malformed <size> {size_parts}")
    win_w, win_h = int(size_parts[0]), int(size_parts[1])
    win_area = win_w * win_h

    stages_elem = classifier.find("stages")
    if stages_elem is None:
        raise UnsupportedCascadeError("missing <stages>")
    stages: list[CascadeStage] = []
    for si, stage_elem in enumerate(stages_elem):
        trees = stage_elem.find("trees")
        if trees is None:
            raise UnsupportedCascadeError(f"missing <trees> in stage {si}")
        weaks: list[tuple[float, WeakClassifier]] = []
        base_sum = 0.0
        for ti, tree in enumerate(trees):
            nodes = list(tree)
            if len(nodes) != 1:
                raise UnsupportedCascadeError(
                    f"tree depth > 1 in stage {si} tree {ti}: "
                    f"{len(nodes)} nodes, expected 1")
            alpha, base, weak = _parse_node(nodes[0], win_area,
                                            f"stage {si} tree {ti}")
            base_sum += base
            weaks.append((alpha, weak))
        stage_threshold = float(_text(stage_elem, "stage_threshold", f"stage {si}"))
        strong = StrongClassifier(weaks, 0.5 * sum(a for a, _ in weaks))
        try:
            stages.append(CascadeStage(strong, stage_threshold - base_sum))
        except ValueError as exc:
            raise UnsupportedCascadeError(f"stage {si}: {exc}") from None
    model = CascadeModel(win_w, win_h, stages)
    # Round-trip through the native validator so imports obey all invariants.
    return load_model(save_model(model))
