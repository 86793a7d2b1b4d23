"""BioID dataset loading and the three good-detection-rate metrics.

GDR1 counts images whose detected eye pair passes the standard relative
criterion (worst per-eye error at most 0.25 of the true inter-eye
distance, boundary inclusive). GDR2 counts images on which a head-pitch
angle could be computed (two eyes found, non-degenerate geometry). GDR3
is their per-image conjunction, so GDR3 can never exceed GDR1 or GDR2.
Percentages are kept as exact quotients; rounding happens only when a
report is rendered.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import DatasetError
from .imaging import GrayImage, read_pgm

log = logging.getLogger(__name__)

EYE_MATCH_MAX_RELATIVE_ERROR = 0.25

Point = tuple[float, float]


@dataclass
class BioidSample:
    image_id: str
    image: GrayImage
    left: Point   # canonical: left.x < right.x in image coordinates
    right: Point


@dataclass
class GdrReport:
    approach: str
    detected: int
    total: int
    flags: list[bool]

    def __post_init__(self):
        if self.detected > self.total:
            raise ValueError("detected count exceeds total")

    @property
    def percentage(self) -> float:
        return 100.0 * self.detected / self.total


def parse_eye_file(text: str, context: str = "<eye data>") -> tuple[Point, Point]:
    """Parse an annotation body: comment header line(s), then LX LY RX RY.

    Coordinates are read in file order and then reordered canonically so
    the returned left eye has the smaller x.
    """
    values: list[float] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        for tok in line.split():
            try:
                values.append(float(tok))
            except ValueError:
                raise DatasetError(
                    f"{context}: non-numeric eye coordinate {tok!r}") from None
    if len(values) < 4:
        raise DatasetError(f"{context}: expected 4 eye coordinates, got {len(values)}")
    a = (values[0], values[1])
    b = (values[2], values[3])
    return (a, b) if a[0] <= b[0] else (b, a)


def load_bioid(directory, strict: bool = False) -> list[BioidSample]:
    """Load paired BioID_####.pgm / BioID_####.eye files, sorted by id.

    Images missing either file are skipped with a warning, or raise under
    strict mode.
    """
    root = Path(directory)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist")
    samples: list[BioidSample] = []
    pgms = sorted(root.glob("*.pgm"))
    for pgm_path in pgms:
        eye_path = pgm_path.with_suffix(".eye")
        if not eye_path.exists():
            if strict:
                raise DatasetError(f"{pgm_path.stem}: missing eye annotation file")
            log.warning("skipping %s: missing eye annotation file", pgm_path.stem)
            continue
        image = read_pgm(pgm_path)
        left, right = parse_eye_file(eye_path.read_text(), context=pgm_path.stem)
        for p in (left, right):
            if not (0 <= p[0] < image.width and 0 <= p[1] < image.height):
                raise DatasetError(
                    f"{pgm_path.stem}: eye coordinate {p} outside "
                    f"{image.width}x{image.height} image")
        samples.append(BioidSample(pgm_path.stem, image, left, right))
    samples.sort(key=lambda s: _numeric_sort_key(s.image_id))
    log.info("loaded %d samples from %s", len(samples), root)
    return samples


def _numeric_sort_key(image_id: str):
    m = re.search(r"(\d+)$", image_id)
    return (image_id[:m.start()], int(m.group(1))) if m else (image_id, -1)


def eye_match(detected: tuple[Optional[Point], Optional[Point]],
              truth: tuple[Point, Point],
              max_relative_error: float = EYE_MATCH_MAX_RELATIVE_ERROR) -> bool:
    """Relative eye-localization criterion; both eyes must be present."""
    dl, dr = detected
    tl, tr = truth
    if dl is None or dr is None:
        return False
    inter = math.dist(tl, tr)
    if inter <= 0:
        raise ValueError("truth eyes must be distinct")
    worst = max(math.dist(dl, tl), math.dist(dr, tr))
    return worst / inter <= max_relative_error


def compute_gdr1(eye_flags: Sequence[bool]) -> GdrReport:
    """Eye-detection rate: images whose eye pair passes the criterion."""
    flags = [bool(f) for f in eye_flags]
    if not flags:
        raise DatasetError("empty dataset: no eye detection results")
    return GdrReport("eye blink", sum(flags), len(flags), flags)


def compute_gdr2(pose_flags: Sequence[bool]) -> GdrReport:
    """Head-pose rate: images on which a pitch angle was computed."""
    flags = [bool(f) for f in pose_flags]
    if not flags:
        raise DatasetError("empty dataset: no head pose results")
    return GdrReport("head posture estimation", sum(flags), len(flags), flags)


def compute_gdr3(eye_flags: Sequence[bool], pose_flags: Sequence[bool]) -> GdrReport:
    """Joint rate: images passing both the eye and the head-pose criteria."""
    if len(eye_flags) != len(pose_flags):
        raise ValueError("flag vectors must have equal length")
    if not eye_flags:
        raise DatasetError("empty dataset: no joint results")
    flags = [bool(e) and bool(p) for e, p in zip(eye_flags, pose_flags)]
    return GdrReport("eye blink and head pose", sum(flags), len(flags), flags)


def render_report_table(reports: Sequence[GdrReport]) -> str:
    """Human-readable comparison table, one column per approach."""
    name_w = max(len("approach"), *(len(r.approach) for r in reports))
    lines = [
        f"{'approach':<{name_w}}  {'detected':>8}  {'total':>6}  {'GDR %':>7}",
        f"{'-' * name_w}  {'-' * 8}  {'-' * 6}  {'-' * 7}",
    ]
    for r in reports:
        lines.append(
            f"{r.approach:<{name_w}}  {r.detected:>8}  {r.total:>6}  {r.percentage:>7.2f}")
    return "\n".join(lines)


def report_csv(reports: Sequence[GdrReport]) -> str:
    """Machine-readable rows mirroring the comparison table's columns."""
    lines = ["approach,detected,total,gdr_percent"]
    for r in reports:
        lines.append(f"{r.approach},{r.detected},{r.total},{r.percentage!r}")
    return "\n".join(lines) + "\n"


def per_sample_csv(ids: Sequence[str], eye: GdrReport, pose: GdrReport,
                   joint: GdrReport) -> str:
    lines = ["image_id,eye_match,head_pose,joint"]
    for i, image_id in enumerate(ids):
        lines.append(f"{image_id},{int(eye.flags[i])},{int(pose.flags[i])},"
                     f"{int(joint.flags[i])}")
    return "\n".join(lines) + "\n"
