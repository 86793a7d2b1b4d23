"""Attentional cascade: staged classification, multi-scale scanning, NMS.

A window walks the stages in order and is rejected at the first stage
whose vote falls below that stage's threshold, so background regions are
discarded after very little work. Detection scans every position at a
geometric ladder of scales and merges survivors with greedy non-maximum
suppression.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boosting import AdaBoostTrainer, LabeledSample, StrongClassifier, make_sample
from .errors import TrainingError
from .haar import HaarFeature, _iround, enumerate_features
from .imaging import GrayImage, IntegralImage, Rect, compute_integral, window_stats

NMS_IOU_THRESHOLD = 0.3
NORM_FLOOR = 1.0  # window stddev floor for lighting normalization


@dataclass
class CascadeStage:
    classifier: StrongClassifier
    threshold: float  # replaces the classifier's default half-alpha-sum

    def __post_init__(self):
        if self.threshold > self.classifier.alpha_sum + 1e-12:
            raise ValueError("stage threshold exceeds the alpha sum; nothing could pass")


@dataclass
class CascadeModel:
    window_w: int
    window_h: int
    stages: list[CascadeStage] = field(default_factory=list)


@dataclass(frozen=True)
class Detection:
    rect: Rect
    score: float
    scale: float


@dataclass
class ScanStats:
    """Instrumentation for the early-exit behaviour of a scan."""

    windows: int = 0
    stage_evaluations: int = 0
    accepted: int = 0

    @property
    def mean_stages_evaluated(self) -> float:
        return self.stage_evaluations / self.windows if self.windows else 0.0


def window_norm(integral: IntegralImage, r: Rect, base_area: int | None = None) -> float:
    """Normalization factor for feature values over a window.

    The window's standard deviation (floored so division is safe)
    absorbs lighting; the area ratio against the base window absorbs the
    quadratic growth of raw rectangle sums with scale, so thresholds
    learned at base scale stay valid at every scale.
    """
    _, var = window_stats(integral, r)
    norm = max(math.sqrt(var), NORM_FLOOR)
    if base_area is not None:
        norm *= r.area / base_area
    return norm


def classify_window(model: CascadeModel, integral: IntegralImage,
                    ox: int, oy: int, scale: float = 1.0,
                    norm: float | None = None) -> tuple[bool, int]:
    """Run the cascade on one window; stop at the first failing stage.

    Returns (accepted, stages_passed). An empty cascade accepts every
    window with zero stages passed (documented convention).
    """
    win_w = _iround(model.window_w * scale)
    win_h = _iround(model.window_h * scale)
    if ox < 0 or oy < 0 or ox + win_w > integral.width or oy + win_h > integral.height:
        raise ValueError(
            f"window at ({ox},{oy}) scale {scale} out of bounds "
            f"for {integral.width}x{integral.height} image"
        )
    if norm is None:
        norm = window_norm(integral, Rect(ox, oy, win_w, win_h),
                           model.window_w * model.window_h)
    passed = 0
    for stage in model.stages:
        if stage.classifier.response(integral, ox, oy, scale, norm) < stage.threshold:
            return False, passed
        passed += 1
    return True, passed


def stage_response(stage: CascadeStage, integral: IntegralImage,
                   ox: int, oy: int, scale: float = 1.0,
                   norm: float | None = None) -> float:
    return stage.classifier.response(integral, ox, oy, scale, norm)


def iou(a: Rect, b: Rect) -> float:
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    iw = max(0, ix2 - ix)
    ih = max(0, iy2 - iy)
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def nms(detections: list[Detection],
        iou_threshold: float = NMS_IOU_THRESHOLD) -> list[Detection]:
    """Greedy suppression by score; overlaps above the IoU threshold lose.

    Output order is deterministic: score descending, then x, then y.
    """
    pending = sorted(detections, key=lambda d: (-d.score, d.rect.x, d.rect.y, d.rect.w))
    keep: list[Detection] = []
    for cand in pending:
        if all(iou(cand.rect, k.rect) <= iou_threshold for k in keep):
            keep.append(cand)
    return keep


def _scaled_weak_terms(stage: CascadeStage, scale: float, table_w: int):
    """Per-weak corner offsets/coefficients for a fixed scale.

    Corner offsets are relative to the flat index of a window origin, so
    one precomputation serves every window position at this scale.
    """
    terms = []
    for alpha, weak in stage.classifier.weaks:
        offs: list[int] = []
        coefs: list[float] = []
        for r, wgt in weak.feature.scaled_rects(scale, 0, 0):
            x0, y0, x1, y1 = r.x, r.y, r.x + r.w, r.y + r.h
            for cy, cx, sign in ((y1, x1, 1.0), (y0, x0, 1.0), (y0, x1, -1.0), (y1, x0, -1.0)):
                offs.append(cy * table_w + cx)
                coefs.append(sign * wgt)
        terms.append((alpha, weak.polarity, weak.threshold,
                      np.array(offs, dtype=np.int64), np.array(coefs, dtype=np.float64)))
    return terms


def _scan_one_scale(model: CascadeModel, integral: IntegralImage, scale: float,
                    step_fraction: float) -> tuple[list[Detection], int, int]:
    """All accepted windows at one scale, with window/stage-eval counts."""
    win_w = _iround(model.window_w * scale)
    win_h = _iround(model.window_h * scale)
    width, height = integral.width, integral.height
    if win_w > width or win_h > height or win_w < 1 or win_h < 1:
        return [], 0, 0
    step_x = max(1, _iround(step_fraction * win_w))
    step_y = max(1, _iround(step_fraction * win_h))
    xs = np.arange(0, width - win_w + 1, step_x, dtype=np.int64)
    ys = np.arange(0, height - win_h + 1, step_y, dtype=np.int64)
    oxs, oys = np.meshgrid(xs, ys)
    oxs = oxs.ravel()
    oys = oys.ravel()
    n = len(oxs)
    if n == 0:
        return [], 0, 0

    table_w = width + 1
    ii_flat = integral.ii.reshape(-1)
    sq_flat = integral.sq.reshape(-1)
    base = oys * table_w + oxs

    area = win_w * win_h
    c_br = win_h * table_w + win_w
    c_tr = win_w
    c_bl = win_h * table_w
    sums = ii_flat[base + c_br] - ii_flat[base + c_tr] - ii_flat[base + c_bl] + ii_flat[base]
    sqs = sq_flat[base + c_br] - sq_flat[base + c_tr] - sq_flat[base + c_bl] + sq_flat[base]
    mean = sums / area
    var = np.maximum(sqs / area - mean * mean, 0.0)
    norms = np.maximum(np.sqrt(var), NORM_FLOOR) * (area / (model.window_w * model.window_h))

    alive = np.arange(n)
    margins = np.zeros(n, dtype=np.float64)
    stage_evals = 0
    for stage in model.stages:
        if len(alive) == 0:
            break
        terms = _scaled_weak_terms(stage, scale, table_w)
        base_alive = base[alive]
        votes = np.zeros(len(alive), dtype=np.float64)
        for alpha, polarity, threshold, offs, coefs in terms:
            vals = np.zeros(len(alive), dtype=np.float64)
            for off, coef in zip(offs, coefs):
                vals += coef * ii_flat[base_alive + off]
            vals /= norms[alive]
            votes += alpha * (polarity * vals < polarity * threshold)
        stage_evals += len(alive)
        passed = votes >= stage.threshold
        margins[alive] = votes - stage.threshold
        alive = alive[passed]

    detections = [
        Detection(Rect(int(oxs[i]), int(oys[i]), win_w, win_h),
                  float(margins[i]), scale)
        for i in alive
    ]
    return detections, n, stage_evals


def _scale_ladder(model: CascadeModel, integral: IntegralImage,
                  scale_factor: float, min_size: int) -> list[float]:
    """Geometric ladder of scales, deduplicated by rounded window size."""
    scales: list[float] = []
    seen: set[tuple[int, int]] = set()
    start = max(1.0, min_size / model.window_w)
    k = 0
    while True:
        scale = start * scale_factor ** k
        win_w = _iround(model.window_w * scale)
        win_h = _iround(model.window_h * scale)
        if win_w > integral.width or win_h > integral.height:
            break
        key = (win_w, win_h)
        if key not in seen:
            seen.add(key)
            scales.append(scale)
        k += 1
    return scales


def detect_multiscale(model: CascadeModel, image: GrayImage,
                      scale_factor: float = 1.2, step_fraction: float = 0.05,
                      min_size: int | None = None, workers: int = 1,
                      stats: ScanStats | None = None) -> list[Detection]:
    """Sliding-window scan over all positions and a ladder of scales.

    Window sizes start at min_size (never below the base window) and grow
    by scale_factor; the stride is step_fraction of the window size. Each
    window is variance-normalized before classification and survivors are
    merged by NMS. Output is deterministic regardless of worker count.
    """
    if scale_factor <= 1.0:
        raise ValueError("scale_factor must be > 1")
    if not 0.0 < step_fraction <= 1.0:
        raise ValueError("step_fraction must be in (0, 1]")
    if min_size is None:
        min_size = model.window_w
    integral = compute_integral(image)
    scales = _scale_ladder(model, integral, scale_factor, min_size)

    if workers > 1 and len(scales) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda s: _scan_one_scale(model, integral, s, step_fraction), scales))
    else:
        results = [_scan_one_scale(model, integral, s, step_fraction) for s in scales]

    candidates: list[Detection] = []
    for dets, n_windows, n_evals in results:
        candidates.extend(dets)
        if stats is not None:
            stats.windows += n_windows
            stats.stage_evaluations += n_evals
    survivors = nms(candidates)
    if stats is not None:
        stats.accepted += len(candidates)
    return survivors


def detect_eyes_in_face(eye_model: CascadeModel, image: GrayImage, face: Rect,
                        scale_factor: float = 1.1, step_fraction: float = 0.05,
                        min_size: int | None = None,
                        workers: int = 1) -> tuple[Detection | None, Detection | None]:
    """Search the upper 60% of the face box; best candidate per half.

    Returns (left, right) in x-order; a half with no candidate yields
    None for that side.
    """
    if face.x < 0 or face.y < 0 or face.x + face.w > image.width \
            or face.y + face.h > image.height:
        raise ValueError(f"face rect {face} outside image")
    region_h = _iround(0.6 * face.h)
    if region_h < 1 or face.w < 1:
        return None, None
    region = Rect(face.x, face.y, face.w, region_h)
    sub = image.crop(region)
    dets = detect_multiscale(eye_model, sub, scale_factor, step_fraction,
                             min_size, workers)
    best: dict[str, Detection | None] = {"left": None, "right": None}
    half = region.w / 2
    for d in dets:
        shifted = Detection(
            Rect(d.rect.x + region.x, d.rect.y + region.y, d.rect.w, d.rect.h),
            d.score, d.scale)
        center = d.rect.x + d.rect.w / 2
        side = "left" if center < half else "right"
        cur = best[side]
        if cur is None or shifted.score > cur.score:
            best[side] = shifted
    return best["left"], best["right"]


def detection_center(d: Detection) -> tuple[float, float]:
    return d.rect.x + d.rect.w / 2, d.rect.y + d.rect.h / 2


@dataclass
class StageLog:
    index: int
    rounds: int
    threshold: float
    detection_rate: float
    fp_rate: float
    cumulative_fp: float
    negatives_left: int


@dataclass
class TrainResult:
    model: CascadeModel
    status: str  # "reached_target" or "negatives_exhausted"
    stage_logs: list[StageLog]

    @property
    def warning(self) -> str | None:
        if self.status == "negatives_exhausted":
            return "negative pool exhausted before reaching the overall false-positive target"
        return None


def train_cascade(pos: list[GrayImage], neg: list[GrayImage],
                  min_detection: float = 0.995, max_stage_fp: float = 0.5,
                  target_fp: float = 1e-5, max_rounds_per_stage: int = 40,
                  features: list[HaarFeature] | None = None,
                  chunk_size: int = 2048, cache_limit: int = 1 << 30,
                  progress=None) -> TrainResult:
    """Train an attentional cascade from positive/negative patch sets.

    Each stage grows round by round; its threshold is lowered until the
    detection rate on the positives reaches min_detection, and the stage
    is closed once its false-positive rate on the current negatives drops
    to max_stage_fp. Negatives are then rebuilt from the cascade's false
    positives, so later stages face only the hard examples. Training
    stops when the cumulative false-positive rate reaches target_fp or
    the negative pool is exhausted (model returned with warning status).
    """
    if not 0.5 < min_detection <= 1.0:
        raise ValueError("min_detection must be in (0.5, 1]")
    if not 0.0 < max_stage_fp < 1.0:
        raise ValueError("max_stage_fp must be in (0, 1)")
    if not 0.0 < target_fp < 1.0:
        raise ValueError("target_fp must be in (0, 1)")
    if not pos or not neg:
        raise TrainingError("both positive and negative patch sets are required")
    win_w, win_h = pos[0].width, pos[0].height
    for p in pos + neg:
        if p.width != win_w or p.height != win_h:
            raise TrainingError("all training patches must share the base window size")
    if features is None:
        features = enumerate_features(win_w, win_h)

    # Class-balanced initial boosting weights, renormalized per round.
    pos_samples = [make_sample(p, 1, 0.5 / len(pos)) for p in pos]
    neg_pool = [make_sample(p, -1, 1.0) for p in neg]

    stages: list[CascadeStage] = []
    logs: list[StageLog] = []
    negs_current = list(neg_pool)
    cum_fp = 1.0
    status = "reached_target"
    n_pos = len(pos_samples)

    while cum_fp > target_fp:
        if not negs_current:
            status = "negatives_exhausted"
            break
        neg_weight = 0.5 / len(negs_current)
        for s in negs_current:
            s.weight = neg_weight
        trainer = AdaBoostTrainer(pos_samples + negs_current, features,
                                  chunk_size, cache_limit)
        threshold = 0.0
        fp_rate = 1.0
        det_rate = 0.0
        rounds = 0
        while True:
            trainer.add_round()
            rounds += 1
            resp = trainer.responses()
            pos_resp = np.sort(resp[:n_pos])
            k = int(math.floor((1.0 - min_detection) * n_pos))
            threshold = float(pos_resp[k])
            det_rate = float(np.mean(resp[:n_pos] >= threshold))
            neg_resp = resp[n_pos:]
            fp_rate = float(np.mean(neg_resp >= threshold))
            if progress is not None:
                progress(len(stages), rounds, det_rate, fp_rate)
            if fp_rate <= max_stage_fp:
                break
            if trainer.exhausted:
                raise TrainingError(
                    f"stage {len(stages)}: boosting found a perfect stump but the "
                    f"false-positive rate {fp_rate:.3f} still exceeds {max_stage_fp}"
                )
            if rounds >= max_rounds_per_stage:
                raise TrainingError(
                    f"stage {len(stages)} missed its targets within "
                    f"{max_rounds_per_stage} rounds "
                    f"(detection {det_rate:.4f} >= {min_detection}, "
                    f"false-positive rate {fp_rate:.4f} > {max_stage_fp})"
                )
        stages.append(CascadeStage(trainer.strong(), threshold))
        cum_fp *= fp_rate
        assert fp_rate <= max_stage_fp  # stage acceptance guarantees this
        keep = np.asarray(trainer.responses()[n_pos:] >= threshold)
        negs_current = [s for s, k_ in zip(negs_current, keep) if k_]
        logs.append(StageLog(len(stages) - 1, rounds, threshold, det_rate,
                             fp_rate, cum_fp, len(negs_current)))

    model = CascadeModel(win_w, win_h, stages)
    return TrainResult(model, status, logs)
