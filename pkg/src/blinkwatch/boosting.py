"""Decision-stump weak learners and AdaBoost strong-classifier training.

Stump search uses the sort-and-scan method over precomputed feature
values. Training compares values unnormalized; lighting normalization is
applied when samples are prepared (dividing by the patch's standard
deviation, which is equivalent because feature weights cancel the mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError
from .haar import HaarFeature, eval_feature
from .imaging import GrayImage, IntegralImage, Rect, compute_integral, window_stats

_EPS_FLOOR = 1e-10


@dataclass
class LabeledSample:
    """A base-window-sized training patch with its boosting weight."""

    integral: IntegralImage
    label: int  # +1 positive, -1 negative
    weight: float = 1.0
    norm: float = 1.0  # patch stddev floored at 1, applied to feature values


def make_sample(patch: GrayImage, label: int, weight: float = 1.0) -> LabeledSample:
    integral = compute_integral(patch)
    _, var = window_stats(integral, Rect(0, 0, patch.width, patch.height))
    return LabeledSample(integral, label, weight, max(math.sqrt(var), 1.0))


@dataclass(frozen=True)
class WeakClassifier:
    """Thresholded single feature: predicts 1 iff polarity*value < polarity*threshold."""

    feature: HaarFeature
    threshold: float
    polarity: int

    def predict_value(self, value: float) -> int:
        return 1 if self.polarity * value < self.polarity * self.threshold else 0

    def predict(self, integral: IntegralImage, ox: int = 0, oy: int = 0,
                scale: float = 1.0, norm: float | None = None) -> int:
        return self.predict_value(eval_feature(self.feature, integral, ox, oy, scale, norm))


@dataclass
class StrongClassifier:
    """AdaBoost-weighted vote of weak classifiers.

    Predicts positive iff sum(alpha * h) >= threshold; the default
    threshold is half the alpha sum.
    """

    weaks: list[tuple[float, WeakClassifier]]
    threshold: float
    rounds_log: list = field(default_factory=list, repr=False, compare=False)

    @property
    def alpha_sum(self) -> float:
        return sum(a for a, _ in self.weaks)

    def response(self, integral: IntegralImage, ox: int = 0, oy: int = 0,
                 scale: float = 1.0, norm: float | None = None) -> float:
        return sum(a * w.predict(integral, ox, oy, scale, norm) for a, w in self.weaks)

    def predict(self, integral: IntegralImage, ox: int = 0, oy: int = 0,
                scale: float = 1.0, norm: float | None = None) -> bool:
        return self.response(integral, ox, oy, scale, norm) >= self.threshold


@dataclass(frozen=True)
class StumpFit:
    threshold: float
    polarity: int
    error: float
    degenerate: bool = False


def train_stump(values: np.ndarray, labels: np.ndarray,
                weights: np.ndarray) -> StumpFit:
    """Best (threshold, polarity) for one feature's precomputed values.

    Sort-and-scan over the n+1 threshold gaps; weighted error of the
    winner is always <= 0.5 since the two polarities are complementary.
    Single-class input returns a constant classifier flagged degenerate.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    if not math.isclose(float(weights.sum()), 1.0, abs_tol=1e-9):
        raise ValueError("sample weights must sum to 1")
    pos = labels > 0
    if pos.all():
        return StumpFit(math.inf, 1, 0.0, degenerate=True)
    if not pos.any():
        return StumpFit(-math.inf, 1, 0.0, degenerate=True)

    order = np.argsort(values, kind="stable")
    v = values[order]
    wp = np.where(pos[order], weights[order], 0.0)
    wn = np.where(pos[order], 0.0, weights[order])
    tp = wp.sum()
    tn = wn.sum()
    n = len(v)
    sp = np.concatenate(([0.0], np.cumsum(wp)))
    sn = np.concatenate(([0.0], np.cumsum(wn)))
    # err_a: predict positive below the gap (polarity +1)
    err_a = (tp - sp) + sn
    err_b = sp + (tn - sn)
    err = np.minimum(err_a, err_b)
    valid = np.ones(n + 1, dtype=bool)
    valid[1:n] = v[1:] > v[:-1]
    err = np.where(valid, err, np.inf)
    j = int(np.argmin(err))
    polarity = 1 if err_a[j] <= err_b[j] else -1
    if j == 0:
        threshold = float(v[0]) - 1.0
    elif j == n:
        threshold = float(v[-1]) + 1.0
    else:
        threshold = (float(v[j - 1]) + float(v[j])) / 2.0
    return StumpFit(threshold, polarity, float(err[j]))


class FeatureValueTable:
    """Feature-major value matrix over a fixed sample set.

    Values are computed in fixed-size feature chunks (the full matrix for
    a 24x24 window would be 162,336 x n and does not fit naively); chunk
    results are cached when the whole table stays under `cache_limit`
    bytes, otherwise recomputed on every pass.
    """

    def __init__(self, samples: list[LabeledSample], features: list[HaarFeature],
                 chunk_size: int = 2048, cache_limit: int = 1 << 30):
        if not samples:
            raise ValueError("no samples")
        h = samples[0].integral.height
        w = samples[0].integral.width
        for s in samples:
            if s.integral.width != w or s.integral.height != h:
                raise ValueError("all sample patches must match the base window size")
        self.n = len(samples)
        self.features = features
        self.chunk_size = chunk_size
        self._table_w = w + 1
        self._ii_flat = np.stack([s.integral.ii.reshape(-1) for s in samples])
        self._norms = np.array([s.norm for s in samples], dtype=np.float64)
        n_feat = len(features)
        bytes_needed = 2 * self.n * n_feat * 8
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] | None = (
            {} if bytes_needed <= cache_limit else None
        )

    def _corner_terms(self, features: list[HaarFeature]) -> tuple[np.ndarray, np.ndarray]:
        k_max = 16  # up to 4 rects x 4 corners
        idx = np.zeros((len(features), k_max), dtype=np.int64)
        coef = np.zeros((len(features), k_max), dtype=np.float64)
        tw = self._table_w
        for i, f in enumerate(features):
            k = 0
            for r, wgt in f.rects():
                x0, y0, x1, y1 = r.x, r.y, r.x + r.w, r.y + r.h
                for cy, cx, sign in ((y1, x1, 1.0), (y0, x0, 1.0), (y0, x1, -1.0), (y1, x0, -1.0)):
                    idx[i, k] = cy * tw + cx
                    coef[i, k] = sign * wgt
                    k += 1
        return idx, coef

    def _compute_chunk(self, start: int) -> tuple[np.ndarray, np.ndarray]:
        feats = self.features[start:start + self.chunk_size]
        idx, coef = self._corner_terms(feats)
        gathered = self._ii_flat[:, idx]  # (n, F, K)
        values = np.einsum("nfk,fk->nf", gathered.astype(np.float64), coef)
        values /= self._norms[:, None]
        order = np.argsort(values, axis=0, kind="stable")
        return values, order

    def chunks(self):
        """Yield (start_index, values (n,F), sort order (n,F)) per chunk."""
        for start in range(0, len(self.features), self.chunk_size):
            if self._cache is not None:
                if start not in self._cache:
                    self._cache[start] = self._compute_chunk(start)
                yield start, *self._cache[start]
            else:
                yield start, *self._compute_chunk(start)

    def column(self, feature_index: int) -> np.ndarray:
        start = (feature_index // self.chunk_size) * self.chunk_size
        if self._cache is not None and start in self._cache:
            values, _ = self._cache[start]
            return values[:, feature_index - start]
        idx, coef = self._corner_terms([self.features[feature_index]])
        gathered = self._ii_flat[:, idx[0]].astype(np.float64)
        return (gathered @ coef[0]) / self._norms


class ArrayValueTable:
    """Value-table protocol over a plain (samples x features) matrix.

    Lets the boosting machinery run on arbitrary precomputed feature
    values (toy problems, unit tests) without any image plumbing.
    """

    def __init__(self, values: np.ndarray, features: list | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("value matrix must be 2-D (samples x features)")
        self.n = self.values.shape[0]
        self.features = (features if features is not None
                         else list(range(self.values.shape[1])))
        self._order = np.argsort(self.values, axis=0, kind="stable")

    def chunks(self):
        yield 0, self.values, self._order

    def column(self, feature_index: int) -> np.ndarray:
        return self.values[:, feature_index]


@dataclass
class BoostRound:
    feature_index: int
    alpha: float
    error: float
    threshold: float
    polarity: int
    train_error: float
    error_bound: float


class AdaBoostTrainer:
    """Incremental AdaBoost over a fixed sample set and feature pool.

    Rounds can be added one at a time, which the cascade trainer uses to
    grow a stage until its detection/false-positive targets are met.
    """

    def __init__(self, samples: list[LabeledSample], features: list[HaarFeature],
                 chunk_size: int = 2048, cache_limit: int = 1 << 30):
        labels = np.array([s.label for s in samples], dtype=np.int64)
        weights = np.array([s.weight for s in samples], dtype=np.float64)
        table = FeatureValueTable(samples, features, chunk_size, cache_limit)
        self._init_from_table(table, labels, weights)

    @classmethod
    def from_value_matrix(cls, values: np.ndarray, labels,
                          weights=None) -> "AdaBoostTrainer":
        """Boost over precomputed feature values instead of image patches."""
        values = np.asarray(values, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if weights is None:
            weights = np.full(len(labels), 1.0 / len(labels))
        trainer = cls.__new__(cls)
        trainer._init_from_table(ArrayValueTable(values), labels,
                                 np.asarray(weights, dtype=np.float64))
        return trainer

    def _init_from_table(self, table, labels: np.ndarray, weights: np.ndarray):
        if not ((labels > 0).any() and (labels < 0).any()):
            raise TrainingError("boosting needs both positive and negative samples")
        if weights.min() < 0:
            raise TrainingError("sample weights must be nonnegative")
        self.labels = labels
        self.table = table
        self.weights = weights / weights.sum()
        self.rounds: list[BoostRound] = []
        self.weaks: list[tuple[float, WeakClassifier]] = []
        self._response = np.zeros(len(labels), dtype=np.float64)
        self._bound = 1.0
        self.exhausted = False  # set once a perfect round ends boosting

    def _best_stump(self) -> tuple[int, float]:
        """Global minimum-weighted-error feature; ties go to the lowest index."""
        wts = self.weights
        pos = self.labels > 0
        wp_full = np.where(pos, wts, 0.0)
        wn_full = np.where(pos, 0.0, wts)
        tp = wp_full.sum()
        tn = wn_full.sum()
        best_err = np.inf
        best_index = -1
        for start, values, order in self.table.chunks():
            n, n_feat = values.shape
            vs = np.take_along_axis(values, order, axis=0)
            sp = np.vstack([np.zeros(n_feat), np.cumsum(wp_full[order], axis=0)])
            sn = np.vstack([np.zeros(n_feat), np.cumsum(wn_full[order], axis=0)])
            err = np.minimum((tp - sp) + sn, sp + (tn - sn))
            invalid = np.zeros((n + 1, n_feat), dtype=bool)
            invalid[1:n] = vs[1:] <= vs[:-1]
            err[invalid] = np.inf
            per_feature = err.min(axis=0)
            j = int(np.argmin(per_feature))
            if per_feature[j] < best_err:
                best_err = float(per_feature[j])
                best_index = start + j
        return best_index, best_err

    def add_round(self) -> BoostRound:
        if self.exhausted:
            raise TrainingError("boosting already terminated by a perfect round")
        self.weights = self.weights / self.weights.sum()
        index, _ = self._best_stump()
        values = self.table.column(index)
        fit = train_stump(values, self.labels, self.weights)
        eps = fit.error
        if eps >= 0.5:
            raise TrainingError(
                f"best weak classifier has weighted error {eps:.4f} >= 0.5 "
                f"(feature {index}); the feature pool cannot separate the data"
            )
        weak = WeakClassifier(self.table.features[index], fit.threshold, fit.polarity)
        beta = max(eps, _EPS_FLOOR) / (1.0 - eps)
        alpha = math.log(1.0 / beta)

        h = (fit.polarity * values < fit.polarity * fit.threshold).astype(np.int64)
        correct = h == (self.labels > 0).astype(np.int64)
        self.weights = np.where(correct, self.weights * beta, self.weights)

        self.weaks.append((alpha, weak))
        self._response += alpha * h
        half = 0.5 * sum(a for a, _ in self.weaks)
        predicted_pos = self._response >= half
        train_error = float(np.mean(predicted_pos != (self.labels > 0)))
        self._bound *= 2.0 * math.sqrt(max(eps, 0.0) * (1.0 - eps))
        rnd = BoostRound(index, alpha, eps, fit.threshold, fit.polarity,
                         train_error, self._bound)
        self.rounds.append(rnd)
        if eps == 0.0:
            self.exhausted = True
        return rnd

    def strong(self) -> StrongClassifier:
        return StrongClassifier(list(self.weaks), 0.5 * sum(a for a, _ in self.weaks),
                                rounds_log=list(self.rounds))

    def responses(self) -> np.ndarray:
        """Current strong-classifier vote per training sample."""
        return self._response.copy()


def adaboost_train(samples: list[LabeledSample], features: list[HaarFeature],
                   rounds: int, chunk_size: int = 2048,
                   cache_limit: int = 1 << 30) -> StrongClassifier:
    """Train a strong classifier for a fixed number of boosting rounds.

    Stops early if a round finds a perfect stump; raises TrainingError if
    the best stump of a round cannot beat chance.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    trainer = AdaBoostTrainer(samples, features, chunk_size, cache_limit)
    for _ in range(rounds):
        trainer.add_round()
        if trainer.exhausted:
            break
    return trainer.strong()
