"""Detection precision/recall at distance thresholds, threshold averaging, map MSE."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .defaults import THRESHOLD_SWEEP
from .errors import EmptyThresholds, NegativeThreshold, ShapeMismatch, VariantMismatch
from .geodesic import DistanceMap
from .mesh import LandmarkClass


def _pts(p) -> np.ndarray:
    return np.asarray(p, dtype=np.float64).reshape(-1, 3)


def pairwise_distances(a, b) -> np.ndarray:
    a, b = _pts(a), _pts(b)
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)


def precision_from_counts(tp, fp, fn):
    """Precision with the empty-detection convention.

    With no detections, precision is 1 if nothing was missed and 0 otherwise.
    """
    tp, fp, fn = (np.asarray(x) for x in (tp, fp, fn))
    denom = tp + fp
    empty = np.where(fn == 0, 1.0, 0.0)
    return np.where(denom > 0, tp / np.maximum(denom, 1), empty)


def recall_from_counts(tp, fn):
    tp, fn = np.asarray(tp), np.asarray(fn)
    denom = tp + fn
    return np.where(denom > 0, tp / np.maximum(denom, 1), 1.0)


def match_counts(dist: np.ndarray, thresholds, one_to_one: bool = False) -> np.ndarray:
    """TP/FP/FN per threshold from a (detections x gt) distance matrix.

    Returns an int array of shape (len(thresholds), 3). By default matching
    is set membership in both directions: a detection counts as TP if any
    ground truth lies within ``t``, and a ground truth is missed if no
    detection does.
    """
    t = np.asarray(thresholds, dtype=np.float64)
    n_det, n_gt = dist.shape
    if one_to_one:
        return np.array([_greedy_counts(dist, x) for x in t], dtype=np.int64).reshape(len(t), 3)
    det_near = dist.min(axis=1) if n_gt else np.full(n_det, np.inf)
    gt_near = dist.min(axis=0) if n_det else np.full(n_gt, np.inf)
    tp = (det_near[None, :] <= t[:, None]).sum(axis=1)
    fn = (gt_near[None, :] > t[:, None]).sum(axis=1)
    return np.stack([tp, n_det - tp, fn], axis=1).astype(np.int64)


def _greedy_counts(dist: np.ndarray, t: float) -> tuple[int, int, int]:
    n_det, n_gt = dist.shape
    pairs = [(dist[i, j], i, j) for i in range(n_det) for j in range(n_gt) if dist[i, j] <= t]
    pairs.sort()
    used_d, used_g = set(), set()
    for _, i, j in pairs:
        if i not in used_d and j not in used_g:
            used_d.add(i)
            used_g.add(j)
    tp = len(used_d)
    return tp, n_det - tp, n_gt - tp


def precision_recall_at(detections, gt, t: float, one_to_one: bool = False):
    """Returns ``(P, R, TP, FP, FN)`` at distance threshold ``t`` (mm)."""
    if t < 0:
        raise NegativeThreshold(f"threshold must be >= 0, got {t}")
    (tp, fp, fn), = match_counts(pairwise_distances(detections, gt), [t], one_to_one)
    p = float(precision_from_counts(tp, fp, fn))
    r = float(recall_from_counts(tp, fn))
    return p, r, int(tp), int(fp), int(fn)


@dataclass
class ClassCurve:
    precision: np.ndarray
    recall: np.ndarray
    counts: np.ndarray  # (T, 3): tp, fp, fn

    @property
    def avg_precision(self) -> float:
        return float(np.mean(self.precision))

    @property
    def avg_recall(self) -> float:
        return float(np.mean(self.recall))


@dataclass
class MetricsCurve:
    """Per-class and total curves over a threshold list.

    The total curve pools TP/FP/FN over all classes before dividing.
    """

    thresholds: np.ndarray
    classes: dict[LandmarkClass, ClassCurve]
    total: ClassCurve

    def summary(self) -> dict:
        out = {c.name: {"precision": cc.avg_precision, "recall": cc.avg_recall}
               for c, cc in self.classes.items()}
        return {
            "thresholds": [float(t) for t in self.thresholds],
            "classes": out,
            "total": {"precision": self.total.avg_precision, "recall": self.total.avg_recall},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "threshold", "precision", "recall", "tp", "fp", "fn"])
        rows = list(self.classes.items()) + [("total", self.total)]
        for c, cc in rows:
            name = c if isinstance(c, str) else c.name
            for k, t in enumerate(self.thresholds):
                tp, fp, fn = cc.counts[k]
                w.writerow([name, repr(float(t)), repr(float(cc.precision[k])),
                            repr(float(cc.recall[k])), int(tp), int(fp), int(fn)])
        return buf.getvalue()


def curve_from_counts(counts: np.ndarray) -> ClassCurve:
    counts = np.asarray(counts, dtype=np.int64)
    tp, fp, fn = counts[:, 0], counts[:, 1], counts[:, 2]
    return ClassCurve(precision_from_counts(tp, fp, fn).astype(np.float64),
                      recall_from_counts(tp, fn).astype(np.float64), counts)


def _check_thresholds(thresholds) -> np.ndarray:
    t = np.asarray(list(thresholds), dtype=np.float64)
    if t.size == 0:
        raise EmptyThresholds("threshold list is empty")
    if (t < 0).any():
        raise NegativeThreshold("thresholds must be >= 0")
    if (np.diff(t) < 0).any():
        raise ValueError("thresholds must be ascending")
    return t


def average_metrics(detections, gt, thresholds=THRESHOLD_SWEEP, one_to_one: bool = False) -> MetricsCurve:
    """Threshold-averaged precision and recall.

    ``detections`` and ``gt`` are ``LandmarkSet`` objects, or lists of them
    (one per sample, pooled by summing counts).
    """
    t = _check_thresholds(thresholds)
    dets = detections if isinstance(detections, (list, tuple)) else [detections]
    gts = gt if isinstance(gt, (list, tuple)) else [gt]
    if len(dets) != len(gts):
        raise ShapeMismatch("detections and ground truth lists differ in length")
    classes = {}
    total = np.zeros((len(t), 3), dtype=np.int64)
    for c in LandmarkClass:
        counts = np.zeros((len(t), 3), dtype=np.int64)
        for d, g in zip(dets, gts):
            counts += match_counts(pairwise_distances(d[c], g[c]), t, one_to_one)
        classes[c] = curve_from_counts(counts)
        total += counts
    return MetricsCurve(t, classes, curve_from_counts(total))


def map_mse(a: DistanceMap, b: DistanceMap) -> float:
    if a.values.shape != b.values.shape:
        raise ShapeMismatch(f"{a.values.shape} vs {b.values.shape}")
    if a.variant is not b.variant:
        raise VariantMismatch(f"{a.variant.name} vs {b.variant.name}")
    diff = np.asarray(a.values, dtype=np.float64) - np.asarray(b.values, dtype=np.float64)
    return float(np.mean(diff * diff))
