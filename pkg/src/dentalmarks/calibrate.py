"""Per-class grid search over NMS step count and threshold."""

from __future__ import annotations

import csv
import hashlib
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .defaults import K_GRID, RAW_T_GRID, T_GRID, THRESHOLD_SWEEP
from .errors import EmptyDataset, InvalidParams, LengthMismatch
from .geodesic import Variant
from .metrics import _check_thresholds, match_counts, pairwise_distances, precision_from_counts, recall_from_counts
from .mesh import LandmarkClass
from .nms import NmsParams, _Graph, check_threshold_scale, survivors

POOLINGS = ("micro", "macro")


@dataclass
class ClassCalibration:
    params: NmsParams
    precision: float
    recall: float
    # (len(k_grid), len(t_grid), 2): averaged precision and recall per cell
    grid: np.ndarray

    @property
    def product(self) -> float:
        return self.precision * self.recall


@dataclass
class CalibrationResult:
    k_grid: tuple[int, ...]
    t_grid: tuple[float, ...]
    sweep: tuple[float, ...]
    pooling: str
    fingerprint: str
    classes: dict[LandmarkClass, ClassCalibration]

    @property
    def params(self) -> dict[LandmarkClass, NmsParams]:
        return {c: cc.params for c, cc in self.classes.items()}

    def to_json(self) -> dict:
        chosen = {}
        grid = {}
        for c, cc in self.classes.items():
            chosen[c.name] = {**cc.params.to_json(), "precision": cc.precision,
                              "recall": cc.recall, "product": cc.product}
            grid[c.name] = [
                {"steps": k, "threshold": t,
                 "precision": float(cc.grid[a, b, 0]), "recall": float(cc.grid[a, b, 1])}
                for a, k in enumerate(self.k_grid) for b, t in enumerate(self.t_grid)
            ]
        return {
            "version": 1,
            "k_grid": list(self.k_grid),
            "t_grid": list(self.t_grid),
            "threshold_sweep": list(self.sweep),
            "pooling": self.pooling,
            "fingerprint": self.fingerprint,
            "chosen": chosen,
            "grid": grid,
        }

    def grid_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "steps", "threshold", "precision", "recall", "product"])
        for c, cc in self.classes.items():
            for a, k in enumerate(self.k_grid):
                for b, t in enumerate(self.t_grid):
                    p, r = cc.grid[a, b]
                    w.writerow([c.name, k, repr(t), repr(float(p)), repr(float(r)), repr(float(p * r))])
        return buf.getvalue()


def fingerprint_samples(samples) -> str:
    h = hashlib.sha256()
    for mesh, dmap, gt in samples:
        h.update(np.ascontiguousarray(mesh.vertices).tobytes())
        h.update(np.ascontiguousarray(mesh.faces).tobytes())
        h.update(np.ascontiguousarray(dmap.values, dtype="<f4").tobytes())
        h.update(np.ascontiguousarray(gt.stacked()[0]).tobytes())
    return h.hexdigest()


def _sample_counts(sample, classes, k_grid, t_grid, sweep) -> dict:
    """Counts of shape (K, T, sweep, 3) per class for one sample."""
    mesh, dmap, gt = sample
    g = _Graph(*mesh.csr)
    out = {}
    t_arr = np.asarray(t_grid)
    for c in classes:
        col = np.asarray(dmap.column(c))
        masks = survivors(g, col, k_grid)
        gt_pts = gt[c]
        counts = np.zeros((len(k_grid), len(t_grid), len(sweep), 3), dtype=np.int64)
        # survivors at the smallest K are a superset of the rest
        cand = np.flatnonzero(masks[k_grid[0]] & (col < t_arr.max()))
        dist = pairwise_distances(mesh.vertices[cand], gt_pts)
        cand_vals = col[cand]
        for a, k in enumerate(k_grid):
            alive = masks[k][cand]
            for b, t in enumerate(t_grid):
                rows = alive & (cand_vals < t)
                counts[a, b] = match_counts(dist[rows], sweep)
        out[c] = counts
    return out


def calibrate(
    samples,
    k_grid=K_GRID,
    t_grid=None,
    threshold_sweep=THRESHOLD_SWEEP,
    pooling: str = "micro",
    jobs: int = 1,
    classes=None,
    fingerprint: str | None = None,
) -> CalibrationResult:
    """Pick per-class ``(K, T)`` maximizing averaged precision times recall.

    ``samples`` is a sequence of ``(mesh, predicted DistanceMap, gt
    LandmarkSet)``. With micro pooling, TP/FP/FN are summed over samples
    before precision and recall are formed at each sweep threshold; macro
    pooling averages per-sample precision and recall instead. Ties go to the
    smaller K, then the smaller T.
    """
    samples = list(samples)
    if not samples:
        raise EmptyDataset("no calibration samples")
    if pooling not in POOLINGS:
        raise InvalidParams(f"pooling must be one of {POOLINGS}")
    k_grid = tuple(sorted(set(int(k) for k in k_grid)))
    if not k_grid or k_grid[0] < 1:
        raise InvalidParams("k_grid must hold positive integers")
    if t_grid is None:
        sharp = samples[0][1].variant is Variant.Sharpened
        t_grid = T_GRID if sharp else RAW_T_GRID
    t_grid = tuple(sorted(set(float(t) for t in t_grid)))
    if not t_grid or t_grid[0] < 0:
        raise InvalidParams("t_grid must hold non-negative thresholds")
    sweep = tuple(float(x) for x in _check_thresholds(threshold_sweep))
    classes = tuple(LandmarkClass) if classes is None else tuple(LandmarkClass(c) for c in classes)

    for mesh, dmap, _ in samples:
        if dmap.n_vertices != mesh.n_vertices:
            raise LengthMismatch(f"map has {dmap.n_vertices} rows, mesh has {mesh.n_vertices} vertices")
        check_threshold_scale(dmap, t_grid[-1])

    def work(s):
        return _sample_counts(s, classes, k_grid, t_grid, sweep)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_sample = list(pool.map(work, samples))
    else:
        per_sample = [work(s) for s in samples]

    result = {}
    for c in classes:
        stacked = np.stack([ps[c] for ps in per_sample])  # (S, K, T, sweep, 3)
        if pooling == "micro":
            pooled = stacked.sum(axis=0)
            p = precision_from_counts(pooled[..., 0], pooled[..., 1], pooled[..., 2])
            r = recall_from_counts(pooled[..., 0], pooled[..., 2])
        else:
            p = precision_from_counts(stacked[..., 0], stacked[..., 1], stacked[..., 2]).mean(axis=0)
            r = recall_from_counts(stacked[..., 0], stacked[..., 2]).mean(axis=0)
        grid = np.stack([p.mean(axis=-1), r.mean(axis=-1)], axis=-1)
        best = None
        for a in range(len(k_grid)):
            for b in range(len(t_grid)):
                prod = grid[a, b, 0] * grid[a, b, 1]
                if best is None or prod > best[0]:
                    best = (prod, a, b)
        _, a, b = best
        result[c] = ClassCalibration(
            NmsParams(k_grid[a], t_grid[b]), float(grid[a, b, 0]), float(grid[a, b, 1]), grid
        )
    return CalibrationResult(
        k_grid, t_grid, sweep, pooling,
        fingerprint if fingerprint is not None else fingerprint_samples(samples),
        result,
    )


def load_params_json(doc) -> dict[LandmarkClass, NmsParams]:
    """Per-class params from either a calibration report or a plain mapping.

    A plain mapping looks like ``{"Cusp": {"steps": 10, "threshold": 0.4}}``.
    """
    if not isinstance(doc, dict):
        raise InvalidParams("params file must hold a JSON object")
    table = doc.get("chosen", doc)
    if not isinstance(table, dict):
        raise InvalidParams("params file must hold a JSON object")
    out = {}
    for name, val in table.items():
        if name in ("version",):
            continue
        out[LandmarkClass.parse(name)] = NmsParams.from_json(val)
    return out
