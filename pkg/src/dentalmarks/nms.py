"""Topology-driven non-minima suppression over per-vertex distance maps.

One step replaces every vertex value with the minimum over its closed
neighborhood. After K synchronous steps a vertex keeps its original value
exactly when it is a minimum over its K-hop closed neighborhood, and it is
reported as a landmark when that value is also below the class threshold.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, LengthMismatch, VariantScaleMismatch
from .geodesic import DistanceMap, Variant
from .mesh import LandmarkClass, LandmarkSet, TriangleMesh


@dataclass(frozen=True)
class NmsParams:
    steps: int
    threshold: float
    equality_epsilon: float = 0.0

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidParams(f"steps must be a positive integer, got {self.steps}")
        if not self.threshold >= 0:
            raise InvalidParams(f"threshold must be >= 0, got {self.threshold}")
        if not self.equality_epsilon >= 0:
            raise InvalidParams("equality_epsilon must be >= 0")

    def to_json(self) -> dict:
        return {"steps": int(self.steps), "threshold": float(self.threshold),
                "equality_epsilon": float(self.equality_epsilon)}

    @classmethod
    def from_json(cls, d: dict) -> "NmsParams":
        try:
            return cls(int(d["steps"]), float(d["threshold"]), float(d.get("equality_epsilon", 0.0)))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParams(f"bad NMS params {d!r}") from e


@dataclass(frozen=True)
class Detection:
    vertex_index: int
    position: np.ndarray
    value: float


@dataclass
class DetectionResult:
    detections: dict[LandmarkClass, list[Detection]] = field(default_factory=dict)

    def __getitem__(self, c) -> list[Detection]:
        return self.detections.get(LandmarkClass(c), [])

    def landmarks(self) -> LandmarkSet:
        return LandmarkSet({
            c: np.array([d.position for d in self[c]], dtype=np.float64).reshape(-1, 3)
            for c in LandmarkClass
        })

    def extras(self) -> dict:
        return {c: [{"vertex_index": d.vertex_index, "value": d.value} for d in self[c]]
                for c in LandmarkClass}


class _Graph:
    """Closed neighborhoods (vertex itself first, then neighbors) in CSR form."""

    def __init__(self, indptr: np.ndarray, indices: np.ndarray):
        n = len(indptr) - 1
        deg = np.diff(indptr) + 1
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=self.indptr[1:])
        self.indices = np.empty(int(self.indptr[-1]), dtype=np.int64)
        self.indices[self.indptr[:-1]] = np.arange(n)
        own = np.ones(len(self.indices), dtype=bool)
        own[self.indptr[:-1]] = False
        self.indices[own] = indices
        self.n = n

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def step(self, values: np.ndarray) -> np.ndarray:
        if self.n == 0:
            return values.copy()
        return np.minimum.reduceat(values[self.indices], self.indptr[:-1])


def _graph_of(adjacency) -> _Graph:
    if isinstance(adjacency, TriangleMesh):
        return _Graph(*adjacency.csr)
    if isinstance(adjacency, _Graph):
        return adjacency
    if isinstance(adjacency, tuple) and len(adjacency) == 2 and isinstance(adjacency[0], np.ndarray):
        return _Graph(*adjacency)
    # list of neighbor lists
    deg = np.array([len(a) for a in adjacency], dtype=np.int64)
    indptr = np.zeros(len(deg) + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    flat = [j for a in adjacency for j in a]
    return _Graph(indptr, np.array(flat, dtype=np.int64))


def nms_step(adjacency, values) -> np.ndarray:
    """Closed-neighborhood minimum; returns a new array.

    ``adjacency`` may be a mesh, a CSR ``(indptr, indices)`` pair, or a list
    of neighbor lists.
    """
    g = _graph_of(adjacency)
    v = np.asarray(values)
    if v.shape != (g.n,):
        raise LengthMismatch(f"{v.shape[0] if v.ndim else 0} values for {g.n} vertices")
    return g.step(v)


def survivors(adjacency, values, steps) -> dict[int, np.ndarray]:
    """Survival masks for several step counts from one propagation run.

    Returns ``{k: mask}`` where ``mask[i]`` is true when vertex ``i`` still
    holds its original value after ``k`` steps.
    """
    g = _graph_of(adjacency)
    v = np.asarray(values)
    if v.shape != (g.n,):
        raise LengthMismatch(f"{len(v)} values for {g.n} vertices")
    wanted = sorted(set(int(k) for k in steps))
    out = {}
    cur = v
    done = 0
    for k in wanted:
        for _ in range(k - done):
            cur = g.step(cur)
        done = k
        out[k] = cur == v
    return out


def _survive_eps(g: _Graph, v: np.ndarray, steps: int, eps: float) -> np.ndarray:
    cur = v
    for _ in range(steps):
        cur = g.step(cur)
    if eps == 0:
        return cur == v
    return (v - cur) <= eps


def check_threshold_scale(dmap: DistanceMap, threshold: float, strict: bool = False) -> None:
    """Warn (or raise with ``strict``) when ``threshold`` lies outside the map's value range."""
    if dmap.variant is Variant.Sharpened and threshold > 1.0:
        msg = f"threshold {threshold} exceeds the [0, 1] range of a Sharpened map"
        if strict:
            raise VariantScaleMismatch(msg)
        warnings.warn(msg, VariantScaleMismatch, stacklevel=3)


def detect_class(graph, column: np.ndarray, params: NmsParams) -> np.ndarray:
    """Ascending vertex indices detected in one map column."""
    g = _graph_of(graph)
    v = np.asarray(column)
    if v.shape != (g.n,):
        raise LengthMismatch(f"{len(v)} values for {g.n} vertices")
    keep = _survive_eps(g, v, int(params.steps), params.equality_epsilon) & (v < params.threshold)
    return np.flatnonzero(keep)


def detect(mesh: TriangleMesh, dmap: DistanceMap, params, strict: bool = False,
           collapse_plateaus: bool = False) -> DetectionResult:
    """Run suppression per class.

    ``params`` is either one ``NmsParams`` for all classes or a mapping from
    ``LandmarkClass`` to ``NmsParams``. Classes missing from the mapping are
    skipped.
    """
    if dmap.n_vertices != mesh.n_vertices:
        raise LengthMismatch(f"map has {dmap.n_vertices} rows, mesh has {mesh.n_vertices} vertices")
    per_class = params if isinstance(params, dict) else {c: params for c in LandmarkClass}
    g = _Graph(*mesh.csr)
    result = {}
    for c in LandmarkClass:
        p = per_class.get(c)
        if p is None:
            result[c] = []
            continue
        check_threshold_scale(dmap, p.threshold, strict)
        col = dmap.column(c)
        idx = detect_class(g, col, p)
        if collapse_plateaus:
            idx = collapse_within_hops(g, idx, int(p.steps))
        result[c] = [Detection(int(i), mesh.vertices[i].copy(), float(col[i])) for i in idx]
    return DetectionResult(result)


def collapse_within_hops(graph, indices, hops: int) -> np.ndarray:
    """Keep the lowest-index detection of each group within ``hops`` edges.

    Scans detections in ascending order; each kept vertex suppresses every
    later detection within ``hops`` graph edges of it.
    """
    g = _graph_of(graph)
    removed = set()
    kept = []
    members = set(int(i) for i in indices)
    for i in sorted(members):
        if i in removed:
            continue
        kept.append(i)
        for j in k_hop_neighborhood(g, i, hops):
            if j != i and j in members:
                removed.add(j)
    return np.array(kept, dtype=np.int64)


def k_hop_neighborhood(graph, start: int, hops: int) -> set[int]:
    """Vertices within ``hops`` edges of ``start``, including ``start``."""
    g = _graph_of(graph)
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        i, d = frontier.popleft()
        if d == hops:
            continue
        for j in g.row(i).tolist():
            if j not in seen:
                seen.add(j)
                frontier.append((j, d + 1))
    return seen
