"""Edge-graph geodesic distance fields, clamping, and square-root sharpening."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .errors import NonPositiveTau, ShapeMismatch, VariantMismatch
from .mesh import NUM_CLASSES, TriangleMesh


class Variant(enum.IntEnum):
    RawClamped = 0
    Sharpened = 1

    @property
    def upper(self):
        return None if self is Variant.RawClamped else 1.0


@dataclass(frozen=True, eq=False)
class DistanceMap:
    """Per-vertex, per-class distances: ``values`` has shape (V, 6).

    RawClamped values are mm in [0, tau]; Sharpened values are unitless in
    [0, 1]. ``tau`` is kept on both variants for provenance.
    """

    values: np.ndarray
    variant: Variant
    tau: float

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[1] != NUM_CLASSES:
            raise ShapeMismatch(f"distance map must be (V, {NUM_CLASSES}), got {v.shape}")
        if not self.tau > 0:
            raise NonPositiveTau(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "values", v)

    @property
    def n_vertices(self) -> int:
        return self.values.shape[0]

    @property
    def value_range(self) -> tuple[float, float]:
        return (0.0, float(self.tau) if self.variant is Variant.RawClamped else 1.0)

    def column(self, c) -> np.ndarray:
        return self.values[:, int(c)]


def edge_lengths(mesh: TriangleMesh) -> np.ndarray:
    """Euclidean length of every CSR adjacency entry."""
    indptr, indices = mesh.csr
    rows = np.repeat(np.arange(mesh.n_vertices), np.diff(indptr))
    return np.linalg.norm(mesh.vertices[indices] - mesh.vertices[rows], axis=1)


def snap_to_vertices(mesh: TriangleMesh, points) -> tuple[np.ndarray, np.ndarray]:
    """Nearest vertex (lowest index on ties) and its distance for each point."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    idx = np.empty(len(pts), dtype=np.int64)
    off = np.empty(len(pts))
    for k, p in enumerate(pts):
        d = np.linalg.norm(mesh.vertices - p, axis=1)
        idx[k] = int(np.argmin(d))
        off[k] = d[idx[k]]
    return idx, off


def multi_source_geodesic(mesh: TriangleMesh, sources, limit: float = np.inf) -> np.ndarray:
    """Distance from every vertex to the nearest source along mesh edges.

    Each source is snapped to its nearest vertex and seeded with the snap
    offset; a virtual root joined to the snapped vertices by offset-weighted
    edges turns the multi-source search into one Dijkstra run. Unreachable
    vertices, vertices farther than ``limit``, and every vertex when
    ``sources`` is empty get ``inf``.
    """
    n = mesh.n_vertices
    src_idx, src_off = snap_to_vertices(mesh, sources)
    if len(src_idx) == 0:
        return np.full(n, np.inf)
    seed = np.full(n, np.inf)
    np.minimum.at(seed, src_idx, src_off)
    roots = np.flatnonzero(np.isfinite(seed))
    indptr, indices = mesh.csr
    graph = sp.csr_matrix(
        (
            np.concatenate([edge_lengths(mesh), seed[roots]]),
            np.concatenate([indices, roots]),
            np.concatenate([indptr, [indptr[-1] + len(roots)]]),
        ),
        shape=(n + 1, n + 1),
    )
    # csgraph keeps explicit zero weights as edges, so zero offsets are fine
    dist = dijkstra(graph, directed=True, indices=n, limit=limit)
    return np.asarray(dist[:n], dtype=np.float64)


def clamp_distances(field, tau: float) -> np.ndarray:
    if not tau > 0:
        raise NonPositiveTau(f"tau must be positive, got {tau}")
    return np.minimum(np.asarray(field, dtype=np.float64), tau)


def sharpen(dmap: DistanceMap) -> DistanceMap:
    """Square root, normalized by sqrt(tau) so values land in [0, 1]."""
    if dmap.variant is not Variant.RawClamped:
        raise VariantMismatch("sharpen expects a RawClamped map")
    out = np.sqrt(np.asarray(dmap.values, dtype=np.float64)) / math.sqrt(dmap.tau)
    return DistanceMap(out, Variant.Sharpened, dmap.tau)
