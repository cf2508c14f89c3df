"""Where distance predictions enter the pipeline.

A synthetic degraded-ground-truth predictor for end-to-end runs, loading of
externally produced ``DMAP`` predictions, and PCA projection of per-vertex
features to RGB.
"""

from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    LengthMismatch,
    NonFiniteCoordinate,
    TooFewVertices,
    TruncatedFile,
    UnreadableFile,
    VersionMismatch,
    VertexCountMismatch,
    WriteFailure,
)
from .geodesic import DistanceMap, Variant
from .labels import load_distance_map
from .mesh import TriangleMesh
from .nms import _Graph

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1
_FEAT_HEADER = struct.Struct("<4sBII")


def blur_step(graph: _Graph, values: np.ndarray) -> np.ndarray:
    """Mean over each closed neighborhood, column-wise."""
    sums = np.add.reduceat(values[graph.indices], graph.indptr[:-1], axis=0)
    sizes = np.diff(graph.indptr).astype(np.float64)
    return sums / sizes[:, None]


def synthetic_predict(labels: DistanceMap, mesh: TriangleMesh, blur_iterations: int = 0,
                      noise_sigma: float = 0.0, seed=None) -> DistanceMap:
    """Degrade a label map: neighborhood-mean blur, Gaussian noise, clamp.

    With zero blur and zero noise the input values are returned unchanged.
    """
    if labels.n_vertices != mesh.n_vertices:
        raise LengthMismatch(f"labels have {labels.n_vertices} rows, mesh has {mesh.n_vertices} vertices")
    if blur_iterations < 0 or noise_sigma < 0:
        raise ValueError("blur_iterations and noise_sigma must be non-negative")
    if blur_iterations == 0 and noise_sigma == 0:
        return DistanceMap(labels.values.copy(), labels.variant, labels.tau)
    values = np.asarray(labels.values, dtype=np.float64)
    if blur_iterations and mesh.n_vertices:
        g = _Graph(*mesh.csr)
        for _ in range(blur_iterations):
            values = blur_step(g, values)
    if noise_sigma > 0:
        values = values + np.random.default_rng(seed).normal(0.0, noise_sigma, size=values.shape)
    lo, hi = labels.value_range
    return DistanceMap(np.clip(values, lo, hi), labels.variant, labels.tau)


def load_predictions(path, mesh: TriangleMesh) -> DistanceMap:
    dmap = load_distance_map(path, mesh.n_vertices)
    if dmap.variant is Variant.Sharpened:
        v = dmap.values
        if v.size and (v.min() < 0 or v.max() > 1):
            warnings.warn(f"{path}: Sharpened predictions fall outside [0, 1]", UserWarning, stacklevel=2)
    return dmap


def save_predictions(dmap: DistanceMap, path) -> None:
    from .labels import save_distance_map

    save_distance_map(dmap, path)


# ---------------------------------------------------------------------------
# features


def features_to_rgb(features) -> np.ndarray:
    """Project features onto their top three principal axes, scaled to [0, 1].

    Each axis is signed so its largest-magnitude coefficient is positive.
    Missing components (fewer than three feature dimensions) are zero, and
    any constant channel maps to 0.5.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("features must be a (V, h) array with h >= 1")
    if x.shape[0] < 3:
        raise TooFewVertices(f"need at least 3 vertices, got {x.shape[0]}")
    if not np.isfinite(x).all():
        raise NonFiniteCoordinate("non-finite feature value")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1][:3]
    comps = evecs[:, order]
    pivot = np.abs(comps).argmax(axis=0)
    signs = np.sign(comps[pivot, np.arange(comps.shape[1])])
    comps = comps * np.where(signs == 0, 1.0, signs)
    proj = np.zeros((x.shape[0], 3))
    proj[:, :comps.shape[1]] = centered @ comps
    rgb = np.full_like(proj, 0.5)
    for ch in range(3):
        lo, hi = proj[:, ch].min(), proj[:, ch].max()
        # relative tolerance so round-off in a degenerate direction stays constant
        if hi - lo > 1e-9 * max(1.0, np.abs(centered).max()):
            rgb[:, ch] = (proj[:, ch] - lo) / (hi - lo)
    return rgb


def encode_features(features) -> bytes:
    x = np.asarray(features)
    if x.ndim != 2:
        raise ValueError("features must be 2-dimensional")
    return _FEAT_HEADER.pack(FEAT_MAGIC, FEAT_VERSION, x.shape[0], x.shape[1]) + np.ascontiguousarray(x, dtype="<f4").tobytes()


def decode_features(data: bytes, expected_vertex_count: int | None = None) -> np.ndarray:
    if len(data) < 4 or data[:4] != FEAT_MAGIC:
        raise BadMagic("not a FEAT file")
    if len(data) < _FEAT_HEADER.size:
        raise TruncatedFile("FEAT header is truncated")
    _, version, n, h = _FEAT_HEADER.unpack_from(data)
    if version != FEAT_VERSION:
        raise VersionMismatch(f"FEAT version {version}, expected {FEAT_VERSION}")
    if expected_vertex_count is not None and n != expected_vertex_count:
        raise VertexCountMismatch(f"features have {n} rows, mesh has {expected_vertex_count} vertices")
    if len(data) < _FEAT_HEADER.size + 4 * n * h:
        raise TruncatedFile("FEAT payload is truncated")
    return np.frombuffer(data, "<f4", n * h, _FEAT_HEADER.size).reshape(n, h).astype(np.float32)


def save_features(features, path) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode_features(features))
    except OSError as e:
        raise WriteFailure(f"{path}: {e.strerror or e}") from e


def load_features(path, expected_vertex_count: int | None = None) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise UnreadableFile(f"{path}: {e.strerror or e}") from e
    return decode_features(data, expected_vertex_count)
