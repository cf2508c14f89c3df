"""Fixed-size vertex subsets: uniform stratification and farthest-point sampling."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams


class SampleMethod(str, enum.Enum):
    Random = "random"
    FPS = "fps"


@dataclass(frozen=True)
class SampleSelection:
    indices: np.ndarray
    seed: int
    method: SampleMethod
    target_size: int

    def to_json(self) -> dict:
        return {
            "method": self.method.value,
            "seed": self.seed,
            "target_size": self.target_size,
            "indices": self.indices.tolist(),
        }


def _check_target(target_size: int) -> None:
    if target_size < 1:
        raise InvalidParams("target_size must be >= 1")


def stratify_random(mesh, target_size: int, seed: int) -> SampleSelection:
    """Uniform sample of vertex indices without replacement, returned ascending."""
    _check_target(target_size)
    n = mesh.n_vertices
    if n <= target_size:
        idx = np.arange(n, dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(n, size=target_size, replace=False)).astype(np.int64)
    return SampleSelection(idx, seed, SampleMethod.Random, target_size)


def farthest_point_sample(points, target_size: int, seed: int, start: int | None = None) -> SampleSelection:
    """Greedy farthest-point sampling under Euclidean distance.

    The first index is drawn uniformly from ``seed`` unless ``start`` is
    given. Each following index maximizes the distance to the selected set;
    ``np.argmax`` returns the lowest index among ties.
    """
    _check_target(target_size)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        raise InvalidParams("points must be non-empty")
    if start is None:
        start = int(np.random.default_rng(seed).integers(n))
    m = min(target_size, n)
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = start
    dist = np.linalg.norm(pts - pts[start], axis=1)
    # selected points are never re-picked, even among duplicates
    dist[start] = -1.0
    for k in range(1, m):
        nxt = int(np.argmax(dist))
        chosen[k] = nxt
        np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1), out=dist)
        dist[nxt] = -1.0
    return SampleSelection(chosen, seed, SampleMethod.FPS, target_size)
