"""Synthetic meshes with planted landmarks for end-to-end checks and demos."""

from __future__ import annotations

import numpy as np

from .geodesic import multi_source_geodesic
from .mesh import LandmarkClass, LandmarkSet, TriangleMesh


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = np.array(verts, dtype=np.float64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = np.array(faces, dtype=np.int64)
    for _ in range(subdivisions):
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        mids = v[uniq[:, 0]] + v[uniq[:, 1]]
        mids /= np.linalg.norm(mids, axis=1, keepdims=True)
        m = inv.reshape(3, -1) + len(v)
        ab, bc, ca = m[0], m[1], m[2]
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        f = np.concatenate([
            np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
            np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1),
        ])
        v = np.concatenate([v, mids])
    return TriangleMesh(v * radius, f)


def grid_patch(nx: int, ny: int, spacing: float = 1.0, z: float = 0.0) -> TriangleMesh:
    """Flat triangulated grid in the z plane, counter-clockwise faces."""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="xy")
    verts = np.stack([xs.ravel(), ys.ravel(), np.full(nx * ny, z)], axis=1)
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            faces += [(a, a + 1, a + nx + 1), (a, a + nx + 1, a + nx)]
    return TriangleMesh(verts, np.array(faces))


def plant_landmarks(mesh: TriangleMesh, per_class, min_separation: float, seed) -> LandmarkSet:
    """Place landmarks on vertices, same-class pairs more than ``min_separation`` apart.

    Separation is measured with the edge-graph geodesic. ``per_class`` is an
    int or a mapping from class to count; classes may end up with fewer
    points if the mesh runs out of room.
    """
    rng = np.random.default_rng(seed)
    counts = per_class if isinstance(per_class, dict) else {c: per_class for c in LandmarkClass}
    out = {}
    for c in LandmarkClass:
        want = int(counts.get(c, 0))
        chosen: list[int] = []
        dist = np.full(mesh.n_vertices, np.inf)
        for i in rng.permutation(mesh.n_vertices):
            if len(chosen) >= want:
                break
            if dist[i] > min_separation:
                chosen.append(int(i))
                dist = np.minimum(dist, multi_source_geodesic(mesh, mesh.vertices[[i]], limit=min_separation))
        out[c] = mesh.vertices[chosen].copy()
    return LandmarkSet(out)
