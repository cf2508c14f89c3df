"""Random meshes and brute-force oracles shared by the test modules."""

from collections import deque

import numpy as np
from scipy.spatial import Delaunay

from dentalmarks.mesh import TriangleMesh


def random_mesh(rng, n_vertices, drop_faces=0.0, scale=10.0):
    """Delaunay triangulation of random planar points, lifted with random heights.

    ``drop_faces`` removes that fraction of faces, which can leave isolated
    vertices and several connected components.
    """
    while True:
        xy = rng.uniform(0, scale, size=(n_vertices, 2))
        try:
            tri = Delaunay(xy)
        except Exception:
            continue
        break
    faces = tri.simplices
    if drop_faces > 0 and len(faces) > 1:
        keep = rng.uniform(size=len(faces)) >= drop_faces
        keep[rng.integers(len(faces))] = True
        faces = faces[keep]
    z = rng.uniform(-1, 1, size=(n_vertices, 1))
    return TriangleMesh(np.hstack([xy, z]), faces)


def floyd_warshall(mesh):
    n = mesh.n_vertices
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for i, j in mesh.edges:
        w = float(np.linalg.norm(mesh.vertices[i] - mesh.vertices[j]))
        d[i, j] = d[j, i] = w
    for k in range(n):
        d = np.minimum(d, d[:, k, None] + d[None, k, :])
    return d


def fw_multi_source(mesh, sources, apsp=None):
    """Snap each source by brute force, then take the all-pairs minimum."""
    apsp = floyd_warshall(mesh) if apsp is None else apsp
    out = np.full(mesh.n_vertices, np.inf)
    for p in np.asarray(sources, dtype=float).reshape(-1, 3):
        d = np.linalg.norm(mesh.vertices - p, axis=1)
        s = int(np.argmin(d))
        out = np.minimum(out, d[s] + apsp[s])
    return out


def hop_neighborhood(adj, start, k):
    seen = {start}
    q = deque([(start, 0)])
    while q:
        i, d = q.popleft()
        if d == k:
            continue
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                q.append((j, d + 1))
    return seen


def nms_oracle(mesh, values, k, t):
    """Vertices below ``t`` whose value is minimal over their k-hop neighborhood."""
    adj = mesh.adjacency
    out = []
    for i in range(mesh.n_vertices):
        if values[i] < t and all(values[i] <= values[j] for j in hop_neighborhood(adj, i, k)):
            out.append(i)
    return out


def path_mesh(n, spacing=1.0):
    """Strip of triangles whose bottom row is a straight path of ``n`` vertices.

    Vertices 0..n-1 lie on the x axis; a top row sits far enough away that
    shortest paths along the bottom row never detour through it.
    """
    bottom = [(i * spacing, 0.0, 0.0) for i in range(n)]
    top = [((i + 0.5) * spacing, 100.0 * spacing, 0.0) for i in range(n - 1)]
    faces = [(i, i + 1, n + i) for i in range(n - 1)]
    return TriangleMesh(np.array(bottom + top), np.array(faces))
