"""Triangle meshes, landmark types, and mesh file IO (OBJ, PLY, STL)."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    LengthMismatch,
    MalformedGeometry,
    NonFiniteCoordinate,
    UnreadableFile,
    UnsupportedFormat,
    WriteFailure,
)

FALLBACK_NORMAL = (0.0, 0.0, 1.0)


class LandmarkClass(enum.IntEnum):
    """The six landmark classes; the integer value is the map channel."""

    Mesial = 0
    Distal = 1
    Cusp = 2
    Inner = 3
    Outer = 4
    Facial = 5

    @classmethod
    def parse(cls, name: str) -> "LandmarkClass":
        from .errors import UnknownClass

        try:
            return cls[name]
        except KeyError:
            raise UnknownClass(f"unknown landmark class {name!r}") from None


NUM_CLASSES = len(LandmarkClass)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangle mesh.

    ``vertices`` is (V, 3) float64 in mm, ``faces`` is (F, 3) int64. The
    vertex adjacency is derived lazily as a CSR pair ``(indptr, indices)``
    with every neighbor list sorted ascending.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(f):
            if f.min() < 0 or f.max() >= len(v):
                raise MalformedGeometry(
                    f"face index out of range for {len(v)} vertices"
                )
            degenerate = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degenerate.any():
                raise MalformedGeometry(
                    f"degenerate face at index {int(np.flatnonzero(degenerate)[0])}"
                )
        if not np.isfinite(v).all():
            raise MalformedGeometry("non-finite vertex coordinate")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", _readonly(f))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as (E, 2) with ``i < j``, sorted."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return _readonly(np.unique(e, axis=0).reshape(-1, 2))

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        e = self.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n_vertices), out=indptr[1:])
        return _readonly(indptr), _readonly(dst)

    def neighbors(self, i: int) -> np.ndarray:
        indptr, indices = self.csr
        return indices[indptr[i]:indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        indptr, indices = self.csr
        return [indices[indptr[i]:indptr[i + 1]].tolist() for i in range(self.n_vertices)]

    @cached_property
    def normals(self) -> np.ndarray:
        return _readonly(compute_vertex_normals(self))

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        """Same connectivity, new positions."""
        return TriangleMesh(vertices, self.faces)


def compute_vertex_normals(mesh: TriangleMesh) -> np.ndarray:
    """Area-weighted unit vertex normals.

    The unnormalized face cross product has length twice the face area, so
    summing it per vertex gives the area weighting directly. Vertices with a
    zero sum (isolated, or cancelling faces) get ``FALLBACK_NORMAL``.
    """
    v, f = mesh.vertices, mesh.faces
    acc = np.zeros_like(v)
    if len(f):
        fn = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        # sort by vertex so the summation order does not depend on face order
        vid = f.reshape(-1)
        contrib = np.repeat(fn, 3, axis=0)
        keys = np.lexsort((contrib[:, 2], contrib[:, 1], contrib[:, 0], vid))
        np.add.at(acc, vid[keys], contrib[keys])
    norm = np.linalg.norm(acc, axis=1)
    ok = norm > 1e-300
    out = np.empty_like(acc)
    out[ok] = acc[ok] / norm[ok, None]
    out[~ok] = FALLBACK_NORMAL
    return out


@dataclass
class LandmarkSet:
    """Per-class lists of 3D points (mm). Every class key is always present."""

    points: dict[LandmarkClass, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        fixed = {}
        for c in LandmarkClass:
            p = np.asarray(self.points.get(c, np.empty((0, 3))), dtype=np.float64)
            p = p.reshape(-1, 3)
            if not np.isfinite(p).all():
                raise NonFiniteCoordinate(f"non-finite coordinate in class {c.name}")
            fixed[c] = p
        self.points = fixed

    def __getitem__(self, c: LandmarkClass) -> np.ndarray:
        return self.points[LandmarkClass(c)]

    def __len__(self) -> int:
        return sum(len(p) for p in self.points.values())

    def map_points(self, fn) -> "LandmarkSet":
        return LandmarkSet({c: fn(p) if len(p) else p.copy() for c, p in self.points.items()})

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All points as one (N, 3) array plus their class channel per row."""
        pts = [self.points[c] for c in LandmarkClass]
        cls = [np.full(len(p), int(c)) for c, p in zip(LandmarkClass, pts)]
        return np.concatenate(pts), np.concatenate(cls).astype(np.int64)

    @classmethod
    def from_stacked(cls, points: np.ndarray, classes: np.ndarray) -> "LandmarkSet":
        return cls({c: points[classes == int(c)] for c in LandmarkClass})


# ---------------------------------------------------------------------------
# file IO

_FORMATS = ("obj", "ply", "stl")


def _detect_format(path: Path, head: bytes) -> str:
    ext = path.suffix.lower().lstrip(".")
    if ext in _FORMATS:
        return ext
    if head.startswith(b"ply"):
        return "ply"
    if head.lstrip().startswith(b"solid"):
        return "stl"
    if b"\nv " in head or head.startswith(b"v "):
        return "obj"
    if len(head) >= 84:
        return "stl"
    raise UnsupportedFormat(f"cannot detect mesh format of {path}")


def load_mesh(path, format: str = "auto") -> TriangleMesh:
    """Read an OBJ, PLY (ASCII or binary little-endian) or STL mesh."""
    path = Path(path)
    fmt = format.lower()
    if fmt not in _FORMATS + ("auto",):
        raise UnsupportedFormat(f"unsupported mesh format {format!r}")
    try:
        data = path.read_bytes()
    except OSError as e:
        raise UnreadableFile(f"{path}: {e.strerror or e}") from e
    if fmt == "auto":
        fmt = _detect_format(path, data[:512])
    try:
        if fmt == "obj":
            v, f = _parse_obj(data)
        elif fmt == "ply":
            v, f = _parse_ply(data)
        else:
            v, f = _parse_stl(data)
    except (ValueError, IndexError, struct.error, UnicodeDecodeError) as e:
        raise MalformedGeometry(f"{path}: {e}") from e
    return TriangleMesh(v, f)


def _triangulate(poly: list[int]) -> list[list[int]]:
    return [[poly[0], poly[k], poly[k + 1]] for k in range(1, len(poly) - 1)]


def _parse_obj(data: bytes):
    verts, faces = [], []
    for line in data.decode("utf-8", errors="replace").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                i = int(tok.split("/")[0])
                # negative indices are relative to the current vertex count
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise ValueError("face with fewer than 3 vertices")
            faces.extend(_triangulate(idx))
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply(data: bytes):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise ValueError("missing PLY header")
    body_start = data.index(b"\n", end) + 1
    header = data[:end].decode("ascii").splitlines()
    fmt = None
    elements: list[tuple[str, int, list]] = []
    for line in header:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if parts[1] == "list":
                elements[-1][2].append((parts[4], "list", parts[2], parts[3]))
            else:
                elements[-1][2].append((parts[2], parts[1]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValueError(f"unsupported PLY encoding {fmt!r}")

    verts = np.empty((0, 3))
    faces: list[list[int]] = []
    if fmt == "ascii":
        tokens = data[body_start:].split()
        pos = 0
        for name, count, props in elements:
            if all(p[1] != "list" for p in props):
                k = len(props) * count
                if pos + k > len(tokens):
                    raise ValueError("PLY body shorter than header declares")
                arr = np.array(tokens[pos:pos + k], dtype=np.float64).reshape(count, len(props))
                pos += k
                if name == "vertex":
                    names = [p[0] for p in props]
                    verts = arr[:, [names.index("x"), names.index("y"), names.index("z")]]
                continue
            if name == "face" and len(props) == 1:
                # common case: every face is a triangle
                k = 4 * count
                chunk = np.array(tokens[pos:pos + k], dtype=np.int64).reshape(-1, 4) if pos + k <= len(tokens) else None
                if chunk is not None and len(chunk) == count and (chunk[:, 0] == 3).all():
                    faces.extend(chunk[:, 1:].tolist())
                    pos += k
                    continue
            key = _face_key(props) if name == "face" else None
            for _ in range(count):
                row = {}
                for p in props:
                    if p[1] == "list":
                        n = int(tokens[pos])
                        row[p[0]] = [int(t) for t in tokens[pos + 1:pos + 1 + n]]
                        pos += 1 + n
                    else:
                        row[p[0]] = float(tokens[pos])
                        pos += 1
                if key is not None:
                    faces.extend(_triangulate(row[key]))
            if pos > len(tokens):
                raise ValueError("PLY body shorter than header declares")
    else:
        pos = body_start
        for name, count, props in elements:
            if all(p[1] != "list" for p in props):
                dt = np.dtype([(p[0], "<" + _PLY_TYPES[p[1]]) for p in props])
                need = dt.itemsize * count
                if pos + need > len(data):
                    raise ValueError("truncated PLY body")
                arr = np.frombuffer(data, dtype=dt, count=count, offset=pos)
                pos += need
                if name == "vertex":
                    verts = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
            else:
                key = _face_key(props) if name == "face" else None
                if key is not None and len(props) == 1:
                    ct = np.dtype("<" + _PLY_TYPES[props[0][2]])
                    it = np.dtype("<" + _PLY_TYPES[props[0][3]])
                    tri = np.dtype([("n", ct), ("i", it, 3)])
                    if pos + tri.itemsize * count <= len(data):
                        arr = np.frombuffer(data, tri, count, pos)
                        if (arr["n"] == 3).all():
                            faces.extend(arr["i"].astype(np.int64).tolist())
                            pos += tri.itemsize * count
                            continue
                for _ in range(count):
                    row = {}
                    for p in props:
                        if p[1] == "list":
                            ct = np.dtype("<" + _PLY_TYPES[p[2]])
                            it = np.dtype("<" + _PLY_TYPES[p[3]])
                            n = int(np.frombuffer(data, ct, 1, pos)[0])
                            pos += ct.itemsize
                            row[p[0]] = np.frombuffer(data, it, n, pos).astype(np.int64).tolist()
                            pos += it.itemsize * n
                        else:
                            t = np.dtype("<" + _PLY_TYPES[p[1]])
                            row[p[0]] = np.frombuffer(data, t, 1, pos)[0]
                            pos += t.itemsize
                    if key is not None:
                        faces.extend(_triangulate(row[key]))
    return verts.reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _face_key(props) -> str:
    for p in props:
        if p[1] == "list" and p[0] in ("vertex_indices", "vertex_index"):
            return p[0]
    raise ValueError("face element without vertex_indices")


def _parse_stl(data: bytes):
    if len(data) >= 84:
        (n,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * n:
            rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
            tris = np.frombuffer(data, rec, n, 84)["v"].astype(np.float64)
            return _weld_exact(tris.reshape(-1, 3))
    text = data.decode("ascii", errors="replace")
    if not text.lstrip().startswith("solid"):
        raise ValueError("neither binary nor ASCII STL")
    pts = [
        [float(x) for x in line.split()[1:4]]
        for line in text.splitlines()
        if line.strip().startswith("vertex")
    ]
    if len(pts) % 3:
        raise ValueError("ASCII STL vertex count not a multiple of 3")
    return _weld_exact(np.array(pts, dtype=np.float64).reshape(-1, 3))


def _weld_exact(corners: np.ndarray):
    """Merge bitwise-identical corner positions, keeping first-seen order."""
    if not len(corners):
        return corners.reshape(-1, 3), np.empty((0, 3), dtype=np.int64)
    keys = np.ascontiguousarray(corners).view(np.dtype((np.void, 24))).ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    # relabel unique ids by first occurrence
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return corners[np.sort(first)], rank[inverse.ravel()].reshape(-1, 3)


def save_mesh(mesh: TriangleMesh, path, format: str = "auto", colors=None) -> None:
    """Write a mesh. ASCII formats print 9 significant digits; STL is binary.

    ``colors`` is an optional (V, 3) uint8 array, only honored for PLY.
    """
    path = Path(path)
    fmt = path.suffix.lower().lstrip(".") if format == "auto" else format.lower()
    if fmt not in _FORMATS:
        raise UnsupportedFormat(f"unsupported mesh format {fmt!r}")
    if fmt == "obj":
        lines = ["v %.9g %.9g %.9g" % tuple(p) for p in mesh.vertices]
        lines += ["f %d %d %d" % tuple(f + 1) for f in mesh.faces]
        payload = ("\n".join(lines) + "\n").encode()
    elif fmt == "ply":
        payload = _ply_ascii(mesh, colors)
    else:
        tris = mesh.vertices[mesh.faces].astype("<f4")
        rec = np.zeros(len(tris), dtype=[("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        rec["v"] = tris
        rec["n"] = np.cross(
            mesh.vertices[mesh.faces[:, 1]] - mesh.vertices[mesh.faces[:, 0]],
            mesh.vertices[mesh.faces[:, 2]] - mesh.vertices[mesh.faces[:, 0]],
        ) if len(tris) else 0
        payload = b"dentalmarks".ljust(80, b" ") + struct.pack("<I", len(tris)) + rec.tobytes()
    _write_bytes(path, payload)


def _ply_ascii(mesh: TriangleMesh, colors=None) -> bytes:
    head = ["ply", "format ascii 1.0", f"element vertex {mesh.n_vertices}",
            "property float x", "property float y", "property float z"]
    if colors is not None:
        colors = np.asarray(colors)
        if colors.shape != (mesh.n_vertices, 3):
            raise LengthMismatch("color array must be (V, 3)")
        head += ["property uchar red", "property uchar green", "property uchar blue"]
    head += [f"element face {mesh.n_faces}", "property list uchar int vertex_indices", "end_header"]
    rows = []
    for i, p in enumerate(mesh.vertices):
        row = "%.9g %.9g %.9g" % tuple(p)
        if colors is not None:
            row += " %d %d %d" % tuple(int(c) for c in colors[i])
        rows.append(row)
    rows += ["3 %d %d %d" % tuple(f) for f in mesh.faces]
    return ("\n".join(head + rows) + "\n").encode()


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        path.write_bytes(payload)
    except OSError as e:
        raise WriteFailure(f"{path}: {e.strerror or e}") from e


def heatmap_colors(scalar) -> np.ndarray:
    """Linear blue-to-red colormap over [min, max]; constant fields get the midpoint."""
    s = np.asarray(scalar, dtype=np.float64)
    lo, hi = (s.min(), s.max()) if len(s) else (0.0, 0.0)
    frac = np.full(len(s), 0.5) if hi <= lo else (s - lo) / (hi - lo)
    red = np.rint(255 * frac)
    return np.stack([red, np.zeros_like(red), 255 - red], axis=1).astype(np.uint8)


def save_heatmap_ply(mesh: TriangleMesh, scalar, path) -> None:
    scalar = np.asarray(scalar, dtype=np.float64).reshape(-1)
    if len(scalar) != mesh.n_vertices:
        raise LengthMismatch(f"{len(scalar)} values for {mesh.n_vertices} vertices")
    _write_bytes(Path(path), _ply_ascii(mesh, heatmap_colors(scalar)))
