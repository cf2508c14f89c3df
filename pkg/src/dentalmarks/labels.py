"""Distance-map labels from ground-truth landmarks, plus landmark and map files."""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .defaults import TAU_MM
from .errors import (
    BadMagic,
    MalformedJson,
    NonFiniteCoordinate,
    TruncatedFile,
    UnreadableFile,
    VersionMismatch,
    VertexCountMismatch,
    WriteFailure,
)
from .geodesic import DistanceMap, Variant, clamp_distances, multi_source_geodesic, sharpen
from .mesh import NUM_CLASSES, LandmarkClass, LandmarkSet, TriangleMesh

DMAP_MAGIC = b"DMAP"
DMAP_VERSION = 1
_DMAP_HEADER = struct.Struct("<4sBBIIf")


def make_distance_labels(
    mesh: TriangleMesh, gt: LandmarkSet, tau: float = TAU_MM, sharpened: bool = False
) -> DistanceMap:
    # beyond tau everything clamps to tau, so the search can stop there
    cols = [clamp_distances(multi_source_geodesic(mesh, gt[c], limit=tau), tau) for c in LandmarkClass]
    raw = DistanceMap(np.stack(cols, axis=1), Variant.RawClamped, tau)
    return sharpen(raw) if sharpened else raw


# ---------------------------------------------------------------------------
# landmark JSON


def landmarks_to_json(lms: LandmarkSet, extras=None) -> dict:
    """Serialize to the landmark schema.

    ``extras`` optionally maps class -> list of per-point dicts merged into
    each record (used for detection output).
    """
    records = []
    for c in LandmarkClass:
        for k, p in enumerate(lms[c]):
            rec = {"class": c.name, "position": [float(x) for x in p]}
            if extras is not None:
                rec.update(extras[c][k])
            records.append(rec)
    return {"version": 1, "landmarks": records}


def landmarks_from_json(doc) -> LandmarkSet:
    if not isinstance(doc, dict) or not isinstance(doc.get("landmarks"), list):
        raise MalformedJson("expected an object with a 'landmarks' list")
    if doc.get("version", 1) != 1:
        raise MalformedJson(f"unsupported landmark schema version {doc.get('version')!r}")
    pts: dict[LandmarkClass, list] = {c: [] for c in LandmarkClass}
    for rec in doc["landmarks"]:
        try:
            name, pos = rec["class"], rec["position"]
        except (TypeError, KeyError) as e:
            raise MalformedJson(f"landmark record missing field {e}") from None
        c = LandmarkClass.parse(name)
        if not isinstance(pos, list) or len(pos) != 3:
            raise MalformedJson("position must be a list of 3 numbers")
        try:
            xyz = [float(x) for x in pos]
        except (TypeError, ValueError):
            raise MalformedJson("position must be a list of 3 numbers") from None
        if not all(math.isfinite(x) for x in xyz):
            raise NonFiniteCoordinate(f"non-finite coordinate in {name} landmark")
        pts[c].append(xyz)
    return LandmarkSet({c: np.array(p, dtype=np.float64).reshape(-1, 3) for c, p in pts.items()})


def _read_json(path: Path):
    try:
        text = path.read_text()
    except OSError as e:
        raise UnreadableFile(f"{path}: {e.strerror or e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedJson(f"{path}: {e}") from e


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as e:
        raise WriteFailure(f"{path}: {e.strerror or e}") from e


def load_landmarks(path) -> LandmarkSet:
    return landmarks_from_json(_read_json(Path(path)))


def save_landmarks(lms: LandmarkSet, path, extras=None) -> None:
    # repr of a float round-trips exactly, which covers the 9-digit requirement
    _write_text(Path(path), json.dumps(landmarks_to_json(lms, extras), indent=2) + "\n")


# ---------------------------------------------------------------------------
# DMAP binary files


def encode_distance_map(dmap: DistanceMap) -> bytes:
    header = _DMAP_HEADER.pack(
        DMAP_MAGIC, DMAP_VERSION, int(dmap.variant), dmap.n_vertices, NUM_CLASSES, dmap.tau
    )
    return header + np.ascontiguousarray(dmap.values, dtype="<f4").tobytes()


def decode_distance_map(data: bytes, expected_vertex_count: int | None = None) -> DistanceMap:
    if len(data) < 4 or data[:4] != DMAP_MAGIC:
        raise BadMagic("not a DMAP file")
    if len(data) < _DMAP_HEADER.size:
        raise TruncatedFile("DMAP header is truncated")
    _, version, variant, n, n_classes, tau = _DMAP_HEADER.unpack_from(data)
    if version != DMAP_VERSION:
        raise VersionMismatch(f"DMAP version {version}, expected {DMAP_VERSION}")
    if n_classes != NUM_CLASSES:
        raise VersionMismatch(f"DMAP has {n_classes} classes, expected {NUM_CLASSES}")
    if variant not in (0, 1):
        raise VersionMismatch(f"unknown DMAP variant {variant}")
    if expected_vertex_count is not None and n != expected_vertex_count:
        raise VertexCountMismatch(f"map has {n} vertices, mesh has {expected_vertex_count}")
    need = _DMAP_HEADER.size + 4 * n * n_classes
    if len(data) < need:
        raise TruncatedFile(f"DMAP payload has {len(data) - _DMAP_HEADER.size} of {need - _DMAP_HEADER.size} bytes")
    values = np.frombuffer(data, dtype="<f4", count=n * n_classes, offset=_DMAP_HEADER.size)
    return DistanceMap(values.reshape(n, n_classes).astype(np.float32), Variant(variant), float(tau))


def save_distance_map(dmap: DistanceMap, path) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode_distance_map(dmap))
    except OSError as e:
        raise WriteFailure(f"{path}: {e.strerror or e}") from e


def load_distance_map(path, expected_vertex_count: int | None = None) -> DistanceMap:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise UnreadableFile(f"{path}: {e.strerror or e}") from e
    return decode_distance_map(data, expected_vertex_count)
