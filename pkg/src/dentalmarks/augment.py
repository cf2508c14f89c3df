"""Landmark-consistent rigid, scaling, and free-form-deformation augmentation."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .defaults import (
    FFD_DISPLACEMENT_MM,
    ROTATION_RANGE_RAD,
    SCALE_RANGE,
    TRANSLATION_RANGE_MM,
)
from .errors import InvalidLattice, NonPositiveScale
from .mesh import LandmarkSet, TriangleMesh

# zero-extent bounding-box axes are widened to this size
MIN_BOX_EXTENT_MM = 1e-6


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_axis_angle(cls, axis, angle, translation=(0, 0, 0), center=None) -> "RigidTransform":
        """Rotation about ``center`` (origin by default), then translation."""
        r = axis_angle_matrix(axis, angle)
        t = np.asarray(translation, dtype=np.float64)
        if center is not None:
            c = np.asarray(center, dtype=np.float64)
            t = t + c - r @ c
        return cls(r, t)

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return p @ self.rotation.T + self.translation

    def compose(self, first: "RigidTransform") -> "RigidTransform":
        """``self ∘ first``: apply ``first``, then ``self``."""
        return RigidTransform(self.rotation @ first.rotation, self.rotation @ first.translation + self.translation)


@dataclass(frozen=True)
class RigidSample:
    """The sampled parameters behind a random rigid transform, for replay."""

    axis: np.ndarray
    angle: float
    translation: np.ndarray
    center: np.ndarray

    def transform(self) -> RigidTransform:
        return RigidTransform.from_axis_angle(self.axis, self.angle, self.translation, self.center)

    def to_json(self) -> dict:
        return {
            "axis": self.axis.tolist(),
            "angle": self.angle,
            "translation": self.translation.tolist(),
            "center": self.center.tolist(),
        }


def sample_rigid(seed, center=(0.0, 0.0, 0.0)) -> RigidSample:
    rng = _rng(seed)
    axis = rng.standard_normal(3)
    while np.linalg.norm(axis) < 1e-12:
        axis = rng.standard_normal(3)
    axis = axis / np.linalg.norm(axis)
    angle = float(rng.uniform(-ROTATION_RANGE_RAD, ROTATION_RANGE_RAD))
    t = rng.uniform(-TRANSLATION_RANGE_MM, TRANSLATION_RANGE_MM, size=3)
    return RigidSample(axis, angle, t, np.asarray(center, dtype=np.float64))


def random_rigid(seed, center=(0.0, 0.0, 0.0)) -> RigidTransform:
    """Axis uniform on the sphere, angle in [-0.5, 0.5] rad, translation in [-5, 5] mm.

    The rotation is about ``center``; the CLI passes the mesh centroid.
    """
    return sample_rigid(seed, center).transform()


def apply_rigid(mesh: TriangleMesh, landmarks: LandmarkSet, transform: RigidTransform):
    return mesh.with_vertices(transform(mesh.vertices)), landmarks.map_points(transform)


def random_scale(seed) -> float:
    lo, hi = SCALE_RANGE
    return float(_rng(seed).uniform(lo, hi))


def apply_scale(mesh: TriangleMesh, landmarks: LandmarkSet, s: float):
    if not s > 0:
        raise NonPositiveScale(f"scale must be positive, got {s}")
    return mesh.with_vertices(mesh.vertices * s), landmarks.map_points(lambda p: p * s)


@dataclass(frozen=True)
class FfdLattice:
    """Axis-aligned control lattice; ``displacements`` has shape (nx, ny, nz, 3)."""

    box_min: np.ndarray
    box_max: np.ndarray
    displacements: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.displacements, dtype=np.float64)
        if d.ndim != 4 or d.shape[3] != 3 or min(d.shape[:3]) < 2:
            raise InvalidLattice(f"displacements must be (nx, ny, nz, 3) with each n >= 2, got {d.shape}")
        lo = np.asarray(self.box_min, dtype=np.float64)
        hi = np.asarray(self.box_max, dtype=np.float64)
        if not (lo < hi).all():
            raise InvalidLattice("box_min must be < box_max on every axis")
        object.__setattr__(self, "box_min", lo)
        object.__setattr__(self, "box_max", hi)
        object.__setattr__(self, "displacements", d)

    @property
    def grid_dims(self) -> tuple[int, int, int]:
        return tuple(self.displacements.shape[:3])

    def to_json(self) -> dict:
        return {
            "box_min": self.box_min.tolist(),
            "box_max": self.box_max.tolist(),
            "grid_dims": list(self.grid_dims),
            "displacements": self.displacements.reshape(-1, 3).tolist(),
        }


def bounding_box(points) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lo, hi = p.min(axis=0), p.max(axis=0)
    flat = hi - lo < MIN_BOX_EXTENT_MM
    lo = np.where(flat, lo - MIN_BOX_EXTENT_MM / 2, lo)
    hi = np.where(flat, hi + MIN_BOX_EXTENT_MM / 2, hi)
    return lo, hi


def make_ffd(mesh: TriangleMesh, grid_dims=(3, 3, 3), displacement_range: float = FFD_DISPLACEMENT_MM, seed=None) -> FfdLattice:
    dims = tuple(int(d) for d in grid_dims)
    if len(dims) != 3 or min(dims) < 2:
        raise InvalidLattice(f"grid_dims must be three integers >= 2, got {grid_dims}")
    lo, hi = bounding_box(mesh.vertices)
    disp = _rng(seed).uniform(-displacement_range, displacement_range, size=dims + (3,))
    return FfdLattice(lo, hi, disp)


def _bernstein(degree: int, u: np.ndarray) -> np.ndarray:
    """All degree-``degree`` Bernstein basis values, shape (len(u), degree+1).

    Powers are built by repeated multiplication so every row is computed
    with the same exact operation sequence.
    """
    v = 1.0 - u
    pu = [np.ones_like(u)]
    pv = [np.ones_like(u)]
    for _ in range(degree):
        pu.append(pu[-1] * u)
        pv.append(pv[-1] * v)
    return np.stack([comb(degree, i) * pu[i] * pv[degree - i] for i in range(degree + 1)], axis=1)


def ffd_points(lattice: FfdLattice, points) -> np.ndarray:
    """Trivariate Bernstein FFD; points outside the box use clamped coordinates."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    u = np.clip((p - lattice.box_min) / (lattice.box_max - lattice.box_min), 0.0, 1.0)
    nx, ny, nz = lattice.grid_dims
    bx = _bernstein(nx - 1, u[:, 0])
    by = _bernstein(ny - 1, u[:, 1])
    bz = _bernstein(nz - 1, u[:, 2])
    d = lattice.displacements
    offset = np.zeros_like(p)
    # fixed accumulation order, elementwise only
    for i in range(nx):
        for j in range(ny):
            bij = bx[:, i] * by[:, j]
            for k in range(nz):
                offset += (bij * bz[:, k])[:, None] * d[i, j, k]
    return p + offset


def apply_ffd(mesh: TriangleMesh, landmarks: LandmarkSet, lattice: FfdLattice):
    return mesh.with_vertices(ffd_points(lattice, mesh.vertices)), landmarks.map_points(
        lambda q: ffd_points(lattice, q)
    )
