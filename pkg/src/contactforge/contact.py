"""Body-scene contact classification from mesh proximity and normal opposition.

A body vertex is in contact when its distance to the scene is at most
``delta_d`` (default 0.07 m) AND the angle between its normal and the closest
scene face's normal is at least ``delta_a`` (default 110 degrees). Both
comparisons are inclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import SpatialIndex, closest_point_query_many
from .mesh import BodyMesh, SceneMesh

DEFAULT_DELTA_D = 0.07   # meters
DEFAULT_DELTA_A = 110.0  # degrees


@dataclass(frozen=True)
class ContactThresholds:
    """delta_d: max distance to scene, meters. delta_a: min normal angle, degrees."""

    delta_d: float = DEFAULT_DELTA_D
    delta_a: float = DEFAULT_DELTA_A

    def __post_init__(self):
        if not self.delta_d > 0:
            raise ValueError(f"delta_d must be > 0, got {self.delta_d}")
        if not 0 < self.delta_a <= 180:
            raise ValueError(f"delta_a must be in (0, 180], got {self.delta_a}")


@dataclass(frozen=True)
class ContactVertexSet:
    """Per-contact-vertex query results, sorted by vertex index, no duplicates."""

    vertex_indices: np.ndarray  # (K,) int64, strictly increasing
    distances: np.ndarray       # (K,) meters, >= 0
    closest_faces: np.ndarray   # (K,) scene face index
    closest_points: np.ndarray  # (K, 3)

    def __post_init__(self):
        vi = np.asarray(self.vertex_indices, dtype=np.int64).reshape(-1)
        if vi.size and np.any(np.diff(vi) <= 0):
            raise ValueError("vertex indices must be strictly increasing")
        d = np.asarray(self.distances, dtype=np.float64).reshape(-1)
        if np.any(d < 0):
            raise ValueError("distances must be >= 0")
        cf = np.asarray(self.closest_faces, dtype=np.int64).reshape(-1)
        cp = np.asarray(self.closest_points, dtype=np.float64).reshape(-1, 3)
        if not (len(vi) == len(d) == len(cf) == len(cp)):
            raise ValueError("field lengths disagree")
        for name, arr in (("vertex_indices", vi), ("distances", d),
                          ("closest_faces", cf), ("closest_points", cp)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.vertex_indices)

    @classmethod
    def empty(cls) -> "ContactVertexSet":
        return cls(np.empty(0, np.int64), np.empty(0), np.empty(0, np.int64), np.empty((0, 3)))

    def save(self, path) -> None:
        """Text export: one ``vertex_index distance face_index`` line per entry."""
        with open(path, "w", encoding="utf-8") as fh:
            for vi, d, fi in zip(self.vertex_indices, self.distances, self.closest_faces):
                fh.write(f"{int(vi)} {float(d)!r} {int(fi)}\n")

    @classmethod
    def load(cls, path) -> "ContactVertexSet":
        vi, d, fi = [], [], []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                tok = line.split()
                if len(tok) != 3:
                    raise ValueError(f"{Path(path).name}:{lineno}: expected 3 fields")
                vi.append(int(tok[0]))
                d.append(float(tok[1]))
                fi.append(int(tok[2]))
        k = len(vi)
        return cls(np.asarray(vi, np.int64), np.asarray(d), np.asarray(fi, np.int64),
                   np.full((k, 3), np.nan))


def classify_contact(
    body: BodyMesh,
    index: SpatialIndex,
    scene: SceneMesh,
    thresholds: ContactThresholds = ContactThresholds(),
) -> ContactVertexSet:
    """Contact vertices of ``body`` against ``scene`` through its spatial index.

    Requires per-vertex body normals and that body and scene share one
    coordinate frame. The angle test runs in the cosine domain (arccos is
    monotone, so the inclusive boundary carries over exactly).
    """
    if body.normals is None:
        raise ValueError("body mesh has no per-vertex normals; call with_normals() first")
    if not np.all(np.isfinite(body.vertices)):
        raise ValueError("body vertices contain non-finite coordinates")

    dists, faces, points = closest_point_query_many(index, body.vertices)

    cos_threshold = math.cos(math.radians(thresholds.delta_a))
    cos_angle = np.einsum("ij,ij->i", body.normals, scene.face_normals[faces])
    cos_angle = np.clip(cos_angle, -1.0, 1.0)

    # angle >= delta_a  <=>  cos(angle) <= cos(delta_a)
    hit = (dists <= thresholds.delta_d) & (cos_angle <= cos_threshold)
    idx = np.flatnonzero(hit)
    return ContactVertexSet(idx, dists[idx], faces[idx], points[idx])


def contact_triangles(body: BodyMesh, cv: ContactVertexSet) -> dict[int, np.ndarray]:
    """Body faces touching any contact vertex, filed per part.

    A face joins the map when at least one of its vertices is in ``cv``; it is
    filed once, under the majority label of its three vertices (a three-way
    tie goes to the lowest part id).
    """
    if len(cv) and (cv.vertex_indices.min() < 0 or cv.vertex_indices.max() >= body.num_vertices):
        raise ValueError("contact vertex index out of range for this body")

    in_contact = np.zeros(body.num_vertices, dtype=bool)
    in_contact[cv.vertex_indices] = True
    touched = np.flatnonzero(in_contact[body.faces].any(axis=1))
    if touched.size == 0:
        return {}

    labels = np.sort(body.part_of_vertex[body.faces[touched]], axis=1)
    lo, mid, hi = labels[:, 0], labels[:, 1], labels[:, 2]
    # a repeated label always lands in the middle after sorting
    majority = np.where((mid == lo) | (mid == hi), mid, lo)

    result: dict[int, np.ndarray] = {}
    for part in np.unique(majority):
        result[int(part)] = touched[majority == part]
    return result
