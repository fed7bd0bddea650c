"""Triangle mesh containers: posed bodies with per-vertex part labels, static scenes.

Meshes are immutable after construction (arrays are marked read-only), so they
can be shared freely across threads. Construction is intentionally lenient:
``validate`` reports invariant violations instead of raising, so broken meshes
can be inspected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .parts import NUM_PARTS, as_part_id

DEGENERATE_AREA = 1e-12  # faces below this area (m^2) carry no normal information
UNIT_TOL = 1e-6


class MeshError(ValueError):
    pass


def _as_points(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise MeshError(f"{name} must have shape (n, 3), got {arr.shape}")
    return arr


def _as_faces(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise MeshError(f"faces must have shape (n, 3), got {arr.shape}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BodyMesh:
    """Posed human surface with one part label per vertex.

    vertices: (V, 3) float, meters, camera or world frame
    faces: (F, 3) vertex-index triangles
    part_of_vertex: (V,) ints in 1..17 (never background)
    normals: optional (V, 3) unit vectors
    """

    vertices: np.ndarray
    faces: np.ndarray
    part_of_vertex: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", _freeze(_as_points(self.vertices, "vertices")))
        object.__setattr__(self, "faces", _freeze(_as_faces(self.faces)))
        labels = np.asarray(self.part_of_vertex, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "part_of_vertex", _freeze(labels))
        if self.normals is not None:
            object.__setattr__(self, "normals", _freeze(_as_points(self.normals, "normals")))

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    def with_normals(self) -> "BodyMesh":
        """Return a copy carrying computed vertex normals (existing ones are kept)."""
        if self.normals is not None:
            return self
        n = compute_vertex_normals(self.vertices, self.faces)
        return BodyMesh(self.vertices, self.faces, self.part_of_vertex, n)


@dataclass(frozen=True)
class SceneMesh:
    """Static scene triangles with per-face unit normals.

    Construction validates the invariants outright (unlike BodyMesh there is
    no report-style checker for scenes): indices in range, normals unit length.
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_normals: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        verts = _as_points(self.vertices, "vertices")
        faces = _as_faces(self.faces)
        if not np.all(np.isfinite(verts)):
            raise MeshError("scene vertices contain non-finite coordinates")
        if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
            raise MeshError("scene face indices out of range")
        if self.face_normals is None:
            normals = compute_face_normals(verts, faces)
        else:
            normals = _as_points(self.face_normals, "face_normals")
            if normals.shape[0] != faces.shape[0]:
                raise MeshError("face_normals count must equal face count")
            lens = np.linalg.norm(normals, axis=1)
            if np.any(np.abs(lens - 1.0) > UNIT_TOL):
                bad = int(np.argmax(np.abs(lens - 1.0)))
                raise MeshError(f"face normal {bad} is not unit length (|n|={lens[bad]:.6g})")
        object.__setattr__(self, "vertices", _freeze(verts))
        object.__setattr__(self, "faces", _freeze(faces))
        object.__setattr__(self, "face_normals", _freeze(normals))

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    def triangles(self) -> np.ndarray:
        """Face corner positions, shape (F, 3, 3)."""
        return self.vertices[self.faces]


def compute_face_normals(vertices, faces) -> np.ndarray:
    """Unit normals from face winding (right-hand rule); degenerate faces are an error."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    tri = vertices[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norms = np.linalg.norm(cross, axis=1)
    degenerate = norms / 2.0 < DEGENERATE_AREA
    if np.any(degenerate):
        raise MeshError(f"face {int(np.argmax(degenerate))} is degenerate (area < {DEGENERATE_AREA})")
    return cross / norms[:, None]


def compute_vertex_normals(vertices, faces=None) -> np.ndarray:
    """Per-vertex unit normals, area-weighted over incident faces.

    Faces with area below ``DEGENERATE_AREA`` contribute nothing. A vertex
    touched by no non-degenerate face (or whose incident normals cancel
    exactly) is an error naming the vertex index.

    Accepts either (vertices, faces) arrays or a single mesh object.
    """
    if faces is None:
        mesh = vertices
        vertices, faces = mesh.vertices, mesh.faces
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)

    tri = vertices[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])  # |cross| = 2 * area
    keep = np.linalg.norm(cross, axis=1) / 2.0 >= DEGENERATE_AREA

    accum = np.zeros_like(vertices)
    touched = np.zeros(len(vertices), dtype=bool)
    kept_faces = faces[keep]
    np.add.at(accum, kept_faces.reshape(-1), np.repeat(cross[keep], 3, axis=0))
    touched[kept_faces.reshape(-1)] = True

    if not np.all(touched):
        raise MeshError(
            f"vertex {int(np.argmin(touched))} has no non-degenerate incident face"
        )
    lens = np.linalg.norm(accum, axis=1)
    if np.any(lens < 1e-20):
        raise MeshError(
            f"vertex {int(np.argmin(lens))} has a zero resultant normal (incident faces cancel)"
        )
    return accum / lens[:, None]


def validate(mesh: BodyMesh) -> list[str]:
    """Check BodyMesh invariants; returns one message per violation (empty = valid)."""
    report: list[str] = []
    v, f, labels = mesh.vertices, mesh.faces, mesh.part_of_vertex

    if v.shape[0] < 3:
        report.append(f"vertex count {v.shape[0]} < 3")
    if not np.all(np.isfinite(v)):
        report.append("vertices contain non-finite coordinates")

    if f.size:
        bad = np.nonzero((f < 0) | (f >= v.shape[0]))[0]
        for fi in np.unique(bad):
            report.append(f"face {int(fi)} references vertex index out of range")
        repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        for fi in np.nonzero(repeated)[0]:
            report.append(f"face {int(fi)} repeats a vertex index")

    if labels.shape[0] != v.shape[0]:
        report.append(
            f"label count {labels.shape[0]} does not match vertex count {v.shape[0]}"
        )
    else:
        bad = np.nonzero((labels < 1) | (labels > NUM_PARTS))[0]
        for vi in bad[:10]:
            report.append(f"vertex {int(vi)} has label {int(labels[vi])} outside 1..{NUM_PARTS}")
        if len(bad) > 10:
            report.append(f"... and {len(bad) - 10} more label violations")

    if mesh.normals is not None:
        if mesh.normals.shape[0] != v.shape[0]:
            report.append("normal count does not match vertex count")
        else:
            lens = np.linalg.norm(mesh.normals, axis=1)
            bad = np.nonzero(np.abs(lens - 1.0) > UNIT_TOL)[0]
            for vi in bad[:10]:
                report.append(f"normal {int(vi)} is not unit length")
            if len(bad) > 10:
                report.append(f"... and {len(bad) - 10} more normal violations")
    return report


def require_valid(mesh: BodyMesh) -> None:
    problems = validate(mesh)
    if problems:
        raise MeshError("invalid body mesh: " + "; ".join(problems))


def part_vertex_indices(mesh: BodyMesh, part) -> np.ndarray:
    """Sorted indices of the vertices labeled with ``part`` (may be empty).

    Background is not a body part and is rejected.
    """
    pid = as_part_id(part)
    return np.nonzero(mesh.part_of_vertex == pid)[0]


# ---------------------------------------------------------------------------
# File formats: OBJ subset and the one-label-per-line part sidecar.

def load_obj(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Parse the OBJ subset: ``v x y z``, optional ``vn x y z``, ``f i j k`` (1-based).

    Comment lines (``#``) and unrelated keywords are skipped. Faces must be
    plain triangles without texture/normal slashes.
    """
    verts: list[list[float]] = []
    normals: list[list[float]] = []
    faces: list[list[int]] = []
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            kind = tok[0]
            try:
                if kind == "v":
                    if len(tok) != 4:
                        raise ValueError("expected 3 coordinates")
                    verts.append([float(t) for t in tok[1:4]])
                elif kind == "vn":
                    if len(tok) != 4:
                        raise ValueError("expected 3 components")
                    normals.append([float(t) for t in tok[1:4]])
                elif kind == "f":
                    if len(tok) != 4:
                        raise ValueError("faces must be triangles")
                    idx = []
                    for t in tok[1:4]:
                        if "/" in t:
                            raise ValueError("texture/normal indices not supported")
                        i = int(t)
                        if i < 1:
                            raise ValueError("face indices must be >= 1")
                        idx.append(i - 1)
                    faces.append(idx)
                # other keywords (o, g, s, usemtl, ...) are ignored
            except ValueError as exc:
                raise MeshError(f"{path.name}:{lineno}: bad {kind!r} line: {exc}") from exc
    v = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    n = None
    if normals:
        if len(normals) != len(verts):
            raise MeshError(
                f"{path.name}: {len(normals)} vn lines for {len(verts)} vertices "
                "(normals must pair 1:1 with vertices)"
            )
        n = np.asarray(normals, dtype=np.float64)
    return v, f, n


def save_obj(path, vertices, faces, normals=None) -> None:
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        for p in vertices:
            fh.write(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        if normals is not None:
            for n in np.asarray(normals, dtype=np.float64):
                fh.write(f"vn {float(n[0])!r} {float(n[1])!r} {float(n[2])!r}\n")
        for f in faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def load_part_labels(path, expected_count: int | None = None) -> np.ndarray:
    """Sidecar labels: one integer 1..17 per line, line n labels vertex n."""
    path = Path(path)
    labels: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                val = int(line)
            except ValueError as exc:
                raise MeshError(f"{path.name}:{lineno}: not an integer: {line!r}") from exc
            if not 1 <= val <= NUM_PARTS:
                raise MeshError(f"{path.name}:{lineno}: label {val} outside 1..{NUM_PARTS}")
            labels.append(val)
    arr = np.asarray(labels, dtype=np.int64)
    if expected_count is not None and arr.shape[0] != expected_count:
        raise MeshError(
            f"{path.name}: {arr.shape[0]} labels for {expected_count} vertices"
        )
    return arr


def save_part_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        for val in labels:
            fh.write(f"{int(val)}\n")


def load_body_mesh(obj_path, labels_path) -> BodyMesh:
    vertices, faces, normals = load_obj(obj_path)
    labels = load_part_labels(labels_path, expected_count=len(vertices))
    mesh = BodyMesh(vertices, faces, labels, normals)
    require_valid(mesh)
    return mesh


def load_scene_mesh(obj_path) -> SceneMesh:
    vertices, faces, _ = load_obj(obj_path)
    return SceneMesh(vertices, faces)
