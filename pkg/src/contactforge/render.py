"""Pinhole projection and z-buffered rasterization of per-part contact faces.

The whole body enters the z-buffer so self-occluded contact is hidden; the
scene mesh can optionally occlude as well. Coverage uses pixel-center
sampling with the top-left fill convention, depth is interpolated
perspective-correctly (barycentric in inverse depth), and exact depth ties go
to the lower face index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .maps import ContactMap
from .mesh import BodyMesh, SceneMesh

MIN_DEPTH = 1e-6  # points at or behind this plane are not projectable


@dataclass(frozen=True)
class PinholeCamera:
    """Intrinsics; geometry is expected in this camera's frame, +z forward."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    @classmethod
    def from_json(cls, path) -> "PinholeCamera":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        try:
            return cls(
                fx=float(data["fx"]), fy=float(data["fy"]),
                cx=float(data["cx"]), cy=float(data["cy"]),
                width=int(data["width"]), height=int(data["height"]),
            )
        except KeyError as exc:
            raise ValueError(f"camera file missing key {exc.args[0]!r}") from exc


class BehindCameraError(ValueError):
    pass


def project(cam: PinholeCamera, p) -> tuple[float, float, float]:
    """Project a 3D point to (u, v, depth) pixels; caller clips to the image."""
    p = np.asarray(p, dtype=np.float64).reshape(3)
    if p[2] <= MIN_DEPTH:
        raise BehindCameraError(f"point z={p[2]} is not in front of the camera")
    return (
        float(cam.fx * p[0] / p[2] + cam.cx),
        float(cam.fy * p[1] / p[2] + cam.cy),
        float(p[2]),
    )


def project_points(cam: PinholeCamera, pts: np.ndarray) -> np.ndarray:
    """(N, 3) points -> (N, 3) rows (u, v, depth); no behind-camera check."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * pts[:, 0] / z + cam.cx
        v = cam.fy * pts[:, 1] / z + cam.cy
    return np.stack([u, v, z], axis=1)


def _orient2d(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _is_top_left(ax, ay, bx, by) -> bool:
    # positive-area winding in y-down pixel coordinates
    dx, dy = bx - ax, by - ay
    return (dy == 0 and dx > 0) or dy < 0


def rasterize_contact(
    cam: PinholeCamera,
    body: BodyMesh,
    contact_faces: Mapping[int, np.ndarray],
    scene: SceneMesh | None = None,
    occlude_with_scene: bool = False,
) -> ContactMap:
    """Render the body's contact faces into a per-pixel part-label map.

    ``contact_faces`` maps part id -> body face indices (each face under at
    most one part). Every body face is depth-tested; a pixel is labeled only
    when the front-most surface there is a contact face. Faces with any
    vertex at depth <= MIN_DEPTH are skipped. With ``occlude_with_scene``,
    scene faces also occlude (always as background).
    """
    part_of_face = np.zeros(body.num_faces, dtype=np.int64)
    seen = np.zeros(body.num_faces, dtype=bool)
    for part, faces in contact_faces.items():
        part = int(part)
        if not 1 <= part <= 17:
            raise ValueError(f"contact map part id {part} outside 1..17")
        faces = np.asarray(faces, dtype=np.int64)
        if faces.size and (faces.min() < 0 or faces.max() >= body.num_faces):
            raise ValueError(f"contact face index out of range for part {part}")
        if np.any(seen[faces]):
            raise ValueError("a face is filed under more than one part")
        seen[faces] = True
        part_of_face[faces] = part

    verts = body.vertices
    faces = body.faces
    labels = part_of_face
    if occlude_with_scene:
        if scene is None:
            raise ValueError("occlude_with_scene requires a scene mesh")
        faces = np.concatenate([faces, scene.faces + len(verts)])
        verts = np.concatenate([verts, scene.vertices])
        labels = np.concatenate([labels, np.zeros(scene.num_faces, dtype=np.int64)])

    uvz = project_points(cam, verts)
    w, h = cam.width, cam.height
    zbuf = np.full((h, w), np.inf)
    lbuf = np.zeros((h, w), dtype=np.uint8)

    # ascending face order + strict depth test implements the tie rule
    for fi in range(len(faces)):
        i0, i1, i2 = faces[fi]
        z0, z1, z2 = uvz[i0, 2], uvz[i1, 2], uvz[i2, 2]
        if z0 <= MIN_DEPTH or z1 <= MIN_DEPTH or z2 <= MIN_DEPTH:
            continue
        x0, y0 = uvz[i0, 0], uvz[i0, 1]
        x1, y1 = uvz[i1, 0], uvz[i1, 1]
        x2, y2 = uvz[i2, 0], uvz[i2, 1]

        area2 = _orient2d(x0, y0, x1, y1, x2, y2)
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            x1, y1, x2, y2 = x2, y2, x1, y1
            z1, z2 = z2, z1
            area2 = -area2

        # pixel centers sit at (px + 0.5, py + 0.5)
        px_lo = max(0, int(np.ceil(min(x0, x1, x2) - 0.5)))
        px_hi = min(w - 1, int(np.floor(max(x0, x1, x2) - 0.5)))
        py_lo = max(0, int(np.ceil(min(y0, y1, y2) - 0.5)))
        py_hi = min(h - 1, int(np.floor(max(y0, y1, y2) - 0.5)))
        if px_lo > px_hi or py_lo > py_hi:
            continue

        cxs = np.arange(px_lo, px_hi + 1) + 0.5
        cys = np.arange(py_lo, py_hi + 1) + 0.5
        gx, gy = np.meshgrid(cxs, cys)

        w0 = _orient2d(x1, y1, x2, y2, gx, gy)
        w1 = _orient2d(x2, y2, x0, y0, gx, gy)
        w2 = _orient2d(x0, y0, x1, y1, gx, gy)

        inside = (
            (w0 > 0) | ((w0 == 0) & _is_top_left(x1, y1, x2, y2))
        ) & (
            (w1 > 0) | ((w1 == 0) & _is_top_left(x2, y2, x0, y0))
        ) & (
            (w2 > 0) | ((w2 == 0) & _is_top_left(x0, y0, x1, y1))
        )
        if not inside.any():
            continue

        inv_z = (w0 / z0 + w1 / z1 + w2 / z2) / area2
        with np.errstate(divide="ignore"):
            depth = 1.0 / inv_z

        tile = (slice(py_lo, py_hi + 1), slice(px_lo, px_hi + 1))
        closer = inside & (depth < zbuf[tile])
        zbuf[tile][closer] = depth[closer]
        lbuf[tile][closer] = labels[fi]

    return ContactMap(lbuf)
