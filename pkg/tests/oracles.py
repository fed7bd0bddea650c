"""Independent reference implementations used to verify the library.

Everything here is deliberately written with different formulations than the
production code: closest points come from interior-solve + clamped edges
instead of region classification, rasterization from per-pixel ray casting
instead of edge functions, metrics from pure-Python confusion dictionaries
instead of vectorized bincounts.
"""

from __future__ import annotations

import numpy as np


# ---------------------------------------------------------------------------
# Closest point to triangles: candidate minimum over the interior solution
# and the three clamped edges.

def ref_closest_distances(tris: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Distance from p to each triangle in (M,3,3), vectorized over faces."""
    tris = np.asarray(tris, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    e0, e1 = b - a, c - a

    d00 = np.einsum("ij,ij->i", e0, e0)
    d01 = np.einsum("ij,ij->i", e0, e1)
    d11 = np.einsum("ij,ij->i", e1, e1)
    r0 = np.einsum("ij,ij->i", e0, p - a)
    r1 = np.einsum("ij,ij->i", e1, p - a)
    det = d00 * d11 - d01 * d01
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (d11 * r0 - d01 * r1) / det
        t = (d00 * r1 - d01 * r0) / det
    inside = (s >= 0) & (t >= 0) & (s + t <= 1) & (det > 0)
    q = a + s[:, None] * e0 + t[:, None] * e1
    best = np.where(inside, np.linalg.norm(p - q, axis=1), np.inf)

    for u, v in ((a, b), (b, c), (c, a)):
        e = v - u
        denom = np.einsum("ij,ij->i", e, e)
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = np.einsum("ij,ij->i", p - u, e) / denom
        tt = np.clip(np.where(np.isfinite(tt), tt, 0.0), 0.0, 1.0)
        q = u + tt[:, None] * e
        best = np.minimum(best, np.linalg.norm(p - q, axis=1))
    return best


def ref_closest_point_brute(tris: np.ndarray, p: np.ndarray) -> tuple[float, int]:
    """(distance, face index) by scanning all faces; ties -> lowest index."""
    d = ref_closest_distances(tris, p)
    face = int(np.argmin(d))  # argmin returns the first (lowest) index on ties
    return float(d[face]), face


# ---------------------------------------------------------------------------
# Per-pixel ray casting against every triangle (Moeller-Trumbore, vectorized
# over the pixel grid one face at a time).

def ref_raycast_labels(cam, verts, faces, part_of_face, min_depth=1e-6) -> np.ndarray:
    h, w = cam.height, cam.width
    px = (np.arange(w) + 0.5 - cam.cx) / cam.fx
    py = (np.arange(h) + 0.5 - cam.cy) / cam.fy
    dx, dy = np.meshgrid(px, py)
    dirs = np.stack([dx, dy, np.ones_like(dx)], axis=-1)  # (h,w,3)

    best_t = np.full((h, w), np.inf)
    labels = np.zeros((h, w), dtype=np.uint8)
    for fi, (i, j, k) in enumerate(faces):
        a, b, c = verts[i], verts[j], verts[k]
        e1, e2 = b - a, c - a
        pv = np.cross(dirs, e2)
        det = pv @ e1
        qv = np.cross(-a, e1)  # ray origin is the camera center
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            u = (pv @ -a) * inv
            v = (dirs @ qv) * inv
            t = float(qv @ e2) * inv
        hit = (det != 0) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > min_depth)
        closer = hit & (t < best_t)
        best_t[closer] = t[closer]
        labels[closer] = part_of_face[fi]
    return labels


# ---------------------------------------------------------------------------
# Point-in-polygon by the scalar nonzero winding rule.

def ref_point_in_polygon(polygon, x: float, y: float) -> bool:
    wn = 0
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        cross = (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)
        if y1 <= y:
            if y2 > y and cross > 0:
                wn += 1
        elif y2 <= y and cross < 0:
            wn -= 1
    return wn != 0


# ---------------------------------------------------------------------------
# Metrics from a pure-Python confusion dictionary.

def ref_confusion(pred, gt) -> dict[tuple[int, int], int]:
    conf: dict[tuple[int, int], int] = {}
    for grow, prow in zip(np.asarray(gt).tolist(), np.asarray(pred).tolist()):
        for g, p in zip(grow, prow):
            conf[(g, p)] = conf.get((g, p), 0) + 1
    return conf


def ref_metrics(pred, gt, c_acc_all_pixels: bool = False):
    """(sc_acc, c_acc, miou, wiou, per-part ious) with the same arithmetic
    shapes as the production formulas so equality is exact."""
    conf = ref_confusion(pred, gt)
    total = sum(conf.values())
    gt_contact = sum(n for (g, _), n in conf.items() if g != 0)
    sc_correct = sum(n for (g, p), n in conf.items() if g != 0 and g == p)
    sc_acc = sc_correct / gt_contact if gt_contact else 1.0

    binary_hits = sum(n for (g, p), n in conf.items() if g != 0 and p != 0)
    if c_acc_all_pixels:
        c_acc = (binary_hits + conf.get((0, 0), 0)) / total if total else 1.0
    else:
        c_acc = binary_hits / gt_contact if gt_contact else 1.0

    ious: dict[int, float] = {}
    for k in range(1, 18):
        tp = conf.get((k, k), 0)
        gk = sum(n for (g, _), n in conf.items() if g == k)
        pk = sum(n for (_, p), n in conf.items() if p == k)
        union = gk + pk - tp
        if union > 0:
            ious[k] = tp / union

    miou = sum(ious.values()) / len(ious) if ious else 1.0
    if gt_contact:
        wiou = 0.0
        for k in sorted(ious):
            gk = sum(n for (g, _), n in conf.items() if g == k)
            wiou += (gk / gt_contact) * ious[k]
    else:
        wiou = 1.0 if not ious else 0.0
    return sc_acc, c_acc, miou, wiou, ious


# ---------------------------------------------------------------------------
# Shared synthetic geometry.

def random_scene_arrays(rng, max_faces=500, extent=2.0):
    n = int(rng.integers(4, max_faces + 1))
    tris = rng.uniform(-extent, extent, size=(n, 3, 3))
    # reject degenerate faces so SceneMesh accepts the geometry
    good = np.linalg.norm(
        np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1) > 1e-6
    tris = tris[good]
    verts = tris.reshape(-1, 3)
    faces = np.arange(len(verts)).reshape(-1, 3)
    return verts, faces


def floor_scene(half_extent=5.0, z=0.0, up=+1):
    """Two-triangle floor; ``up`` +1 orients normals to +z, -1 to -z."""
    s = half_extent
    verts = np.array([[-s, -s, z], [s, -s, z], [s, s, z], [-s, s, z]])
    if up > 0:
        faces = np.array([[0, 1, 2], [0, 2, 3]])
    else:
        faces = np.array([[0, 2, 1], [0, 3, 2]])
    return verts, faces
