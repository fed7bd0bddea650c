"""Axis-aligned BVH over scene triangles for exact closest-point queries.

The tree splits at the median face centroid along the longest axis of each
node's bounds. Queries combine best-first traversal with an exact
closest-point-on-triangle primitive (region classification over the
triangle's barycentric plane), so results match a brute-force scan over all
faces. Equidistant faces resolve to the lowest face index, making distances
reproducible across tree layouts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import SceneMesh


def closest_points_on_triangles(p: np.ndarray, tri: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact closest points from ``p`` to each triangle in ``tri`` (M, 3, 3).

    Returns (squared distances (M,), closest points (M, 3)). Face, edge and
    vertex regions are classified exactly; degenerate triangles are not
    supported (SceneMesh construction rejects them).
    """
    p = np.asarray(p, dtype=np.float64)
    tri = np.asarray(tri, dtype=np.float64)
    base = tri[:, 0]
    e0 = tri[:, 1] - base
    e1 = tri[:, 2] - base
    diff = base - p

    a = np.einsum("ij,ij->i", e0, e0)
    b = np.einsum("ij,ij->i", e0, e1)
    c = np.einsum("ij,ij->i", e1, e1)
    d = np.einsum("ij,ij->i", e0, diff)
    e = np.einsum("ij,ij->i", e1, diff)

    det = a * c - b * b
    s = b * e - c * d
    t = b * d - a * e

    # guarded reciprocals; the guards only matter on branches that are not selected
    safe = lambda x: np.where(np.abs(x) < 1e-300, 1.0, x)
    inv_a, inv_c, inv_det = 1.0 / safe(a), 1.0 / safe(c), 1.0 / safe(det)
    clip01 = lambda x: np.clip(x, 0.0, 1.0)

    s_edge0 = clip01(-d * inv_a)   # t = 0 edge
    t_edge1 = clip01(-e * inv_c)   # s = 0 edge
    denom = safe(a - 2.0 * b + c)  # s + t = 1 edge
    s_hyp_r1 = clip01(((c + e) - (b + d)) / denom)
    t_hyp_r6 = clip01(((a + d) - (b + e)) / denom)

    inside_strip = s + t <= det
    s_neg, t_neg = s < 0, t < 0

    r0 = inside_strip & ~s_neg & ~t_neg
    r3 = inside_strip & s_neg & ~t_neg
    r5 = inside_strip & ~s_neg & t_neg
    r4 = inside_strip & s_neg & t_neg
    r2 = ~inside_strip & s_neg
    r6 = ~inside_strip & ~s_neg & t_neg
    r1 = ~inside_strip & ~s_neg & ~t_neg

    s_out = np.empty_like(s)
    t_out = np.empty_like(t)

    s_out[r0] = (s * inv_det)[r0]
    t_out[r0] = (t * inv_det)[r0]

    s_out[r3] = 0.0
    t_out[r3] = t_edge1[r3]

    s_out[r5] = s_edge0[r5]
    t_out[r5] = 0.0

    # region 4: nearest of the two edges meeting at the base vertex
    r4d = r4 & (d < 0)
    s_out[r4d] = s_edge0[r4d]
    t_out[r4d] = 0.0
    r4e = r4 & ~(d < 0)
    s_out[r4e] = 0.0
    t_out[r4e] = t_edge1[r4e]

    r2h = r2 & ((c + e) > (b + d))
    s_out[r2h] = s_hyp_r1[r2h]
    t_out[r2h] = 1.0 - s_hyp_r1[r2h]
    r2v = r2 & ~((c + e) > (b + d))
    s_out[r2v] = 0.0
    t_out[r2v] = t_edge1[r2v]

    r6h = r6 & ((a + d) > (b + e))
    t_out[r6h] = t_hyp_r6[r6h]
    s_out[r6h] = 1.0 - t_hyp_r6[r6h]
    r6v = r6 & ~((a + d) > (b + e))
    t_out[r6v] = 0.0
    s_out[r6v] = s_edge0[r6v]

    s_out[r1] = s_hyp_r1[r1]
    t_out[r1] = 1.0 - s_hyp_r1[r1]

    closest = base + s_out[:, None] * e0 + t_out[:, None] * e1
    delta = closest - p
    return np.einsum("ij,ij->i", delta, delta), closest


@dataclass(frozen=True)
class SpatialIndex:
    """Flattened BVH nodes plus a face permutation grouping leaf contents."""

    triangles: np.ndarray   # (F, 3, 3) snapshot of scene face corners
    node_min: np.ndarray    # (M, 3)
    node_max: np.ndarray    # (M, 3)
    children: np.ndarray    # (M, 2) child node ids, -1 -1 for leaves
    leaf_range: np.ndarray  # (M, 2) start, count into `order` (count 0 for inner)
    order: np.ndarray       # (F,) face ids, leaves own contiguous slices
    leaf_size: int

    @property
    def num_faces(self) -> int:
        return self.triangles.shape[0]


def build_index(scene: SceneMesh, leaf_size: int = 8) -> SpatialIndex:
    """Build the BVH; every face lands in exactly one leaf of <= leaf_size faces."""
    if leaf_size < 1:
        raise ValueError(f"leaf_size must be >= 1, got {leaf_size}")
    if scene.num_faces == 0:
        raise ValueError("cannot index an empty scene")

    tris = scene.triangles()
    lo = tris.min(axis=1)  # (F, 3) per-face bounds
    hi = tris.max(axis=1)
    centroids = tris.mean(axis=1)

    order = np.arange(scene.num_faces, dtype=np.int64)
    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    children: list[list[int]] = []
    leaf_range: list[list[int]] = []

    def build(start: int, count: int) -> int:
        ids = order[start : start + count]
        bmin = lo[ids].min(axis=0)
        bmax = hi[ids].max(axis=0)
        me = len(node_min)
        node_min.append(bmin)
        node_max.append(bmax)
        children.append([-1, -1])
        leaf_range.append([start, 0])
        if count <= leaf_size:
            leaf_range[me][1] = count
            return me
        axis = int(np.argmax(bmax - bmin))
        half = count // 2
        sel = np.argpartition(centroids[ids, axis], half)
        order[start : start + count] = ids[sel]
        children[me][0] = build(start, half)
        children[me][1] = build(start + half, count - half)
        return me

    build(0, scene.num_faces)
    return SpatialIndex(
        triangles=tris,
        node_min=np.asarray(node_min),
        node_max=np.asarray(node_max),
        children=np.asarray(children, dtype=np.int64),
        leaf_range=np.asarray(leaf_range, dtype=np.int64),
        order=order,
        leaf_size=leaf_size,
    )


def _aabb_dist2(p: np.ndarray, bmin: np.ndarray, bmax: np.ndarray) -> float:
    delta = np.maximum(bmin - p, 0.0) + np.maximum(p - bmax, 0.0)
    return float(delta @ delta)


def closest_point_query(index: SpatialIndex, p) -> tuple[float, int, np.ndarray]:
    """Closest scene point to ``p``: (distance, face index, point on that face)."""
    p = np.asarray(p, dtype=np.float64).reshape(3)
    best_d2 = np.inf
    best_face = -1
    best_point = np.full(3, np.nan)

    # nodes with bound == best are still visited so index ties resolve globally
    stack = [0]
    while stack:
        ni = stack.pop()
        if _aabb_dist2(p, index.node_min[ni], index.node_max[ni]) > best_d2:
            continue
        start, count = index.leaf_range[ni]
        if count > 0:
            face_ids = index.order[start : start + count]
            d2s, pts = closest_points_on_triangles(p, index.triangles[face_ids])
            local = float(d2s.min())
            if local < best_d2:
                k = int(np.flatnonzero(d2s == local)[np.argmin(face_ids[d2s == local])])
                best_d2 = local
                best_face = int(face_ids[k])
                best_point = pts[k]
            elif local == best_d2 and best_face >= 0:
                cand = int(face_ids[d2s == local].min())
                if cand < best_face:
                    k = int(np.flatnonzero((d2s == local) & (face_ids == cand))[0])
                    best_face = cand
                    best_point = pts[k]
        else:
            a, b = index.children[ni]
            da = _aabb_dist2(p, index.node_min[a], index.node_max[a])
            db = _aabb_dist2(p, index.node_min[b], index.node_max[b])
            # push the farther child first so the nearer is explored next
            if da <= db:
                stack.append(b)
                stack.append(a)
            else:
                stack.append(a)
                stack.append(b)

    return float(np.sqrt(best_d2)), best_face, best_point


def closest_point_query_many(index: SpatialIndex, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vector form of closest_point_query over an (N, 3) point array."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    dists = np.empty(len(pts))
    faces = np.empty(len(pts), dtype=np.int64)
    closest = np.empty((len(pts), 3))
    for i, p in enumerate(pts):
        dists[i], faces[i], closest[i] = closest_point_query(index, p)
    return dists, faces, closest
