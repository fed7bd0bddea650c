"""Polygon contact annotations: JSON-lines parsing, rasterization, statistics,
agreement, dataset splitting, and 2D -> 3D lifting onto a template body.

File format (one JSON object per line):
    {"image_id": str, "width": int, "height": int,
     "contacts": [{"part": int 1..17, "polygon": [[x, y], ...]}, ...]}
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .maps import ContactMap, labels_of
from .mesh import BodyMesh, part_vertex_indices
from .parts import NUM_PARTS, PALM_SOLE_PARTS, as_part_id, part_name

# Contact-area size buckets as fractions of image area: below the first
# threshold is "small", at or above the second is "large".
SIZE_BUCKET_THRESHOLDS: tuple[float, float] = (0.00052, 0.0022)

DEFAULT_LONG_SIDE = 400  # pixels, standard working resolution


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class Contact:
    part: int
    polygon: np.ndarray  # (K, 2) float pixel coordinates, K >= 3

    def __post_init__(self):
        poly = np.asarray(self.polygon, dtype=np.float64)
        if poly.ndim != 2 or poly.shape[1] != 2:
            raise AnnotationError(f"polygon must be (k, 2), got shape {poly.shape}")
        poly = poly.copy()
        poly.setflags(write=False)
        object.__setattr__(self, "polygon", poly)
        object.__setattr__(self, "part", int(self.part))


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    width: int
    height: int
    contacts: tuple[Contact, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "contacts", tuple(self.contacts))
        if self.width < 1 or self.height < 1:
            raise AnnotationError(f"{self.image_id}: image size must be >= 1x1")
        for i, c in enumerate(self.contacts):
            where = f"{self.image_id} contact {i}"
            if not 1 <= c.part <= NUM_PARTS:
                if c.part == 0:
                    raise AnnotationError(f"{where}: background not annotatable")
                raise AnnotationError(f"{where}: part id {c.part} outside 1..{NUM_PARTS}")
            if len(c.polygon) < 3:
                raise AnnotationError(f"{where}: polygon has {len(c.polygon)} points (< 3)")
            if not np.all(np.isfinite(c.polygon)):
                raise AnnotationError(f"{where}: polygon has non-finite coordinates")
            x, y = c.polygon[:, 0], c.polygon[:, 1]
            if (x.min() < -self.width or x.max() > 2 * self.width
                    or y.min() < -self.height or y.max() > 2 * self.height):
                raise AnnotationError(f"{where}: polygon far outside the image bounds")


def record_to_dict(rec: AnnotationRecord) -> dict:
    return {
        "image_id": rec.image_id,
        "width": rec.width,
        "height": rec.height,
        "contacts": [
            {"part": c.part, "polygon": [[float(x), float(y)] for x, y in c.polygon]}
            for c in rec.contacts
        ],
    }


def record_from_dict(data: dict) -> AnnotationRecord:
    try:
        contacts = tuple(
            Contact(part=c["part"], polygon=c["polygon"]) for c in data.get("contacts", [])
        )
        return AnnotationRecord(
            image_id=str(data["image_id"]),
            width=int(data["width"]),
            height=int(data["height"]),
            contacts=contacts,
        )
    except KeyError as exc:
        raise AnnotationError(f"record missing key {exc.args[0]!r}") from exc


def serialize_record(rec: AnnotationRecord) -> str:
    """Canonical single-line JSON; parse(serialize(x)) == x."""
    return json.dumps(record_to_dict(rec), separators=(", ", ": "))


def parse_annotations(path) -> list[AnnotationRecord]:
    """Read a JSON-lines annotation file; contact order is preserved."""
    path = Path(path)
    records: list[AnnotationRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"{path.name}:{lineno}: malformed JSON: {exc.msg}") from exc
            try:
                records.append(record_from_dict(data))
            except AnnotationError as exc:
                raise AnnotationError(f"{path.name}:{lineno}: {exc}") from exc
    return records


def save_annotations(records: Iterable[AnnotationRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(serialize_record(rec) + "\n")


# ---------------------------------------------------------------------------
# Rasterization (nonzero winding at pixel centers; later contacts overpaint).

def _winding_mask(polygon: np.ndarray, width: int, height: int) -> np.ndarray:
    """Boolean inside-mask over the image grid by the nonzero winding rule."""
    x_lo = max(0, int(np.floor(polygon[:, 0].min() - 0.5)))
    x_hi = min(width - 1, int(np.ceil(polygon[:, 0].max())))
    y_lo = max(0, int(np.floor(polygon[:, 1].min() - 0.5)))
    y_hi = min(height - 1, int(np.ceil(polygon[:, 1].max())))
    mask = np.zeros((height, width), dtype=bool)
    if x_lo > x_hi or y_lo > y_hi:
        return mask

    px = np.arange(x_lo, x_hi + 1) + 0.5
    py = np.arange(y_lo, y_hi + 1) + 0.5
    gx, gy = np.meshgrid(px, py)
    wn = np.zeros(gx.shape, dtype=np.int64)

    pts = polygon
    nxt = np.roll(pts, -1, axis=0)
    for (x1, y1), (x2, y2) in zip(pts, nxt):
        cross = (x2 - x1) * (gy - y1) - (gx - x1) * (y2 - y1)
        up = (y1 <= gy) & (y2 > gy) & (cross > 0)
        down = (y2 <= gy) & (y1 > gy) & (cross < 0)
        wn += up.astype(np.int64) - down.astype(np.int64)

    mask[y_lo : y_hi + 1, x_lo : x_hi + 1] = wn != 0
    return mask


def rasterize_polygons(rec: AnnotationRecord) -> ContactMap:
    """Rasterize a record's polygons; overlapping pixels take the later contact."""
    labels = np.zeros((rec.height, rec.width), dtype=np.uint8)
    for contact in rec.contacts:
        inside = _winding_mask(contact.polygon, rec.width, rec.height)
        labels[inside] = contact.part
    return ContactMap(labels)


# ---------------------------------------------------------------------------
# Corpus statistics.

@dataclass(frozen=True)
class DatasetStats:
    part_counts: dict[int, int]           # part id -> number of contact areas
    contacts_per_image: dict[int, int]    # contacts in an image -> image count
    size_fractions: np.ndarray            # one entry per contact area
    bucket_counts: dict[str, int]         # small / medium / large
    size_thresholds: tuple[float, float] = SIZE_BUCKET_THRESHOLDS

    @property
    def total_images(self) -> int:
        return sum(self.contacts_per_image.values())

    @property
    def total_contacts(self) -> int:
        return sum(self.part_counts.values())

    def to_json_dict(self) -> dict:
        return {
            "total_images": self.total_images,
            "total_contacts": self.total_contacts,
            "per_part": {part_name(p): n for p, n in sorted(self.part_counts.items())},
            "contacts_per_image": {str(k): v for k, v in sorted(self.contacts_per_image.items())},
            "size_buckets": dict(self.bucket_counts),
            "size_thresholds": list(self.size_thresholds),
        }


def size_bucket(fraction: float, thresholds: tuple[float, float] = SIZE_BUCKET_THRESHOLDS) -> str:
    small, large = thresholds
    if fraction < small:
        return "small"
    if fraction < large:
        return "medium"
    return "large"


def dataset_stats(
    records: Sequence[AnnotationRecord],
    size_thresholds: tuple[float, float] = SIZE_BUCKET_THRESHOLDS,
) -> DatasetStats:
    """Per-part counts, contacts-per-image histogram, and area-size buckets.

    A contact's size is the pixel count of its own rasterization (no
    overpainting by later contacts) divided by the image area.
    """
    if not records:
        raise AnnotationError("dataset_stats needs at least one record")
    part_counts: Counter[int] = Counter()
    per_image: Counter[int] = Counter()
    fractions: list[float] = []
    buckets = {"small": 0, "medium": 0, "large": 0}

    for rec in records:
        per_image[len(rec.contacts)] += 1
        for contact in rec.contacts:
            part_counts[contact.part] += 1
            inside = _winding_mask(contact.polygon, rec.width, rec.height)
            frac = float(inside.sum()) / float(rec.width * rec.height)
            fractions.append(frac)
            buckets[size_bucket(frac, size_thresholds)] += 1

    return DatasetStats(
        part_counts=dict(part_counts),
        contacts_per_image=dict(per_image),
        size_fractions=np.asarray(fractions),
        bucket_counts=buckets,
        size_thresholds=size_thresholds,
    )


# ---------------------------------------------------------------------------
# Inter-annotator agreement.

def agreement(map_a, map_b) -> tuple[float, float]:
    """(part agreement, pixel agreement) between two contact maps.

    Part agreement is the Jaccard similarity of the sets of part ids present;
    pixel agreement is the IoU of the binary contact masks. Both are 1.0 when
    the corresponding sets/masks are empty on both sides.
    """
    a = labels_of(map_a)
    b = labels_of(map_b)
    if a.shape != b.shape:
        raise ValueError(f"contact map shapes differ: {a.shape} vs {b.shape}")

    parts_a = {int(p) for p in np.unique(a) if p != 0}
    parts_b = {int(p) for p in np.unique(b) if p != 0}
    union = parts_a | parts_b
    part_agree = len(parts_a & parts_b) / len(union) if union else 1.0

    mask_a = a != 0
    mask_b = b != 0
    denom = int(np.count_nonzero(mask_a | mask_b))
    pixel_agree = int(np.count_nonzero(mask_a & mask_b)) / denom if denom else 1.0
    return part_agree, pixel_agree


# ---------------------------------------------------------------------------
# 2D -> 3D lifting.

def lift_to_3d(
    record: AnnotationRecord,
    template: BodyMesh,
    palm_sole_subset: Mapping | None = None,
) -> np.ndarray:
    """Template vertex indices implied by a record's contacted parts.

    Every vertex of each contacted part is returned, except for hands and
    feet where only the supplied palm/sole subset counts (a contacted hand or
    foot with no supplied subset contributes nothing). Returns sorted unique
    indices.
    """
    subsets: dict[int, np.ndarray] = {}
    for key, vals in (palm_sole_subset or {}).items():
        pid = as_part_id(key)
        if pid not in PALM_SOLE_PARTS:
            raise ValueError(
                f"palm/sole subset key {part_name(pid)} is not a hand or foot part"
            )
        vals = np.asarray(sorted(int(v) for v in vals), dtype=np.int64)
        allowed = part_vertex_indices(template, pid)
        outside = np.setdiff1d(vals, allowed)
        if outside.size:
            raise ValueError(
                f"palm/sole vertex {int(outside[0])} does not belong to part {part_name(pid)}"
            )
        subsets[pid] = vals

    picked: list[np.ndarray] = []
    for contact in record.contacts:
        if contact.part in PALM_SOLE_PARTS:
            picked.append(subsets.get(contact.part, np.empty(0, dtype=np.int64)))
        else:
            picked.append(part_vertex_indices(template, contact.part))
    if not picked:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(picked))


def load_palm_sole_subset(path) -> dict[int, np.ndarray]:
    """JSON map part-name -> [vertex indices]."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return {as_part_id(name): np.asarray(vals, dtype=np.int64) for name, vals in data.items()}


# ---------------------------------------------------------------------------
# Dataset splitting.

def _largest_remainder_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    exact = [n * r for r in ratios]
    sizes = [int(np.floor(x)) for x in exact]
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i)
    )
    for i in range(n - sum(sizes)):
        sizes[remainders[i]] += 1
    return sizes


def split_dataset(
    records: Sequence[AnnotationRecord],
    ratios: tuple[float, float, float],
    seed: int,
    group_key: Callable[[AnnotationRecord], str] | None = None,
) -> tuple[list[AnnotationRecord], list[AnnotationRecord], list[AnnotationRecord]]:
    """Deterministic (train, val, test) partition of ``records``.

    Without grouping, split sizes follow largest-remainder rounding of the
    ratios. With ``group_key`` (e.g. a scene id), whole groups are assigned
    to the split with the largest remaining deficit, so sizes are best-effort.
    """
    if not records:
        raise AnnotationError("cannot split an empty record list")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    rng = np.random.default_rng(seed)
    targets = _largest_remainder_sizes(len(records), ratios)

    if group_key is None:
        order = rng.permutation(len(records))
        picked = [records[i] for i in order]
        a, b = targets[0], targets[0] + targets[1]
        return picked[:a], picked[a:b], picked[b:]

    groups: dict[str, list[AnnotationRecord]] = {}
    for rec in records:
        groups.setdefault(group_key(rec), []).append(rec)
    keys = sorted(groups)
    order = rng.permutation(len(keys))
    splits: tuple[list, list, list] = ([], [], [])
    filled = [0, 0, 0]
    for gi in order:
        members = groups[keys[gi]]
        deficit = [targets[s] - filled[s] for s in range(3)]
        s = int(np.argmax(deficit))
        splits[s].extend(members)
        filled[s] += len(members)
    return splits


# ---------------------------------------------------------------------------
# Rescaling.

def rescale_record(rec: AnnotationRecord, long_side: int = DEFAULT_LONG_SIDE) -> AnnotationRecord:
    """Uniformly scale a record so its longer side equals ``long_side`` pixels."""
    scale = long_side / max(rec.width, rec.height)
    if scale == 1.0:
        return rec
    return AnnotationRecord(
        image_id=rec.image_id,
        width=max(1, int(round(rec.width * scale))),
        height=max(1, int(round(rec.height * scale))),
        contacts=tuple(
            Contact(part=c.part, polygon=c.polygon * scale) for c in rec.contacts
        ),
    )
