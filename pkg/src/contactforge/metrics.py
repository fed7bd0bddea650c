"""Contact-map evaluation: semantic and binary contact accuracy, mean and
gt-ratio-weighted IoU, with per-part and per-region-size breakdowns.

All metrics derive from an 18x18 confusion matrix (rows = ground truth,
columns = prediction), so corpus evaluation accumulates pixels across images
and computes each metric once. Vacuously perfect cases (empty ground truth
and prediction) score 1.0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .annotations import SIZE_BUCKET_THRESHOLDS, size_bucket
from .maps import labels_of
from .parts import NUM_CLASSES, NUM_PARTS, part_name


@dataclass(frozen=True)
class EvalReport:
    sc_acc: float
    c_acc: float
    miou: float
    wiou: float
    per_part_iou: dict[int, float]
    per_size: "dict[str, EvalReport] | None" = None

    def to_json_dict(self) -> dict:
        out = {
            "sc_acc": round(self.sc_acc, 6),
            "c_acc": round(self.c_acc, 6),
            "miou": round(self.miou, 6),
            "wiou": round(self.wiou, 6),
            "per_part": {part_name(k): round(v, 6) for k, v in sorted(self.per_part_iou.items())},
        }
        if self.per_size is not None:
            out["per_size"] = {
                bucket: rep.to_json_dict() for bucket, rep in self.per_size.items()
            }
        return out

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def confusion_matrix(pred, gt) -> np.ndarray:
    """18x18 pixel counts, rows indexed by ground truth, columns by prediction."""
    p = labels_of(pred)
    g = labels_of(gt)
    if p.shape != g.shape:
        raise ValueError(f"map shapes differ: pred {p.shape} vs gt {g.shape}")
    p = p.astype(np.int64)
    g = g.astype(np.int64)
    for name, arr in (("pred", p), ("gt", g)):
        if arr.size and (arr.min() < 0 or arr.max() > NUM_PARTS):
            raise ValueError(f"{name} labels outside 0..{NUM_PARTS}")
    codes = g.reshape(-1) * NUM_CLASSES + p.reshape(-1)
    return np.bincount(codes, minlength=NUM_CLASSES * NUM_CLASSES).reshape(
        NUM_CLASSES, NUM_CLASSES)


def report_from_confusion(m: np.ndarray, c_acc_all_pixels: bool = False) -> EvalReport:
    m = np.asarray(m, dtype=np.int64)
    total = int(m.sum())
    gt_contact = int(m[1:, :].sum())
    sc_correct = int(np.trace(m)) - int(m[0, 0])
    sc_acc = sc_correct / gt_contact if gt_contact else 1.0

    binary_hits = int(m[1:, 1:].sum())
    if c_acc_all_pixels:
        c_acc = (binary_hits + int(m[0, 0])) / total if total else 1.0
    else:
        c_acc = binary_hits / gt_contact if gt_contact else 1.0

    ious: dict[int, float] = {}
    for k in range(1, NUM_CLASSES):
        tp = int(m[k, k])
        union = int(m[k, :].sum()) + int(m[:, k].sum()) - tp
        if union > 0:
            ious[k] = tp / union

    miou = sum(ious.values()) / len(ious) if ious else 1.0
    if gt_contact:
        wiou = 0.0
        for k in sorted(ious):
            wiou += (int(m[k, :].sum()) / gt_contact) * ious[k]
    else:
        wiou = 1.0 if not ious else 0.0

    return EvalReport(sc_acc=sc_acc, c_acc=c_acc, miou=miou, wiou=wiou, per_part_iou=ious)


def evaluate(pred, gt, c_acc_all_pixels: bool = False) -> EvalReport:
    """Score one predicted contact map against ground truth.

    sc_acc: fraction of gt contact pixels with the exact part label predicted.
    c_acc: fraction of gt contact pixels predicted as any contact; with
    ``c_acc_all_pixels`` it becomes binary accuracy over the whole image.
    miou averages IoU over part classes present in gt or pred; wiou weights
    each class by its share of gt contact pixels.
    """
    return report_from_confusion(confusion_matrix(pred, gt), c_acc_all_pixels)


def _region_bucket_masks(gt: np.ndarray, size_thresholds) -> dict[str, np.ndarray]:
    """Partition gt contact pixels into size buckets by connected region area."""
    h, w = gt.shape
    masks = {b: np.zeros((h, w), dtype=bool) for b in ("small", "medium", "large")}
    for k in np.unique(gt):
        if k == 0:
            continue
        comp, n = ndimage.label(gt == k)
        sizes = ndimage.sum_labels(np.ones_like(comp), comp, index=np.arange(1, n + 1))
        for ci, area in enumerate(sizes, start=1):
            bucket = size_bucket(float(area) / float(h * w), size_thresholds)
            masks[bucket] |= comp == ci
    return masks


def evaluate_corpus(pairs, size_thresholds=SIZE_BUCKET_THRESHOLDS,
                    c_acc_all_pixels: bool = False) -> EvalReport:
    """Corpus metrics over (pred, gt) pairs, accumulated at the pixel level.

    The per-size breakdown assigns every connected same-label gt region to a
    bucket by its area fraction and scores those regions' pixels; buckets
    with no regions report vacuous 1.0 metrics.
    """
    total = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    per_bucket = {b: np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
                  for b in ("small", "medium", "large")}
    count = 0
    for pred, gt in pairs:
        p = labels_of(pred).astype(np.int64)
        g = labels_of(gt).astype(np.int64)
        total += confusion_matrix(p, g)
        for bucket, mask in _region_bucket_masks(g, size_thresholds).items():
            if mask.any():
                codes = g[mask] * NUM_CLASSES + p[mask]
                per_bucket[bucket] += np.bincount(
                    codes, minlength=NUM_CLASSES * NUM_CLASSES
                ).reshape(NUM_CLASSES, NUM_CLASSES)
        count += 1
    if count == 0:
        raise ValueError("evaluate_corpus needs at least one (pred, gt) pair")

    report = report_from_confusion(total, c_acc_all_pixels)
    per_size = {
        bucket: report_from_confusion(m, c_acc_all_pixels)
        for bucket, m in per_bucket.items()
    }
    return EvalReport(
        sc_acc=report.sc_acc,
        c_acc=report.c_acc,
        miou=report.miou,
        wiou=report.wiou,
        per_part_iou=report.per_part_iou,
        per_size=per_size,
    )
