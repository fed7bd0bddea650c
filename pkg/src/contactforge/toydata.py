"""Synthetic desk-scale training data: one part-labeled square per image.

On disk a toy dataset is a directory of PGM triples per sample:
``<stem>_input.pgm`` (grayscale), ``<stem>_contact.pgm`` and
``<stem>_parts.pgm`` (class ids).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pgm
from .parts import PART_ID_OF_NAME

# Each sample pairs a distinct part id with a distinct gray level, so the
# mapping from intensity to class is learnable by a small conv stack.
TOY_SQUARES = (
    (PART_ID_OF_NAME["L_Hand"], 240),
    (PART_ID_OF_NAME["R_Hand"], 180),
    (PART_ID_OF_NAME["L_Foot"], 120),
    (PART_ID_OF_NAME["R_Foot"], 60),
)


@dataclass(frozen=True)
class ToyDataset:
    images: np.ndarray   # (N,H,W) float64 in [0,1]
    contact: np.ndarray  # (N,H,W) uint8 class ids
    parts: np.ndarray    # (N,H,W) uint8 class ids

    def __len__(self) -> int:
        return self.images.shape[0]

    def as_batch(self):
        return self.images, self.contact, self.parts


def make_toy_dataset(size: int = 24, square: int = 10, seed: int = 0) -> ToyDataset:
    """Four images, each holding one square of a different part label."""
    rng = np.random.default_rng(seed)
    n = len(TOY_SQUARES)
    images = np.zeros((n, size, size))
    contact = np.zeros((n, size, size), dtype=np.uint8)
    parts = np.zeros((n, size, size), dtype=np.uint8)
    for i, (part, level) in enumerate(TOY_SQUARES):
        margin = size - square - 2
        y = int(rng.integers(1, margin + 1))
        x = int(rng.integers(1, margin + 1))
        images[i, y : y + square, x : x + square] = level / 255.0
        contact[i, y : y + square, x : x + square] = part
        parts[i, y : y + square, x : x + square] = part
    return ToyDataset(images, contact, parts)


def write_toy_dataset(directory, dataset: ToyDataset) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(len(dataset)):
        stem = directory / f"{i:02d}"
        gray = np.round(dataset.images[i] * 255.0).astype(np.uint8)
        pgm.write_pgm(f"{stem}_input.pgm", gray)
        pgm.write_pgm(f"{stem}_contact.pgm", dataset.contact[i])
        pgm.write_pgm(f"{stem}_parts.pgm", dataset.parts[i])


def load_toy_dataset(directory) -> ToyDataset:
    directory = Path(directory)
    inputs = sorted(directory.glob("*_input.pgm"))
    if not inputs:
        raise FileNotFoundError(f"no *_input.pgm files under {directory}")
    images, contact, parts = [], [], []
    for path in inputs:
        stem = path.name[: -len("_input.pgm")]
        images.append(pgm.read_pgm(path).astype(np.float64) / 255.0)
        contact.append(pgm.read_pgm(directory / f"{stem}_contact.pgm"))
        parts.append(pgm.read_pgm(directory / f"{stem}_parts.pgm"))
    return ToyDataset(np.stack(images), np.stack(contact), np.stack(parts))
