"""Per-pixel contact label maps (0 = no contact, 1..17 = body part in contact)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pgm
from .parts import NUM_PARTS

# Fixed palette for the PNG export, index = class id. Background is black;
# part colors are spread around the hue wheel (see README for the table).
PALETTE: tuple[tuple[int, int, int], ...] = (
    (0, 0, 0),        # 0 background
    (230, 25, 75),    # 1 Head
    (60, 180, 75),    # 2 Chest
    (255, 225, 25),   # 3 L_UpperArm
    (0, 130, 200),    # 4 L_ForeArm
    (245, 130, 48),   # 5 L_Hand
    (145, 30, 180),   # 6 R_UpperArm
    (70, 240, 240),   # 7 R_ForeArm
    (240, 50, 230),   # 8 R_Hand
    (210, 245, 60),   # 9 Buttocks
    (250, 190, 212),  # 10 Hip
    (0, 128, 128),    # 11 Back
    (220, 190, 255),  # 12 L_Thigh
    (170, 110, 40),   # 13 L_Calf
    (255, 250, 200),  # 14 L_Foot
    (128, 0, 0),      # 15 R_Thigh
    (170, 255, 195),  # 16 R_Calf
    (128, 128, 0),    # 17 R_Foot
)


@dataclass(frozen=True)
class ContactMap:
    """H x W label image; exactly one class id 0..17 per pixel."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"contact map must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("contact map labels must fit in uint8")
            arr = arr.astype(np.uint8)
        if arr.size and arr.max() > NUM_PARTS:
            raise ValueError(f"contact map labels must be 0..{NUM_PARTS}, found {arr.max()}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @classmethod
    def zeros(cls, width: int, height: int) -> "ContactMap":
        return cls(np.zeros((height, width), dtype=np.uint8))

    def parts_present(self) -> set[int]:
        return {int(p) for p in np.unique(self.labels) if p != 0}

    def save_pgm(self, path) -> None:
        pgm.write_pgm(path, self.labels)

    @classmethod
    def load_pgm(cls, path) -> "ContactMap":
        return cls(pgm.read_pgm(path))

    def save_png(self, path) -> None:
        """Indexed-color PNG with the fixed 18-color palette, for inspection."""
        from PIL import Image

        img = Image.fromarray(self.labels, mode="P")
        flat = [c for rgb in PALETTE for c in rgb]
        img.putpalette(flat + [0] * (768 - len(flat)))
        img.save(path)


def labels_of(m) -> np.ndarray:
    """Accept a ContactMap or a bare 2-D label array."""
    if isinstance(m, ContactMap):
        return m.labels
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D label map, got shape {arr.shape}")
    return arr
