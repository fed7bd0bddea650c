"""Body-part taxonomy: 17 contact classes plus a background class."""

from __future__ import annotations

from dataclasses import dataclass

NUM_PARTS = 17
BACKGROUND = 0
NUM_CLASSES = NUM_PARTS + 1  # 17 parts + background

# Fixed id <-> name bijection; ids are 1-based, 0 is background.
PART_NAMES: tuple[str, ...] = (
    "Head",
    "Chest",
    "L_UpperArm",
    "L_ForeArm",
    "L_Hand",
    "R_UpperArm",
    "R_ForeArm",
    "R_Hand",
    "Buttocks",
    "Hip",
    "Back",
    "L_Thigh",
    "L_Calf",
    "L_Foot",
    "R_Thigh",
    "R_Calf",
    "R_Foot",
)

PART_ID_OF_NAME: dict[str, int] = {n: i for i, n in enumerate(PART_NAMES, start=1)}

# Parts whose 3D lifting is restricted to a palm/sole vertex subset.
PALM_SOLE_PARTS: frozenset[int] = frozenset(
    PART_ID_OF_NAME[n] for n in ("L_Hand", "R_Hand", "L_Foot", "R_Foot")
)


def part_name(part_id: int) -> str:
    if not 1 <= part_id <= NUM_PARTS:
        raise ValueError(f"part id {part_id} outside 1..{NUM_PARTS}")
    return PART_NAMES[part_id - 1]


def as_part_id(part, allow_background: bool = False) -> int:
    """Normalize a part given as id, name, or PartLabel to an integer id."""
    if isinstance(part, PartLabel):
        pid = part.id
    elif isinstance(part, str):
        if part not in PART_ID_OF_NAME:
            raise ValueError(f"unknown part name {part!r}")
        pid = PART_ID_OF_NAME[part]
    else:
        pid = int(part)
    lo = 0 if allow_background else 1
    if not lo <= pid <= NUM_PARTS:
        raise ValueError(f"part id {pid} outside {lo}..{NUM_PARTS}")
    return pid


@dataclass(frozen=True)
class PartLabel:
    """One of the 17 body-part classes (id 1..17), or background (id 0)."""

    id: int

    def __post_init__(self):
        if not 0 <= self.id <= NUM_PARTS:
            raise ValueError(f"part id {self.id} outside 0..{NUM_PARTS}")

    @property
    def name(self) -> str:
        return "background" if self.id == BACKGROUND else PART_NAMES[self.id - 1]

    @classmethod
    def from_name(cls, name: str) -> "PartLabel":
        if name == "background":
            return cls(BACKGROUND)
        if name not in PART_ID_OF_NAME:
            raise ValueError(f"unknown part name {name!r}")
        return cls(PART_ID_OF_NAME[name])
