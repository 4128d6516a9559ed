from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional, Sequence

import numpy as np

from reachability.grid import RegionMask


class Mode(str, Enum):
    AC = "AC"
    SC = "SC"


@dataclass(frozen=True, eq=False)
class SafetyPredicate:
    """
    A set of plant states, given by a membership test and optionally by
    an explicit region: a grid mask, or an axis-aligned box (lo, hi).
    """
    membership: Callable[[Any], bool]
    region: Optional[RegionMask] = None
    box: Optional[tuple] = None
    name: str = ""

    def __call__(self, s) -> bool:
        return bool(self.membership(s))

    contains = __call__

    @classmethod
    def from_region(cls, region: RegionMask, name: str = "") -> "SafetyPredicate":
        return cls(membership=region.contains, region=region, name=name)

    @classmethod
    def from_box(cls, lo: Sequence[float], hi: Sequence[float], name: str = "") -> "SafetyPredicate":
        lo_a = np.asarray(lo, dtype=float)
        hi_a = np.asarray(hi, dtype=float)

        def inside(s):
            s = np.asarray(s, dtype=float)
            return bool(np.all(s >= lo_a) and np.all(s <= hi_a))

        return cls(membership=inside, box=(tuple(lo_a), tuple(hi_a)), name=name)

    def disagreement(self) -> Optional[np.ndarray]:
        """First grid centre where membership and region differ, if any."""
        if self.region is None:
            return None
        for i, c in enumerate(self.region.grid.centers):
            if bool(self.membership(c)) != bool(self.region.cells[i]):
                return c
        return None
