import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Sequence, Tuple

import numpy as np

from coremodel.errors import RTAError


class ReachabilityError(RTAError):
    pass


# -------- dynamics --------

@dataclass(eq=False)
class DynamicsModel:
    """
    Discrete-time plant descriptor.

    - bounds: (d, 2) array of per-dimension intervals
    - controls: finite control set U
    - step: batched map (states (N, d), control) -> states (N, d) over one tick
    - dt: duration of one tick, in the same unit as module periods
    """
    bounds: np.ndarray
    controls: Tuple[Any, ...]
    step: Callable[[np.ndarray, Any], np.ndarray]
    dt: float = 1.0
    name: str = ""

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        self.controls = tuple(self.controls)
        if self.dt <= 0:
            raise ReachabilityError("nonpositive_dt", f"tick duration {self.dt!r} must be > 0")
        if not self.controls:
            raise ReachabilityError("empty_control_set", "a dynamics model needs at least one control")

    @property
    def dims(self) -> int:
        return self.bounds.shape[0]

    def step_one(self, state, control) -> np.ndarray:
        return np.asarray(self.step(np.asarray(state, dtype=float).reshape(1, -1), control))[0]

    def ticks(self, duration: float) -> int:
        """Number of whole ticks needed to cover `duration`."""
        if duration <= 0:
            return 0
        return int(math.ceil(duration / self.dt - 1e-9))


# -------- grid --------

class GridSpec:
    """
    Uniform grid over a box. Cells are numbered row-major (first axis
    slowest). States outside the box are clipped onto the nearest cell
    so the state -> cell map is total.

    samples:
    - "center"  -> a cell is represented by its centre only
    - "corners" -> centre plus 2^d points just inside the corners
    """

    SAMPLE_KINDS = ("center", "corners")

    def __init__(self, bounds, resolution: Sequence[int], samples: str = "corners"):
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        self.resolution = tuple(int(n) for n in resolution)
        if len(self.resolution) != self.bounds.shape[0]:
            raise ReachabilityError("grid_dimension_mismatch", "one cell count per bound is required")
        if any(n <= 0 for n in self.resolution):
            raise ReachabilityError("empty_grid", f"resolution {self.resolution} must be positive")
        if samples not in self.SAMPLE_KINDS:
            raise ReachabilityError("unknown_sampling", f"samples must be one of {self.SAMPLE_KINDS}")
        self.samples = samples
        self.lo = self.bounds[:, 0]
        self.hi = self.bounds[:, 1]
        self.width = (self.hi - self.lo) / np.asarray(self.resolution, dtype=float)

    @property
    def dims(self) -> int:
        return len(self.resolution)

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def in_bounds(self, state, tol: float = 1e-9) -> bool:
        s = np.asarray(state, dtype=float).reshape(-1)
        return s.shape[0] == self.dims and bool(np.all(s >= self.lo - tol) and np.all(s <= self.hi + tol))

    def cells_of(self, states) -> np.ndarray:
        """Multi-indices (N, d) of a batch of states."""
        s = np.asarray(states, dtype=float).reshape(-1, self.dims)
        idx = np.floor((s - self.lo) / self.width).astype(np.int64)
        return np.clip(idx, 0, np.asarray(self.resolution) - 1)

    def indices_of(self, states) -> np.ndarray:
        return np.ravel_multi_index(self.cells_of(states).T, self.resolution)

    def index_of(self, state) -> int:
        return int(self.indices_of(state)[0])

    def cell_of(self, state) -> Tuple[int, ...]:
        return tuple(int(i) for i in self.cells_of(state)[0])

    @cached_property
    def centers(self) -> np.ndarray:
        idx = np.indices(self.resolution).reshape(self.dims, -1).T
        return self.lo + (idx + 0.5) * self.width

    def center_of(self, index: int) -> np.ndarray:
        return self.centers[index]

    def snap(self, state) -> np.ndarray:
        return self.centers[self.index_of(state)].copy()

    @cached_property
    def sample_points(self) -> np.ndarray:
        """(N, S, d) sample points per cell; sample 0 is always the centre."""
        offsets = [np.zeros(self.dims)]
        if self.samples == "corners":
            half = self.width / 2.0 * (1.0 - 1e-6)
            for signs in itertools.product((-1.0, 1.0), repeat=self.dims):
                offsets.append(np.asarray(signs) * half)
        offsets = np.asarray(offsets)
        return self.centers[:, None, :] + offsets[None, :, :]

    def describe(self) -> dict:
        return {
            "resolution": list(self.resolution),
            "bounds": self.bounds.tolist(),
            "samples": self.samples,
        }

    def __eq__(self, other):
        return (
            isinstance(other, GridSpec)
            and self.resolution == other.resolution
            and self.samples == other.samples
            and np.array_equal(self.bounds, other.bounds)
        )

    def __hash__(self):
        return hash((self.resolution, self.samples, self.bounds.tobytes()))

    def __repr__(self):
        return f"GridSpec({self.resolution}, samples={self.samples!r})"


# -------- regions --------

@dataclass(eq=False)
class RegionMask:
    """One boolean per grid cell (flat, row-major)."""
    grid: GridSpec
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=bool).reshape(-1)
        if self.cells.shape[0] != self.grid.size:
            raise ReachabilityError(
                "mask_dimension_mismatch",
                f"mask has {self.cells.shape[0]} cells, grid has {self.grid.size}",
            )

    # ---- constructors ----

    @classmethod
    def full(cls, grid: GridSpec) -> "RegionMask":
        return cls(grid, np.ones(grid.size, dtype=bool))

    @classmethod
    def empty(cls, grid: GridSpec) -> "RegionMask":
        return cls(grid, np.zeros(grid.size, dtype=bool))

    @classmethod
    def from_predicate(cls, grid: GridSpec, membership: Callable[[np.ndarray], bool]) -> "RegionMask":
        return cls(grid, np.fromiter((bool(membership(c)) for c in grid.centers), dtype=bool, count=grid.size))

    @classmethod
    def from_indices(cls, grid: GridSpec, indices) -> "RegionMask":
        cells = np.zeros(grid.size, dtype=bool)
        cells[np.asarray(list(indices), dtype=np.int64)] = True
        return cls(grid, cells)

    # ---- queries ----

    def contains(self, state) -> bool:
        if not self.grid.in_bounds(state):
            return False
        return bool(self.cells[self.grid.index_of(state)])

    __contains__ = contains

    def count(self) -> int:
        return int(self.cells.sum())

    def any(self) -> bool:
        return bool(self.cells.any())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.cells)

    def issubset(self, other: "RegionMask") -> bool:
        return not bool(np.any(self.cells & ~other.cells))

    def as_array(self) -> np.ndarray:
        return self.cells.reshape(self.grid.resolution)

    # ---- set algebra ----

    def _check(self, other):
        if self.grid != other.grid:
            raise ReachabilityError("mask_dimension_mismatch", "masks live on different grids")

    def __and__(self, other):
        self._check(other)
        return RegionMask(self.grid, self.cells & other.cells)

    def __or__(self, other):
        self._check(other)
        return RegionMask(self.grid, self.cells | other.cells)

    def __sub__(self, other):
        self._check(other)
        return RegionMask(self.grid, self.cells & ~other.cells)

    def __invert__(self):
        return RegionMask(self.grid, ~self.cells)

    def __eq__(self, other):
        return isinstance(other, RegionMask) and self.grid == other.grid and np.array_equal(self.cells, other.cells)

    __hash__ = None
