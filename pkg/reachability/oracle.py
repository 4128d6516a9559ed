"""
Grid reachability over a DynamicsModel.

Successor tables are built once per (model, grid) pair and reused by
every query:

- star:   per control, (N, S) successor cells of every sample point
- center: per control, (N,) successor cell of the cell centre

reach_star and region_shrink use the star table (over-approximation);
closed-loop maps and kernels use the centre table, which is exact for a
plant that snaps to cell centres.
"""
import logging
import weakref
from collections import deque
from typing import Callable, Dict, Optional, Protocol, runtime_checkable

import numpy as np

from .grid import DynamicsModel, GridSpec, ReachabilityError, RegionMask

logger = logging.getLogger(__name__)


class Transitions:
    def __init__(self, dyn: DynamicsModel, grid: GridSpec):
        if dyn.dims != grid.dims:
            raise ReachabilityError("grid_dimension_mismatch", f"{dyn.name or 'model'} has {dyn.dims} dims, grid has {grid.dims}")
        self.dyn = dyn
        self.grid = grid
        pts = grid.sample_points
        n, s, d = pts.shape
        flat = pts.reshape(n * s, d)
        star = []
        for u in dyn.controls:
            nxt = np.asarray(dyn.step(flat, u), dtype=float)
            star.append(grid.indices_of(nxt).reshape(n, s))
        self.star = np.stack(star)            # (U, N, S)
        self.center = self.star[:, :, 0]      # (U, N)
        logger.debug("built successor tables for %s on %s", dyn.name or "model", grid)

    def any_successor(self, indices) -> np.ndarray:
        return np.unique(self.star[:, indices, :].ravel())


_TABLES: "weakref.WeakKeyDictionary[DynamicsModel, Dict[GridSpec, Transitions]]" = weakref.WeakKeyDictionary()


def transitions(dyn: DynamicsModel, grid: GridSpec) -> Transitions:
    per_model = _TABLES.setdefault(dyn, {})
    table = per_model.get(grid)
    if table is None:
        table = per_model[grid] = Transitions(dyn, grid)
    return table


def _start_index(s, grid: GridSpec) -> int:
    if not grid.in_bounds(s):
        raise ReachabilityError("out_of_bounds_state", f"state {np.asarray(s).tolist()} is outside the grid")
    return grid.index_of(s)


# -------- open-loop reachability --------

def reach_star(s, t: float, dyn: DynamicsModel, grid: GridSpec) -> RegionMask:
    """Cells reachable from s within duration t under any control sequence."""
    table = transitions(dyn, grid)
    visited = np.zeros(grid.size, dtype=bool)
    start = _start_index(s, grid)
    visited[start] = True
    frontier = np.array([start])
    for _ in range(dyn.ticks(t)):
        nxt = table.any_successor(frontier)
        frontier = nxt[~visited[nxt]]
        if frontier.size == 0:
            break
        visited[frontier] = True
    return RegionMask(grid, visited)


def reach_sc(s, t: float, sc_policy: Callable, dyn: DynamicsModel, grid: GridSpec) -> RegionMask:
    """Cells visited by the closed loop under sc_policy from the cell of s."""
    _start_index(s, grid)
    visited = np.zeros(grid.size, dtype=bool)
    cur = grid.snap(s)
    visited[grid.index_of(cur)] = True
    for _ in range(dyn.ticks(t)):
        cur = grid.snap(dyn.step_one(cur, sc_policy(cur)))
        visited[grid.index_of(cur)] = True
    return RegionMask(grid, visited)


def region_shrink(phi: RegionMask, t: float, dyn: DynamicsModel, grid: GridSpec) -> RegionMask:
    """
    Cells whose every reachable cell within t stays inside phi.
    Monotone: a larger t never yields a larger region.
    """
    table = transitions(dyn, grid)
    keep = phi.cells.copy()
    for _ in range(dyn.ticks(t)):
        nxt = phi.cells.copy()
        for succ in table.star:
            nxt &= keep[succ].all(axis=1)
        if np.array_equal(nxt, keep):
            break
        keep = nxt
    return RegionMask(grid, keep)


def ttf_grid(s, phi_safe: RegionMask, two_delta: float, dyn: DynamicsModel, grid: GridSpec) -> bool:
    return not region_shrink(phi_safe, two_delta, dyn, grid).contains(s)


# -------- closed-loop helpers --------

def _control_key(u):
    return tuple(np.atleast_1d(np.asarray(u, dtype=float)).tolist())


def closed_loop_map(policy: Callable, dyn: DynamicsModel, grid: GridSpec) -> np.ndarray:
    """Centre successor of every cell under a state-feedback policy."""
    centers = grid.centers
    groups: Dict[tuple, list] = {}
    controls = {}
    for i, c in enumerate(centers):
        u = policy(c)
        key = _control_key(u)
        groups.setdefault(key, []).append(i)
        controls.setdefault(key, u)
    out = np.empty(grid.size, dtype=np.int64)
    for key, members in groups.items():
        members = np.asarray(members)
        nxt = np.asarray(dyn.step(centers[members], controls[key]), dtype=float)
        out[members] = grid.indices_of(nxt)
    return out


def closure(start: RegionMask, succ: np.ndarray) -> RegionMask:
    """Cells reachable from start by iterating a deterministic successor map."""
    visited = start.cells.copy()
    frontier = np.flatnonzero(visited)
    while frontier.size:
        nxt = np.unique(succ[frontier])
        frontier = nxt[~visited[nxt]]
        visited[frontier] = True
    return RegionMask(start.grid, visited)


def viability_kernel(region: RegionMask, dyn: DynamicsModel) -> RegionMask:
    """Largest subset of region where some control keeps the centre successor inside it."""
    table = transitions(dyn, region.grid)
    keep = region.cells.copy()
    while True:
        ok = np.zeros_like(keep)
        for succ in table.center:
            ok |= keep[succ]
        nxt = keep & ok
        if np.array_equal(nxt, keep):
            return RegionMask(region.grid, keep)
        keep = nxt


def distance_to_target(target: RegionMask, within: RegionMask, dyn: DynamicsModel) -> np.ndarray:
    """
    Fewest ticks to reach target while staying in within, using centre
    successors. Unreachable cells get +inf.
    """
    grid = target.grid
    table = transitions(dyn, grid)
    dist = np.full(grid.size, np.inf)
    dist[target.cells] = 0.0
    preds = [[] for _ in range(grid.size)]
    for succ in table.center:
        for i in np.flatnonzero(within.cells & ~target.cells):
            preds[succ[i]].append(i)
    queue = deque(np.flatnonzero(target.cells).tolist())
    while queue:
        j = queue.popleft()
        for i in preds[j]:
            if dist[i] == np.inf:
                dist[i] = dist[j] + 1.0
                queue.append(i)
    return dist


# -------- oracles --------

@runtime_checkable
class ReachOracle(Protocol):
    """What the decision-module invariant needs from a reachability backend."""

    def covers(self, s) -> bool: ...

    def reach_within_safe(self, s, t: float) -> bool: ...


class GridOracle:
    """ReachOracle backed by region_shrink over a fixed safe region."""

    def __init__(self, dyn: DynamicsModel, grid: GridSpec, safe: RegionMask):
        self.dyn = dyn
        self.grid = grid
        self.safe = safe
        self._shrunk: Dict[int, RegionMask] = {}

    def shrink(self, t: float) -> RegionMask:
        ticks = self.dyn.ticks(t)
        mask = self._shrunk.get(ticks)
        if mask is None:
            mask = self._shrunk[ticks] = region_shrink(self.safe, t, self.dyn, self.grid)
        return mask

    def covers(self, s) -> bool:
        return self.grid.in_bounds(s)

    def reach_within_safe(self, s, t: float) -> bool:
        return self.shrink(t).contains(s)

    def ttf(self, s, two_delta: float) -> bool:
        return not self.reach_within_safe(s, two_delta)


class ClosedFormOracle:
    """ReachOracle from a conservative analytic bound: fn(s, t) -> stays safe."""

    def __init__(self, fn: Callable, domain: Optional[Callable] = None):
        self.fn = fn
        self.domain = domain

    def covers(self, s) -> bool:
        return True if self.domain is None else bool(self.domain(s))

    def reach_within_safe(self, s, t: float) -> bool:
        return bool(self.fn(s, t))
