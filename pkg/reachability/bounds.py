"""Closed-form time-to-failure bounds used where no grid oracle is available."""
from typing import Callable, Union

import numpy as np
from scipy import ndimage

from .grid import DynamicsModel, ReachabilityError, RegionMask


def boundary_distance_map(region: RegionMask) -> np.ndarray:
    """
    Per-cell Euclidean distance from the cell centre to the region
    boundary (0 outside the region). Cells on the grid edge are not
    treated as boundary.
    """
    grid = region.grid
    inside = region.as_array()
    if not inside.any():
        return np.zeros(grid.size)
    if inside.all():
        return np.full(grid.size, np.inf)
    dist = ndimage.distance_transform_edt(inside, sampling=grid.width)
    dist = np.where(inside, np.maximum(dist - grid.width.min() / 2.0, 0.0), 0.0)
    return dist.reshape(-1)


def boundary_distance(s, region: RegionMask) -> float:
    if not region.contains(s):
        return 0.0
    return float(boundary_distance_map(region)[region.grid.index_of(s)])


def ttf_lipschitz(distance: float, lipschitz: float, two_delta: float) -> bool:
    """True iff the boundary could be reached within 2Δ at rate L_u."""
    if lipschitz <= 0:
        raise ReachabilityError("nonpositive_lipschitz", f"Lipschitz constant {lipschitz!r} must be > 0")
    return distance / lipschitz <= two_delta


def cost_star(dyn: DynamicsModel, two_delta: float, dim: int = 0) -> float:
    """Worst-case drop of state[dim] over 2Δ, starting from the top of its range."""
    ticks = dyn.ticks(two_delta)
    start = dyn.bounds[:, 1].copy()
    worst = 0.0
    for u in dyn.controls:
        s = start.copy()
        for _ in range(ticks):
            s = dyn.step_one(s, u)
        worst = max(worst, float(start[dim] - s[dim]))
    return worst


def ttf_battery(charge: float, cost: float, t_max: float) -> bool:
    return charge - cost < t_max


def ttf_vmax(s, phi_safe: Union[RegionMask, Callable, object], v_max: float, two_delta: float,
             samples_per_axis: int = 5) -> bool:
    """
    True iff some point of the box s ± v_max·2Δ lies outside phi_safe.

    phi_safe may be a RegionMask, an object with a `region` mask, or a
    plain membership callable (checked on a sample lattice).
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    r = v_max * two_delta
    region = phi_safe if isinstance(phi_safe, RegionMask) else getattr(phi_safe, "region", None)
    if region is not None:
        grid = region.grid
        if not (grid.in_bounds(s - r) and grid.in_bounds(s + r)):
            return True
        lo = grid.cell_of(s - r)
        hi = grid.cell_of(s + r)
        window = region.as_array()[tuple(slice(a, b + 1) for a, b in zip(lo, hi))]
        return not bool(window.all())
    membership = getattr(phi_safe, "membership", phi_safe)
    axes = [np.linspace(c - r, c + r, samples_per_axis) for c in s]
    for point in np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, s.shape[0]):
        if not membership(point):
            return True
    return False
