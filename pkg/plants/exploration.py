"""
Safe exploration of a partly unknown room.

The drone starts in a known box. Walls outside it are discovered at
runtime: ttf checks the v_max·2Δ box around the drone against the wall
map, which stands for an onboard range sensor of at least that reach.
The SC flies back to the last known position and on to the centre.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import ndimage

from coremodel.nodes import NodeBody, NodeKind, NodeSpec
from coremodel.topics import TopicDecl, ValueDomain
from reachability.bounds import ttf_vmax
from reachability.grid import DynamicsModel, GridSpec, RegionMask
from reachability.oracle import ClosedFormOracle
from rta.modules import RTAModuleSpec
from rta.predicates import SafetyPredicate
from semantics.system import SystemSpec
from wellformedness.checks import GridAbstraction

from .common import Deployment, deploy

logger = logging.getLogger(__name__)

TICK = 100
TAU = TICK / 1000.0
V_MAX = 2.0
SIZE = 20.0
RESOLUTION = (80, 80)
KNOWN = ((6.0, 6.0), (14.0, 14.0))
CENTRE = (10.0, 10.0)
WAYPOINTS = ((2.0, 10.0), (10.0, 18.0), (19.0, 10.0), (10.0, 1.0), (16.0, 10.0))
ARRIVAL = 0.1

VEC2 = ValueDomain("vector", dim=2)


def default_walls(p) -> bool:
    x, y = float(p[0]), float(p[1])
    return x >= 18.0 or y <= 2.0 or (15.0 <= x <= 17.0 and 8.0 <= y <= 12.0)


@dataclass(frozen=True)
class ExplorationMap:
    grid: GridSpec
    walls: RegionMask
    known: RegionMask
    delta: float = TICK
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def free(self) -> RegionMask:
        return ~self.walls

    @property
    def safer(self) -> RegionMask:
        """The known area eroded by what the drone can cover in Δ."""
        if "safer" not in self._cache:
            cell = float(self.grid.width.min())
            depth = max(1, math.ceil(V_MAX * self.delta / 1000.0 / cell - 1e-9))
            eroded = ndimage.binary_erosion(self.known.as_array(), iterations=depth)
            self._cache["safer"] = RegionMask(self.grid, eroded.reshape(-1) & self.free.cells)
        return self._cache["safer"]

    def in_known(self, p) -> bool:
        return self.known.contains(p)


@lru_cache(maxsize=4)
def exploration_map(resolution: Tuple[int, int] = RESOLUTION, delta: float = TICK) -> ExplorationMap:
    grid = GridSpec([[0.0, SIZE], [0.0, SIZE]], resolution, samples="corners")
    (x0, y0), (x1, y1) = KNOWN
    known = RegionMask.from_predicate(grid, lambda c: x0 <= c[0] <= x1 and y0 <= c[1] <= y1)
    walls = RegionMask.from_predicate(grid, default_walls)
    if not known.any():
        raise ValueError("known region is empty")
    return ExplorationMap(grid, walls, known - walls, delta)


def move_toward(p, target, v_max: float = V_MAX) -> Tuple[float, float]:
    """Velocity command that reaches target in one tick if close enough."""
    gap = np.asarray(target, dtype=float) - np.asarray(p, dtype=float)
    dist = float(np.linalg.norm(gap))
    if dist < 1e-12:
        return (0.0, 0.0)
    speed = min(v_max, dist / TAU)
    v = gap / dist * speed
    return (float(v[0]), float(v[1]))


def explore_step(p, v) -> Tuple[float, float]:
    v = np.asarray(v, dtype=float)
    speed = float(np.linalg.norm(v))
    if speed > V_MAX:
        v = v * (V_MAX / speed)
    nxt = np.clip(np.asarray(p, dtype=float) + v * TAU, 0.0, SIZE)
    return (float(nxt[0]), float(nxt[1]))


# -------- nodes --------

def plant_body(world: ExplorationMap, initial=CENTRE) -> NodeBody:
    """Local state (pose, anchor); anchor is the last pose seen inside the known area."""

    def transition(local, inputs):
        pose, anchor = local
        pose = explore_step(pose, inputs["velocity"])
        if world.in_known(pose):
            anchor = pose
        return (pose, anchor), {"pose": pose, "anchor": anchor}

    start = (float(initial[0]), float(initial[1]))
    return NodeBody(transition, initial_local_state=(start, start))


def ac_body(world: ExplorationMap, waypoints=WAYPOINTS) -> NodeBody:
    """
    Alternates between the centre and the next outward waypoint. A
    waypoint is given up once the drone is back in the known area after
    having left it.
    """

    def transition(local, inputs):
        index, outward, left = local
        pose = inputs["pose"]
        inside = world.in_known(pose)
        target = waypoints[index % len(waypoints)] if outward else CENTRE
        if outward and left and inside:
            index, outward, left = index + 1, False, False
            target = CENTRE
        elif np.linalg.norm(np.subtract(pose, target)) < ARRIVAL:
            if outward:
                index += 1
            outward, left = not outward, False
            target = waypoints[index % len(waypoints)] if outward else CENTRE
        left = left or not inside
        return (index, outward, left), {"velocity": move_toward(pose, target)}

    return NodeBody(transition, initial_local_state=(0, True, False))


def sc_body(world: ExplorationMap) -> NodeBody:
    def transition(local, inputs):
        pose = inputs["pose"]
        target = CENTRE if world.in_known(pose) else inputs["anchor"]
        return local, {"velocity": move_toward(pose, target)}

    return NodeBody(transition)


def exploration_module(world: ExplorationMap, delta: float = TICK, name: str = "explore") -> RTAModuleSpec:
    two_delta_s = 2 * delta / 1000.0
    safe = SafetyPredicate.from_region(world.free, "PhiNoWall")
    ac, sc = ac_body(world), sc_body(world)
    return RTAModuleSpec(
        name=name,
        ac=NodeSpec(f"{name}_ac", inputs={"pose"}, outputs={"velocity"}, period=TICK,
                    transition=ac.transition, initial_local_state=ac.initial_local_state, kind=NodeKind.AC),
        sc=NodeSpec(f"{name}_sc", inputs={"pose", "anchor"}, outputs={"velocity"}, period=TICK,
                    transition=sc.transition, kind=NodeKind.SC),
        dm_name=f"{name}_dm",
        delta=delta,
        safe=safe,
        safer=SafetyPredicate.from_region(world.safer, "PhiKnown"),
        ttf2d=lambda p: ttf_vmax(p, safe, V_MAX, two_delta_s),
        state_topic="pose",
        oracle=ClosedFormOracle(
            lambda p, t: not ttf_vmax(p, safe, V_MAX, t / 1000.0),
            domain=world.grid.in_bounds,
        ),
    )


def _single_integrator_step(states, u):
    states = np.asarray(states, dtype=float)
    return np.clip(states + np.asarray(u, dtype=float) * TAU, 0.0, SIZE)


def exploration_abstraction(world: ExplorationMap) -> GridAbstraction:
    """Nine headings at full speed; no SC policy, so only P3 is decided on the grid."""
    headings = [(0.0, 0.0)] + [
        (V_MAX * math.cos(k * math.pi / 4), V_MAX * math.sin(k * math.pi / 4)) for k in range(8)
    ]
    dyn = DynamicsModel(
        bounds=world.grid.bounds,
        controls=tuple(headings),
        step=_single_integrator_step,
        dt=TICK,
        name="explore",
    )
    return GridAbstraction(dyn, world.grid)


def exploration_system(deployment=Deployment.RTA, world: ExplorationMap = None, initial=CENTRE) -> SystemSpec:
    world = world or exploration_map()
    module = exploration_module(world)
    modules, controllers, monitors = deploy(module, deployment)
    plant = plant_body(world, initial)
    pose, anchor = plant.initial_local_state
    topics = {
        "pose": TopicDecl("pose", VEC2, default=pose),
        "anchor": TopicDecl("anchor", VEC2, default=anchor),
        "velocity": TopicDecl("velocity", VEC2, default=(0.0, 0.0)),
    }
    drone = NodeSpec("rover", inputs={"velocity"}, outputs={"pose", "anchor"}, period=TICK, phase=TICK // 2,
                     transition=plant.transition, initial_local_state=plant.initial_local_state)
    return SystemSpec(topics=topics, modules=modules, free_nodes=(drone,) + controllers, monitors=monitors,
                      name=f"exploration/{Deployment(deployment).value}")
