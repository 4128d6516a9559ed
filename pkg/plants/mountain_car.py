"""
Mountain car with a cliff on the left.

The plant runs in grid mode: after every step the state snaps to the
centre of its grid cell, so the centre-successor tables of the grid
oracle describe the simulated plant exactly.

Timing: controllers and the DM fire at phase 0, the plant at phase
TICK / 2, all with period TICK, so Δ is one plant tick.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache, partial
from typing import Optional, Tuple

import numpy as np

from coremodel.nodes import NodeBody, NodeKind, NodeSpec
from coremodel.topics import COORD, SCALAR, TopicDecl
from reachability.grid import DynamicsModel, GridSpec, RegionMask
from reachability.oracle import GridOracle, distance_to_target, transitions, viability_kernel
from rta.modules import RTAModuleSpec
from rta.predicates import SafetyPredicate
from semantics.system import SystemSpec
from wellformedness.checks import GridAbstraction

from .common import Deployment, deploy

logger = logging.getLogger(__name__)

FORCE = 0.001
GRAVITY = 0.0025
X_MIN, X_MAX = -1.2, 0.6
V_CAP = 0.07
X_GOAL = 0.5
X_CLIFF = -1.1
CONTROLS = (-1, 0, 1)
SC_PREFERENCE = (0, 1, -1)
TICK = 10
INITIAL_STATE = (-0.5, 0.0)
MUTANTS = ("p2a", "p2b", "p3")


def step_batch(states: np.ndarray, a, x_cliff: float = X_CLIFF) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    x, v = states[:, 0], states[:, 1]
    v2 = np.clip(v + a * FORCE - np.cos(3 * x) * GRAVITY, -V_CAP, V_CAP)
    x2 = np.clip(x + v2, X_MIN, X_MAX)
    v2 = np.where((x2 <= X_MIN) & (v2 < 0), 0.0, v2)
    fell = x <= x_cliff
    return np.stack([np.where(fell, x, x2), np.where(fell, v, v2)], axis=1)


def mountain_car_step(state, a, x_cliff: float = X_CLIFF) -> np.ndarray:
    return step_batch(np.asarray(state, dtype=float).reshape(1, 2), a, x_cliff)[0]


def has_fallen(state, x_cliff: float = X_CLIFF) -> bool:
    return float(state[0]) <= x_cliff


def at_goal(state) -> bool:
    return float(state[0]) >= X_GOAL


def energy_pumping(state) -> int:
    """Push in the direction of motion."""
    return -1 if float(state[1]) < 0 else 1


@dataclass(eq=False)
class MountainCarModel:
    dyn: DynamicsModel
    grid: GridSpec
    safe: RegionMask
    safer: RegionMask
    dist: np.ndarray
    policy_table: np.ndarray
    oracle: GridOracle
    x_cliff: float
    delta: float

    def snap(self, state) -> Tuple[float, float]:
        return tuple(float(c) for c in self.grid.snap(state))

    def sc_policy(self, state) -> int:
        return int(self.policy_table[self.grid.index_of(state)])

    def ttf(self, state) -> bool:
        return self.oracle.ttf(state, 2 * self.delta)

    @property
    def p2b_horizon(self) -> float:
        finite = self.dist[np.isfinite(self.dist)]
        return (float(finite.max()) + 10) * TICK if finite.size else 0.0


@lru_cache(maxsize=8)
def mountain_car_model(resolution: Tuple[int, int] = (100, 100), x_cliff: float = X_CLIFF,
                       delta: float = TICK) -> MountainCarModel:
    """
    φ_safe: cells that can stay off the cliff forever and can reach the
    goal without leaving the set (kernel and reachability intersected
    until stable). The SC picks, among controls whose successor stays in
    φ_safe, the one closest to the goal; ties go 0, +1, -1.
    """
    dyn = DynamicsModel(
        bounds=[[X_MIN, X_MAX], [-V_CAP, V_CAP]],
        controls=CONTROLS,
        step=partial(step_batch, x_cliff=x_cliff),
        dt=TICK,
        name="mountain-car",
    )
    grid = GridSpec(dyn.bounds, tuple(resolution), samples="corners")
    goal = RegionMask(grid, grid.centers[:, 0] >= X_GOAL)
    safe = RegionMask(grid, grid.centers[:, 0] > x_cliff)
    while True:
        kernel = viability_kernel(safe, dyn)
        dist = distance_to_target(goal & kernel, kernel, dyn)
        shrunk = RegionMask(grid, kernel.cells & np.isfinite(dist))
        if shrunk == safe:
            break
        safe = shrunk

    order = [CONTROLS.index(u) for u in SC_PREFERENCE]
    succ = transitions(dyn, grid).center[order]
    cost = np.where(safe.cells[succ], dist[succ], np.inf)
    choice = np.where(np.isfinite(cost).any(axis=0), np.argmin(cost, axis=0), np.argmin(dist[succ], axis=0))
    policy = np.asarray(SC_PREFERENCE)[choice]

    oracle = GridOracle(dyn, grid, safe)
    safer = oracle.shrink(2 * delta)
    logger.info(
        "mountain car %s: |φ_safe|=%d |φ_safer|=%d of %d cells",
        "x".join(map(str, resolution)), safe.count(), safer.count(), grid.size,
    )
    return MountainCarModel(dyn, grid, safe, safer, dist, policy, oracle, x_cliff, delta)


# -------- nodes --------

def plant_body(model: MountainCarModel, initial=INITIAL_STATE) -> NodeBody:
    def transition(state, inputs):
        nxt = model.snap(mountain_car_step(state, inputs["throttle"], model.x_cliff))
        return nxt, {"state": nxt}

    return NodeBody(transition, initial_local_state=model.snap(initial))


def ac_body() -> NodeBody:
    return NodeBody.stateless(lambda inputs: {"throttle": energy_pumping(inputs["state"])})


def sc_body(policy) -> NodeBody:
    return NodeBody.stateless(lambda inputs: {"throttle": policy(inputs["state"])})


def predicates(model: MountainCarModel, mutant: Optional[str] = None):
    """(φ_safe, φ_safer, SC policy); a mutant breaks exactly one of P2a, P2b, P3."""
    if mutant is not None and mutant not in MUTANTS:
        raise ValueError(f"unknown mutant {mutant!r}")
    safer = model.safer
    policy = model.sc_policy
    if mutant == "p3":
        safer = model.safe
    elif mutant == "p2a":
        policy = lambda state: 0
    elif mutant == "p2b":
        safer = safer & RegionMask(model.grid, model.grid.centers[:, 0] < -0.9)
    return (
        SafetyPredicate.from_region(model.safe, "PhiSafe"),
        SafetyPredicate.from_region(safer, "PhiSafer"),
        policy,
    )


def mountain_car_module(model: MountainCarModel, mutant: Optional[str] = None):
    safe, safer, policy = predicates(model, mutant)
    ac = ac_body()
    sc = sc_body(policy)
    module = RTAModuleSpec(
        name="car",
        ac=NodeSpec("car_ac", inputs={"state"}, outputs={"throttle"}, period=TICK,
                    transition=ac.transition, kind=NodeKind.AC),
        sc=NodeSpec("car_sc", inputs={"state"}, outputs={"throttle"}, period=TICK,
                    transition=sc.transition, kind=NodeKind.SC),
        dm_name="car_dm",
        delta=model.delta,
        safe=safe,
        safer=safer,
        ttf2d=model.ttf,
        oracle=model.oracle,
    )
    return module, GridAbstraction(model.dyn, model.grid, policy)


def mountain_car_system(model: MountainCarModel, initial=INITIAL_STATE, mutant: Optional[str] = None,
                        deployment=Deployment.RTA) -> SystemSpec:
    module, _ = mountain_car_module(model, mutant)
    modules, controllers, monitors = deploy(module, deployment)
    plant = plant_body(model, initial)
    topics = {
        "state": TopicDecl("state", COORD, default=plant.initial_local_state),
        "throttle": TopicDecl("throttle", SCALAR, default=0),
    }
    cart = NodeSpec("cart", inputs={"throttle"}, outputs={"state"}, period=TICK, phase=TICK // 2,
                   transition=plant.transition, initial_local_state=plant.initial_local_state)
    return SystemSpec(topics=topics, modules=modules, free_nodes=(cart,) + controllers, monitors=monitors,
                      name=f"mountain-car/{Deployment(deployment).value}")
