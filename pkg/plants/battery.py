"""
Battery safety for a drone flying a mission away from its base.

State (b, d): charge in percent and distance from the charging pad.
The AC keeps the mission plan; the SC orders the drone home, where it
charges. φ_safe = b > 0 and φ_safer = b > threshold (preset).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from coremodel.nodes import NodeBody, NodeKind, NodeSpec
from coremodel.topics import TopicDecl, ValueDomain
from reachability.bounds import cost_star, ttf_battery
from reachability.grid import DynamicsModel, GridSpec, RegionMask
from reachability.oracle import ClosedFormOracle
from rta.modules import RTAModuleSpec
from rta.predicates import SafetyPredicate
from semantics.system import SystemSpec
from wellformedness.checks import GridAbstraction

from .common import Deployment, deploy

logger = logging.getLogger(__name__)

TICK = 10
D_MAX = 20.0
SPEED = 1.0
C_HOVER = 0.05
C_MOVE = 0.1
CHARGE_RATE = 2.0
PRESETS = {"default": 85.0, "strict": 95.0, "field": 90.0}

MISSION = "mission"
HOME = "home"
PLAN = ValueDomain("enum", choices=(MISSION, HOME))
VEC2 = ValueDomain("vector", dim=2)


def discharge_cost(u) -> float:
    """Charge drawn per tick at commanded speed u."""
    return C_HOVER + C_MOVE * abs(float(u))


def battery_step(b: float, u, charging: bool, cost: Callable = discharge_cost, rate: float = CHARGE_RATE) -> float:
    if charging:
        return min(100.0, b + rate)
    return max(0.0, b - cost(u))


def _batch_step(states, u):
    states = np.asarray(states, dtype=float)
    b, d = states[:, 0], states[:, 1]
    d2 = np.clip(d + u * SPEED, 0.0, D_MAX)
    charging = (d == 0.0) & (u < 0)
    b2 = np.where(charging, np.minimum(100.0, b + CHARGE_RATE), np.maximum(0.0, b - discharge_cost(u)))
    return np.stack([b2, d2], axis=1)


def battery_dynamics() -> DynamicsModel:
    return DynamicsModel(
        bounds=[[0.0, 100.0], [0.0, D_MAX]],
        controls=(-1.0, 0.0, 1.0),
        step=_batch_step,
        dt=TICK,
        name="battery",
    )


@dataclass(frozen=True)
class BatteryBudget:
    """T_max: charge needed to get home from the farthest point, plus a margin. cost*: worst drop over 2Δ."""
    t_max: float
    cost: float
    safer_threshold: float

    def ttf(self, state) -> bool:
        return ttf_battery(float(state[0]), self.cost, self.t_max)


def battery_budget(preset: str = "default", delta: float = TICK, margin: float = 1.0) -> BatteryBudget:
    if preset not in PRESETS:
        raise ValueError(f"unknown battery preset {preset!r}; choose from {sorted(PRESETS)}")
    steps_home = int(np.ceil(D_MAX / SPEED))
    return BatteryBudget(
        t_max=steps_home * discharge_cost(1.0) + margin,
        cost=cost_star(battery_dynamics(), 2 * delta),
        safer_threshold=PRESETS[preset],
    )


def mission_targets(seed: int = 0, count: int = 64) -> tuple:
    rng = np.random.default_rng(seed)
    return tuple(float(round(x, 1)) for x in rng.uniform(2.0, D_MAX, size=count))


# -------- nodes --------

def plant_body(targets, initial=(100.0, 0.0)) -> NodeBody:
    """
    Local state (b, d, k): charge, distance, index of the current mission
    target. On "home" the drone flies back and charges on the pad.
    """

    def transition(local, inputs):
        b, d, k = local
        if inputs["plan"] == HOME:
            u = -1.0
            charging = d == 0.0
        else:
            target = targets[k % len(targets)]
            if abs(target - d) < SPEED / 2:
                k += 1
                target = targets[k % len(targets)]
            u = float(np.sign(target - d))
            charging = False
        b = battery_step(b, u, charging)
        d = float(np.clip(d + u * SPEED, 0.0, D_MAX)) if not charging else d
        return (b, d, k), {"battery": (b, d)}

    b0, d0 = (float(v) for v in initial)
    return NodeBody(transition, initial_local_state=(b0, d0, 0))


def battery_module(preset: str = "default", name: str = "battery") -> RTAModuleSpec:
    budget = battery_budget(preset)
    io = dict(inputs={"battery"}, outputs={"plan"}, period=TICK)
    return RTAModuleSpec(
        name=name,
        ac=NodeSpec(f"{name}_ac", transition=NodeBody.stateless(lambda inputs: {"plan": MISSION}).transition,
                    kind=NodeKind.AC, **io),
        sc=NodeSpec(f"{name}_sc", transition=NodeBody.stateless(lambda inputs: {"plan": HOME}).transition,
                    kind=NodeKind.SC, **io),
        dm_name=f"{name}_dm",
        delta=TICK,
        safe=SafetyPredicate(lambda s: float(s[0]) > 0, name="PhiCharged"),
        safer=SafetyPredicate(lambda s: float(s[0]) > budget.safer_threshold, name="PhiWellCharged"),
        ttf2d=budget.ttf,
        state_topic="battery",
        oracle=ClosedFormOracle(lambda s, t: float(s[0]) - budget.cost > 0),
        samples=tuple((float(b), 0.0) for b in np.linspace(0.0, 100.0, 101)),
    )


def battery_abstraction(module: RTAModuleSpec, resolution=(100, 20)):
    """
    Grid version of the module for P3. There is no SC policy on the grid:
    going home is only safe with enough charge, which is what ttf decides
    at runtime, so P2a/P2b are left to monitoring.
    """
    dyn = battery_dynamics()
    grid = GridSpec(dyn.bounds, resolution, samples="corners")
    safe = RegionMask.from_predicate(grid, module.safe)
    safer = RegionMask.from_predicate(grid, module.safer)
    gridded = RTAModuleSpec(
        name=module.name, ac=module.ac, sc=module.sc, dm_name=module.dm_name, delta=module.delta,
        safe=SafetyPredicate.from_region(safe, module.safe.name),
        safer=SafetyPredicate.from_region(safer, module.safer.name),
        ttf2d=module.ttf2d, state_topic=module.state_topic,
    )
    return gridded, GridAbstraction(dyn, grid)


def battery_nodes(deployment=Deployment.RTA, preset: str = "default", seed: int = 0, initial=(100.0, 0.0)):
    """(topics, modules, free nodes, monitors) for embedding the battery loop in a larger system."""
    module = battery_module(preset)
    modules, controllers, monitors = deploy(module, deployment)
    plant = plant_body(mission_targets(seed), initial)
    b0, d0, _ = plant.initial_local_state
    topics = {
        "battery": TopicDecl("battery", VEC2, default=(b0, d0)),
        "plan": TopicDecl("plan", PLAN, default=MISSION),
    }
    pack = NodeSpec("pack", inputs={"plan"}, outputs={"battery"}, period=TICK, phase=TICK // 2,
                    transition=plant.transition, initial_local_state=plant.initial_local_state)
    return topics, modules, (pack,) + controllers, monitors


def battery_system(deployment=Deployment.RTA, preset: str = "default", seed: int = 0,
                   initial=(100.0, 0.0)) -> SystemSpec:
    topics, modules, free, monitors = battery_nodes(deployment, preset, seed, initial)
    return SystemSpec(topics=topics, modules=modules, free_nodes=free, monitors=monitors,
                      name=f"battery/{Deployment(deployment).value}")
