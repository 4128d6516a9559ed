"""
Plant registry: what a DSL program's `fun` names mean for each plant.

A PlantBinding builds a PlantKit from scenario parameters. The kit holds
the function bindings, per-topic defaults that must match the plant's
initial state, the static-check view of every module, and plant-specific
fault factories.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

from coremodel.nodes import NodeBody
from rta.modules import RTAModuleSpec
from rta.predicates import SafetyPredicate
from wellformedness.checks import GridAbstraction

from . import battery, drone, exploration, mountain_car

logger = logging.getLogger(__name__)

PROGRAMS_DIR = Path(__file__).resolve().parent / "programs"

# module -> (module to check, abstraction, P2b horizon)
CheckView = Callable[[RTAModuleSpec], Tuple[RTAModuleSpec, Optional[GridAbstraction], Optional[float]]]


@dataclass
class PlantKit:
    functions: Dict[str, Any]
    topic_defaults: Dict[str, Any] = field(default_factory=dict)
    check_views: Dict[str, CheckView] = field(default_factory=dict)
    faults: Dict[str, Callable] = field(default_factory=dict)
    horizon: float = 1000
    completion: Optional[Tuple[str, Callable[[Any], bool]]] = None

    def check_view(self, module: RTAModuleSpec):
        view = self.check_views.get(module.name)
        if view is None:
            return module, None, None
        return view(module)

    def merge(self, other: "PlantKit") -> "PlantKit":
        clash = set(self.functions) & set(other.functions)
        if clash:
            raise ValueError(f"function names bound twice: {sorted(clash)}")
        return PlantKit(
            functions={**self.functions, **other.functions},
            topic_defaults={**self.topic_defaults, **other.topic_defaults},
            check_views={**self.check_views, **other.check_views},
            faults={**self.faults, **other.faults},
            horizon=max(self.horizon, other.horizon),
            completion=self.completion or other.completion,
        )


@dataclass(frozen=True)
class PlantBinding:
    name: str
    program: str
    build: Callable[..., PlantKit]
    description: str = ""

    @property
    def program_path(self) -> Path:
        return PROGRAMS_DIR / self.program


def _mountain_car(resolution=None, delta=None, x_cliff=None, initial=None, mutant=None, **_) -> PlantKit:
    model = mountain_car.mountain_car_model(
        tuple(resolution or (100, 100)),
        mountain_car.X_CLIFF if x_cliff is None else float(x_cliff),
        mountain_car.TICK if delta is None else float(delta),
    )
    safe, safer, policy = mountain_car.predicates(model, mutant)
    plant = mountain_car.plant_body(model, initial or mountain_car.INITIAL_STATE)
    abstraction = GridAbstraction(model.dyn, model.grid, policy)
    return PlantKit(
        functions={
            "CarPlant": plant,
            "EnergyPumping": mountain_car.ac_body(),
            "CliffAvoidance": mountain_car.sc_body(policy),
            "PhiSafe": safe,
            "PhiSafer": safer,
            "TTF2D": model.ttf,
            "CarReach": model.oracle,
        },
        topic_defaults={"state": plant.initial_local_state},
        check_views={"car": lambda module: (module, abstraction, model.p2b_horizon)},
        horizon=400 * mountain_car.TICK,
        completion=("state", mountain_car.at_goal),
    )


def _goto(epsilon=None, seed=None, initial=None, **_) -> PlantKit:
    epsilon = drone.EPSILON if epsilon is None else float(epsilon)
    runtime = drone.goto_module(epsilon)
    segments = drone.track_segments()
    plant = drone.plant_body(initial or drone.initial_state(seed))
    model = drone.lateral_model(epsilon=epsilon)
    return PlantKit(
        functions={
            "DronePlant": plant,
            "WaypointPlanner": drone.planner_body(segments),
            "GotoFast": drone.ac_body(),
            "GotoSafe": drone.sc_body(),
            "PhiTube": runtime.safe,
            "PhiTubeSafer": runtime.safer,
            "TTFTube": runtime.ttf2d,
            "TubeReach": runtime.oracle,
        },
        topic_defaults={"state": plant.initial_local_state, "segment": segments[0]},
        check_views={"goto": lambda module: (*drone.lateral_module(model, module), model.p2b_horizon)},
        faults={"overshoot": drone.OvershootFault},
        horizon=60_000,
        completion=("done", lambda done: done is True),
    )


def _battery(preset=None, seed=None, initial=None, **_) -> PlantKit:
    module = battery.battery_module(preset or "default")
    plant = battery.plant_body(battery.mission_targets(seed or 0), initial or (100.0, 0.0))
    b0, d0, _ = plant.initial_local_state
    return PlantKit(
        functions={
            "BatteryPlant": plant,
            "Mission": NodeBody.stateless(lambda inputs: {"plan": battery.MISSION}),
            "ReturnHome": NodeBody.stateless(lambda inputs: {"plan": battery.HOME}),
            "PhiCharged": module.safe,
            "PhiWellCharged": module.safer,
            "TTFBattery": module.ttf2d,
            "BatteryReach": module.oracle,
        },
        topic_defaults={"battery": (b0, d0)},
        check_views={"battery": lambda m: (*battery.battery_abstraction(m), None)},
        horizon=20_000,
    )


def _exploration(delta=None, **_) -> PlantKit:
    world = exploration.exploration_map(delta=exploration.TICK if delta is None else float(delta))
    module = exploration.exploration_module(world, world.delta)
    plant = exploration.plant_body(world)
    pose, anchor = plant.initial_local_state
    ac = exploration.ac_body(world)
    return PlantKit(
        functions={
            "RoverPlant": plant,
            "Explorer": ac,
            "ReturnToKnown": exploration.sc_body(world),
            "PhiNoWall": module.safe,
            "PhiKnown": module.safer,
            "TTFWall": module.ttf2d,
            "WallReach": module.oracle,
        },
        topic_defaults={"pose": pose, "anchor": anchor},
        check_views={"explore": lambda m: (m, exploration.exploration_abstraction(world), None)},
        horizon=60_000,
    )


def _goto_battery(**params) -> PlantKit:
    return _goto(**params).merge(_battery(**params))


PLANTS: Dict[str, PlantBinding] = {
    b.name: b
    for b in (
        PlantBinding("mountain-car", "mountain_car.rta", _mountain_car, "mountain car with a cliff, grid-snapped"),
        PlantBinding("goto", "goto.rta", _goto, "drone following a square track inside an ε-tube"),
        PlantBinding("battery", "battery.rta", _battery, "mission flight that must keep enough charge to get home"),
        PlantBinding("exploration", "exploration.rta", _exploration, "exploring a room with hidden walls"),
        PlantBinding("goto+battery", "goto_battery.rta", _goto_battery, "tube-tracking and battery modules composed"),
    )
}


def get_plant(name: str) -> PlantBinding:
    try:
        return PLANTS[name]
    except KeyError:
        raise KeyError(f"unknown plant {name!r}; known plants: {', '.join(sorted(PLANTS))}") from None


def predicate(handle) -> SafetyPredicate:
    """Accept a SafetyPredicate or a bare membership callable."""
    if isinstance(handle, SafetyPredicate):
        return handle
    return SafetyPredicate(handle)
