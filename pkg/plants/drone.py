"""
Goto motion primitive for a planar drone: a 2-D double integrator that
must stay inside the ε-tube around the current segment.

Time is in milliseconds on the calendar and in seconds inside the
physics. Controllers, the planner and the DM fire every TICK at phase 0;
the plant fires at TICK / 2.

The DM observes an 8-vector: state (px, py, vx, vy) followed by the
current segment (ax, ay, bx, by).
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from coremodel.errors import ModelError
from coremodel.nodes import NodeBody, NodeKind, NodeSpec
from coremodel.topics import BOOL, TopicDecl, ValueDomain
from reachability.grid import DynamicsModel, GridSpec, RegionMask
from reachability.oracle import ClosedFormOracle, GridOracle, closed_loop_map
from rta.modules import RTAModuleSpec
from rta.predicates import SafetyPredicate
from semantics.runner import FaultAction
from semantics.system import SystemSpec
from wellformedness.checks import GridAbstraction

from .common import Deployment, deploy

logger = logging.getLogger(__name__)

TICK = 50
TAU = TICK / 1000.0
A_MAX = 6.0
A_PUSH = A_MAX * math.sqrt(2)
A_BRAKE = A_MAX
V_MAX = 3.0
EPSILON = 1.5
EPSILON_SAFER = 0.75
LOOKAHEAD = 2

KP, KD = 8.0, 3.0
SC_GAIN = 10.0
SC_LATERAL_SPEED = 1.5
SC_LATERAL_DECEL = 3.0
SC_ALONG_SPEED = 1.0
SC_ALONG_DECEL = 1.5
ADVANCE_RADIUS = 0.2

SQUARE_TRACK = ((0.0, 0.0), (8.0, 0.0), (8.0, 8.0), (0.0, 8.0), (0.0, 0.0))

VEC2 = ValueDomain("vector", dim=2)
VEC4 = ValueDomain("vector", dim=4)


@dataclass(frozen=True)
class TubeSpec:
    a: Tuple[float, float]
    b: Tuple[float, float]
    epsilon: float = EPSILON

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ModelError("malformed_tube", f"ε = {self.epsilon!r} must be > 0")
        if np.allclose(self.a, self.b):
            raise ModelError("malformed_tube", f"tube endpoints coincide at {tuple(self.a)}")

    @classmethod
    def from_segment(cls, segment, epsilon: float = EPSILON) -> "TubeSpec":
        ax, ay, bx, by = (float(v) for v in segment)
        return cls((ax, ay), (bx, by), epsilon)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.b, self.a)))

    @property
    def direction(self) -> np.ndarray:
        return np.subtract(self.b, self.a) / self.length

    @property
    def normal(self) -> np.ndarray:
        dx, dy = self.direction
        return np.array([-dy, dx])

    def frame(self, state):
        """(e, ve, along, v_along): signed lateral offset and velocity, progress and speed along the segment."""
        state = np.asarray(state, dtype=float)
        rel = state[:2] - np.asarray(self.a)
        v = state[2:4]
        return float(rel @ self.normal), float(v @ self.normal), float(rel @ self.direction), float(v @ self.direction)

    def contains(self, position) -> bool:
        return tube_distance(position, self) < self.epsilon


def tube_distance(x, tube: TubeSpec) -> float:
    """Distance from position x to the segment between the tube's endpoints."""
    rel = np.asarray(x, dtype=float)[:2] - np.asarray(tube.a)
    t = np.clip(rel @ tube.direction / tube.length, 0.0, 1.0)
    return float(np.linalg.norm(rel - t * tube.length * tube.direction))


def drone_step(state, accel) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    a = np.clip(np.asarray(accel, dtype=float), -A_MAX, A_MAX)
    v = np.clip(state[2:4] + a * TAU, -V_MAX, V_MAX)
    return np.concatenate([state[:2] + v * TAU, v])


def brake_distance(v: float) -> float:
    return v * v / (2 * A_BRAKE) + v * TAU


def excursion_bound(e: float, ve: float, steps: int = LOOKAHEAD, brake: bool = True) -> float:
    """
    Upper bound on |e| after `steps` plant ticks of arbitrary admissible
    acceleration, followed (if `brake`) by a full lateral stop.
    """
    speed = abs(ve)
    bound = abs(e) + steps * speed * TAU + A_PUSH * TAU * TAU * steps * (steps + 1) / 2
    if brake:
        bound += brake_distance(min(speed + steps * A_PUSH * TAU, V_MAX))
    return bound


def observation(inputs) -> np.ndarray:
    return np.concatenate([np.asarray(inputs["state"], dtype=float), np.asarray(inputs["segment"], dtype=float)])


def _lateral(obs) -> Tuple[float, float]:
    obs = np.asarray(obs, dtype=float)
    if obs.shape[-1] == 2:
        return float(obs[0]), float(obs[1])
    e, ve, _, _ = TubeSpec.from_segment(obs[4:8]).frame(obs[:4])
    return e, ve


def in_tube(obs, epsilon: float = EPSILON) -> bool:
    obs = np.asarray(obs, dtype=float)
    if obs.shape[-1] == 2:
        return abs(float(obs[0])) < epsilon
    return tube_distance(obs[:2], TubeSpec.from_segment(obs[4:8])) < epsilon


def in_safer(obs, epsilon_safer: float = EPSILON_SAFER) -> bool:
    return excursion_bound(*_lateral(obs)) < epsilon_safer


def ttf_tube(obs, epsilon: float = EPSILON) -> bool:
    return excursion_bound(*_lateral(obs)) >= epsilon


def stays_in_tube(obs, t: float, epsilon: float = EPSILON) -> bool:
    e, ve = _lateral(obs)
    return excursion_bound(e, ve, steps=math.ceil(t / TICK - 1e-9), brake=False) < epsilon


# -------- controllers --------

def goto_ac(state, target) -> np.ndarray:
    """Aggressive PD toward the target; tuned for speed, not for the tube."""
    state = np.asarray(state, dtype=float)
    a = KP * (np.asarray(target, dtype=float) - state[:2]) - KD * state[2:4]
    return np.clip(a, -A_MAX, A_MAX)


def sc_lateral_accel(e: float, ve: float) -> float:
    v_des = -math.copysign(min(SC_LATERAL_SPEED, math.sqrt(2 * SC_LATERAL_DECEL * abs(e))), e) if e else 0.0
    return float(np.clip(SC_GAIN * (v_des - ve), -A_MAX, A_MAX))


def goto_sc(state, tube: TubeSpec, delta: float = TICK) -> np.ndarray:
    """
    Pull back to the tube axis at a speed that can always be braked,
    and creep toward b. The lateral command is never scaled down; the
    along-track one shrinks to fit the per-axis limit.

    `delta` is the module's Δ in ms. The law does not depend on it.
    """
    e, ve, along, v_along = tube.frame(state)
    a_lat = sc_lateral_accel(e, ve)
    d = tube.length - along
    v_des = math.copysign(min(SC_ALONG_SPEED, math.sqrt(2 * SC_ALONG_DECEL * abs(d))), d)
    a_along = float(np.clip(SC_GAIN * (v_des - v_along), -A_MAX, A_MAX))
    lat = a_lat * tube.normal
    along = a_along * tube.direction
    room = [
        (A_MAX - abs(lat[i])) / abs(along[i]) for i in range(2) if abs(along[i]) > 1e-12
    ]
    scale = min([1.0] + room)
    return lat + max(scale, 0.0) * along


# -------- nodes --------

def track_segments(waypoints: Sequence = SQUARE_TRACK) -> Tuple[Tuple[float, float, float, float], ...]:
    pts = [tuple(float(c) for c in p) for p in waypoints]
    if len(pts) < 2:
        raise ModelError("malformed_track", "a track needs at least two waypoints")
    return tuple((*a, *b) for a, b in zip(pts, pts[1:]))


def plant_body(initial) -> NodeBody:
    def transition(state, inputs):
        nxt = tuple(float(v) for v in drone_step(state, inputs["accel"]))
        return nxt, {"state": nxt}

    return NodeBody(transition, initial_local_state=tuple(float(v) for v in initial))


def planner_body(segments) -> NodeBody:
    """
    Publishes the current segment and `done`. Advances once the drone is
    within ADVANCE_RADIUS of b and the next tube can be entered without
    tripping its time-to-failure check.
    """
    last = len(segments) - 1

    def transition(index, inputs):
        state = np.asarray(inputs["state"], dtype=float)
        seg = segments[index]
        near = np.linalg.norm(state[:2] - np.asarray(seg[2:4])) < ADVANCE_RADIUS
        if near and index < last and not ttf_tube(np.concatenate([state, segments[index + 1]])):
            index += 1
        done = bool(near and index == last)
        return index, {"segment": segments[index], "done": done}

    return NodeBody(transition, initial_local_state=0)


def ac_body() -> NodeBody:
    return NodeBody.stateless(
        lambda inputs: {"accel": tuple(goto_ac(inputs["state"], inputs["segment"][2:4]).tolist())}
    )


def sc_body(delta: float = TICK) -> NodeBody:
    return NodeBody.stateless(
        lambda inputs: {"accel": tuple(goto_sc(inputs["state"], TubeSpec.from_segment(inputs["segment"]), delta).tolist())}
    )


def goto_module(epsilon: float = EPSILON, epsilon_safer: float = EPSILON_SAFER, name: str = "goto") -> RTAModuleSpec:
    ac, sc = ac_body(), sc_body(TICK)
    io = dict(inputs={"state", "segment"}, outputs={"accel"}, period=TICK)
    return RTAModuleSpec(
        name=name,
        ac=NodeSpec(f"{name}_ac", transition=ac.transition, kind=NodeKind.AC, **io),
        sc=NodeSpec(f"{name}_sc", transition=sc.transition, kind=NodeKind.SC, **io),
        dm_name=f"{name}_dm",
        delta=TICK,
        safe=SafetyPredicate(lambda obs: in_tube(obs, epsilon), name="PhiTube"),
        safer=SafetyPredicate(lambda obs: in_safer(obs, epsilon_safer), name="PhiTubeSafer"),
        ttf2d=lambda obs: ttf_tube(obs, epsilon),
        observe=observation,
        extra_inputs=frozenset({"segment"}),
        oracle=ClosedFormOracle(lambda obs, t: stays_in_tube(obs, t, epsilon)),
    )


def initial_state(seed: Optional[int] = None, waypoints: Sequence = SQUARE_TRACK, spread: float = 0.3):
    """At rest at the first waypoint, offset sideways by a seeded amount."""
    tube = TubeSpec.from_segment(track_segments(waypoints)[0])
    offset = 0.0 if seed is None else float(np.random.default_rng(seed).uniform(-spread, spread))
    p = np.asarray(tube.a) + offset * tube.normal
    return (float(p[0]), float(p[1]), 0.0, 0.0)


def goto_system(deployment=Deployment.RTA, seed: Optional[int] = None, waypoints: Sequence = SQUARE_TRACK,
                epsilon: float = EPSILON) -> SystemSpec:
    segments = track_segments(waypoints)
    module = goto_module(epsilon)
    modules, controllers, monitors = deploy(module, deployment)
    plant = plant_body(initial_state(seed, waypoints))
    planner = planner_body(segments)
    topics = {
        "state": TopicDecl("state", VEC4, default=plant.initial_local_state),
        "accel": TopicDecl("accel", VEC2, default=(0.0, 0.0)),
        "segment": TopicDecl("segment", VEC4, default=segments[0]),
        "done": TopicDecl("done", BOOL, default=False),
    }
    free = (
        NodeSpec("drone", inputs={"accel"}, outputs={"state"}, period=TICK, phase=TICK // 2,
                 transition=plant.transition, initial_local_state=plant.initial_local_state),
        NodeSpec("planner", inputs={"state"}, outputs={"segment", "done"}, period=TICK,
                 transition=planner.transition, initial_local_state=planner.initial_local_state),
    ) + controllers
    return SystemSpec(topics=topics, modules=modules, free_nodes=free, monitors=monitors,
                      name=f"goto/{Deployment(deployment).value}")


# -------- grid abstraction of the lateral loop --------

@dataclass(eq=False)
class LateralModel:
    dyn: DynamicsModel
    grid: GridSpec
    safe: RegionMask
    safer: RegionMask
    oracle: GridOracle

    @property
    def p2b_horizon(self) -> float:
        return 100 * TICK


def _lateral_step(states, u):
    states = np.asarray(states, dtype=float)
    ve = np.clip(states[:, 1] + np.clip(u, -A_MAX, A_MAX) * TAU, -V_MAX, V_MAX)
    return np.stack([states[:, 0] + ve * TAU, ve], axis=1)


def _sc_policy(state):
    return sc_lateral_accel(float(state[0]), float(state[1]))


@lru_cache(maxsize=4)
def lateral_model(resolution: Tuple[int, int] = (80, 60), epsilon: float = EPSILON) -> LateralModel:
    """
    (e, ve) under the SC's lateral law. φ_safe is the largest part of the
    tube the SC keeps invariant; φ_safer = R(φ_safe, 2Δ).
    """
    dyn = DynamicsModel(
        bounds=[[-(epsilon + 0.5), epsilon + 0.5], [-V_MAX, V_MAX]],
        controls=(-A_MAX, -A_MAX / 2, 0.0, A_MAX / 2, A_MAX),
        step=_lateral_step,
        dt=TICK,
        name="goto-lateral",
    )
    grid = GridSpec(dyn.bounds, tuple(resolution), samples="corners")
    succ = closed_loop_map(_sc_policy, dyn, grid)
    keep = np.abs(grid.centers[:, 0]) < epsilon
    while True:
        nxt = keep & keep[succ]
        if np.array_equal(nxt, keep):
            break
        keep = nxt
    safe = RegionMask(grid, keep)
    oracle = GridOracle(dyn, grid, safe)
    safer = oracle.shrink(2 * TICK)
    logger.info("goto lateral abstraction: |φ_safe|=%d |φ_safer|=%d of %d cells", safe.count(), safer.count(), grid.size)
    return LateralModel(dyn, grid, safe, safer, oracle)


def lateral_module(model: Optional[LateralModel] = None, runtime: Optional[RTAModuleSpec] = None):
    """
    The goto module's controllers over the lateral grid, for the static
    checks. Returns (module, abstraction).
    """
    model = model or lateral_model()
    runtime = runtime or goto_module()
    module = RTAModuleSpec(
        name=runtime.name,
        ac=runtime.ac,
        sc=runtime.sc,
        dm_name=runtime.dm_name,
        delta=runtime.delta,
        safe=SafetyPredicate.from_region(model.safe, "PhiTube"),
        safer=SafetyPredicate.from_region(model.safer, "PhiTubeSafer"),
        ttf2d=lambda s: model.oracle.ttf(s, 2 * TICK),
        oracle=model.oracle,
    )
    return module, GridAbstraction(model.dyn, model.grid, _sc_policy)


# -------- faults --------

class OvershootFault:
    """
    Adds a sideways push of `magnitude` m/s² to every output of the
    target node. The side is drawn once per segment from a seeded stream.
    """

    def __init__(self, target: str = "goto_ac", magnitude: float = 14.0, seed: int = 0):
        self.target = target
        self.magnitude = magnitude
        self.rng = np.random.default_rng(seed)
        self.sides = {}

    def _side(self, segment) -> float:
        key = tuple(float(v) for v in segment)
        if key not in self.sides:
            self.sides[key] = float(self.rng.choice((-1.0, 1.0)))
        return self.sides[key]

    def intercept(self, time, node, config):
        if node.name != self.target:
            return None
        segment = config.topics["segment"]
        push = self._side(segment) * self.magnitude * TubeSpec.from_segment(segment).normal

        def transform(outputs):
            return {"accel": tuple((np.asarray(outputs["accel"], dtype=float) + push).tolist())}

        return FaultAction("perturb", transform=transform)
