"""
Fault injection through the engine's interceptor hook.

Profiles:
- none
- kicks       gaussian noise (std = magnitude) on every numeric output of the targets
- replace     the targets publish `magnitude` in place of every numeric output
- dm-drop     DM firings are skipped while the DM is in AC (probability = rate)
- delay       target firings move `magnitude` time units later
- <plant>     any fault a plant kit registers (e.g. "overshoot")

Targets default to the AC nodes (the DMs for dm-drop). Safety controllers
are never faulted.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from coremodel.nodes import NodeKind
from rta.predicates import Mode
from semantics.runner import FaultAction
from semantics.system import SystemSpec

from .policies import ExplorationError

logger = logging.getLogger(__name__)

GENERIC_KINDS = ("none", "kicks", "replace", "dm-drop", "delay")


@dataclass(frozen=True)
class FaultProfile:
    kind: str = "none"
    targets: tuple = ()
    rate: float = 1.0
    magnitude: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if not 0.0 <= self.rate <= 1.0:
            raise ExplorationError("bad_fault_rate", f"fault rate {self.rate!r} is not a probability")

    @property
    def active(self) -> bool:
        return self.kind != "none"


def _numeric_map(value, fn):
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, float, np.number)):
        return float(fn(np.asarray([float(value)]))[0])
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        return value
    return tuple(fn(arr).tolist())


class _Injector:
    def __init__(self, targets: Iterable[str], rate: float, magnitude: float, seed: int):
        self.targets = frozenset(targets)
        self.rate = rate
        self.magnitude = magnitude
        self.rng = np.random.default_rng(seed)

    def _hit(self, node) -> bool:
        if node.name not in self.targets:
            return False
        return self.rate >= 1.0 or self.rng.random() < self.rate

    def intercept(self, time, node, config) -> Optional[FaultAction]:
        return self.action(config, node) if self._hit(node) else None

    def action(self, config, node) -> Optional[FaultAction]:
        raise NotImplementedError


class PerturbFault(_Injector):
    def action(self, config, node):
        def transform(outputs):
            return {
                topic: _numeric_map(value, lambda a: a + self.rng.normal(0.0, self.magnitude, a.shape))
                for topic, value in outputs.items()
            }
        return FaultAction("perturb", transform=transform)


class ReplaceFault(_Injector):
    def action(self, config, node):
        def transform(outputs):
            return {topic: _numeric_map(value, lambda a: np.full(a.shape, self.magnitude)) for topic, value in outputs.items()}
        return FaultAction("replace", transform=transform)


class DmDropFault(_Injector):
    def intercept(self, time, node, config):
        if node.name not in self.targets or config.mode_of(node.name) != Mode.AC:
            return None
        if self.rate < 1.0 and self.rng.random() >= self.rate:
            return None
        return FaultAction("drop")


class DelayFault(_Injector):
    def action(self, config, node):
        return FaultAction("delay", delay=self.magnitude)


_INJECTORS: Dict[str, type] = {
    "kicks": PerturbFault,
    "replace": ReplaceFault,
    "dm-drop": DmDropFault,
    "delay": DelayFault,
}


def fault_targets(profile: FaultProfile, spec: SystemSpec) -> tuple:
    """Resolve and check the nodes a profile hits."""
    if profile.targets:
        targets = profile.targets
    elif profile.kind == "dm-drop":
        targets = tuple(sorted(spec.dms))
    else:
        targets = tuple(sorted(n for n, node in spec.nodes.items() if node.kind == NodeKind.AC))
    for name in targets:
        if name not in spec.nodes:
            raise ExplorationError("unknown_fault_target", f"no node named {name!r}")
        if spec.nodes[name].kind == NodeKind.SC:
            raise ExplorationError("forbidden_fault_target", f"{name!r} is a safety controller")
        if profile.kind == "dm-drop" and not spec.is_dm(name):
            raise ExplorationError("forbidden_fault_target", f"dm-drop needs a decision module, got {name!r}")
    return targets


def interceptor_factory(profile: FaultProfile, spec: SystemSpec,
                        plant_faults: Optional[Dict[str, Callable]] = None) -> Optional[Callable[[int], object]]:
    """
    A function run_index -> fresh interceptor, or None for no faults.
    Run k is seeded with profile.seed + k so runs stay independent and replayable.
    """
    if not profile.active:
        return None
    plant_faults = plant_faults or {}
    targets = fault_targets(profile, spec)
    if not targets:
        logger.warning("fault profile %r has no target in %s", profile.kind, spec.name or "system")
        return None

    if profile.kind in _INJECTORS:
        cls = _INJECTORS[profile.kind]
        magnitude = 1.0 if profile.magnitude is None else profile.magnitude
        if profile.kind == "delay" and magnitude <= 0:
            raise ExplorationError("bad_fault_magnitude", "delay must be positive")
        return lambda k=0: cls(targets, profile.rate, magnitude, profile.seed + k)

    make = plant_faults.get(profile.kind)
    if make is None:
        known = sorted(set(GENERIC_KINDS) | set(plant_faults))
        raise ExplorationError("unknown_fault", f"fault {profile.kind!r} is not one of {known}")
    extra = {} if profile.magnitude is None else {"magnitude": profile.magnitude}
    return lambda k=0: make(target=targets[0], seed=profile.seed + k, **extra)
