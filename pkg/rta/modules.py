import logging
from dataclasses import dataclass
from typing import Any, Callable, List, Mapping, Optional

import numpy as np

from coremodel.errors import RTAError
from coremodel.nodes import NodeKind, NodeSpec, validate_node
from reachability.oracle import ReachOracle

from .predicates import Mode, SafetyPredicate

logger = logging.getLogger(__name__)


class RTASpecError(RTAError):
    pass


@dataclass(frozen=True, eq=False)
class RTAModuleSpec:
    """
    The tuple (N_ac, N_sc, N_dm, Δ, φ_safe, φ_safer) plus the ttf_{2Δ}
    handle that drives the AC -> SC switch.

    - state_topic: topic the DM reads the plant state from
    - observe: optional map from the DM's input valuation to the state the
      predicates take; defaults to reading `state_topic`
    - extra_inputs: topics `observe` needs besides `state_topic`
    - oracle: reachability backend for the Φ_Inv check
    - samples: states on which φ_safer ⊆ φ_safe is checked when no
      region representation is available
    """
    name: str
    ac: NodeSpec
    sc: NodeSpec
    dm_name: str
    delta: float
    safe: SafetyPredicate
    safer: SafetyPredicate
    ttf2d: Callable[[Any], bool]
    state_topic: str = "state"
    observe: Optional[Callable[[Mapping[str, Any]], Any]] = None
    extra_inputs: frozenset = frozenset()
    oracle: Optional[ReachOracle] = None
    dm_phase: float = 0
    samples: tuple = ()

    @property
    def outputs(self) -> frozenset:
        return self.ac.outputs

    @property
    def dm_inputs(self) -> frozenset:
        return self.ac.inputs | self.sc.inputs | {self.state_topic} | frozenset(self.extra_inputs)

    def state_of(self, inputs: Mapping[str, Any]) -> Any:
        if self.observe is not None:
            return self.observe(inputs)
        return inputs[self.state_topic]

    def problems(self) -> List[str]:
        found = []
        if not self.delta or self.delta <= 0:
            found.append(f"Δ = {self.delta!r} must be > 0")
        else:
            for node in (self.ac, self.sc):
                if node.period > self.delta:
                    found.append(f"period of {node.name!r} ({node.period}) exceeds Δ = {self.delta}")
        if self.ac.outputs != self.sc.outputs:
            found.append(
                f"outputs differ: {self.ac.name!r} publishes {sorted(self.ac.outputs)}, "
                f"{self.sc.name!r} publishes {sorted(self.sc.outputs)}"
            )
        if self.dm_name in (self.ac.name, self.sc.name):
            found.append(f"decision module name {self.dm_name!r} clashes with a controller")
        for node in (self.ac, self.sc):
            code = validate_node(node)
            if code:
                found.append(f"{node.name!r}: {code}")
        leak = self.safer_escape()
        if leak is not None:
            found.append(f"φ_safer is not inside φ_safe at {np.asarray(leak).tolist()}")
        return found

    def safer_escape(self):
        """A state in φ_safer but not in φ_safe, or None."""
        if self.safer.region is not None and self.safe.region is not None:
            bad = self.safer.region - self.safe.region
            return self.safer.region.grid.centers[bad.indices()[0]] if bad.any() else None
        probes = list(self.samples)
        if self.safer.region is not None:
            probes.extend(self.safer.region.grid.centers[self.safer.region.indices()])
        for s in probes:
            if self.safer(s) and not self.safe(s):
                return s
        return None


def dm_transition(mode: Mode, s, spec: RTAModuleSpec) -> Mode:
    if mode == Mode.AC and spec.ttf2d(s):
        return Mode.SC
    if mode == Mode.SC and spec.safer(s):
        return Mode.AC
    return mode


def generate_dm(spec: RTAModuleSpec) -> NodeSpec:
    """
    Build the decision module for `spec`: period Δ, no outputs, local
    state = current Mode (starting in SC). The engine reads the returned
    mode to update OE; the DM never publishes.
    """
    problems = spec.problems()
    if problems:
        raise RTASpecError("malformed_spec", f"module {spec.name!r}: " + "; ".join(problems))

    def decide(mode, inputs):
        s = spec.state_of(inputs)
        new_mode = dm_transition(Mode(mode), s, spec)
        if new_mode != mode:
            logger.debug("%s: %s -> %s", spec.dm_name, Mode(mode).value, new_mode.value)
        return new_mode, {}

    return NodeSpec(
        name=spec.dm_name,
        inputs=spec.dm_inputs,
        outputs=frozenset(),
        period=spec.delta,
        phase=spec.dm_phase,
        transition=decide,
        initial_local_state=Mode.SC,
        kind=NodeKind.DM,
    )


def invariant_holds(mode: Mode, s, spec: RTAModuleSpec, oracle: Optional[ReachOracle] = None) -> bool:
    """(mode = SC ∧ s ∈ φ_safe) ∨ (mode = AC ∧ Reach(s, *, Δ) ⊆ φ_safe)."""
    oracle = oracle or spec.oracle
    if oracle is None:
        raise RTASpecError("state_outside_oracle_domain", f"module {spec.name!r} has no reachability oracle")
    if not oracle.covers(s):
        raise RTASpecError("state_outside_oracle_domain", f"state {np.asarray(s).tolist()} is not covered")
    if Mode(mode) == Mode.SC:
        return spec.safe(s)
    return bool(oracle.reach_within_safe(s, spec.delta))
