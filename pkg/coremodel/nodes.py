from dataclasses import dataclass, field
from enum import Enum
from numbers import Real
from typing import Any, Callable, Mapping, Optional, Tuple

from .errors import ModelError
from .topics import TopicDecl


# (local_state, input valuation) -> (local_state', output valuation)
Transition = Callable[[Any, Mapping[str, Any]], Tuple[Any, Mapping[str, Any]]]


class NodeKind(str, Enum):
    FREE = "free"
    AC = "ac"
    SC = "sc"
    DM = "dm"


def _idle(local_state, inputs):
    return local_state, {}


@dataclass(frozen=True)
class NodeSpec:
    """
    A named periodic input/output transition system.

    The transition must be deterministic: it may only read `inputs`
    (the valuation of I) and may only return entries for topics in O.
    """
    name: str
    inputs: frozenset = frozenset()
    outputs: frozenset = frozenset()
    period: Real = 1
    phase: Real = 0
    transition: Transition = field(default=_idle, compare=False, repr=False)
    initial_local_state: Any = field(default=None, compare=False, repr=False)
    kind: NodeKind = NodeKind.FREE

    def __post_init__(self):
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))


def validate_node(spec: NodeSpec, topics: Optional[Mapping[str, TopicDecl]] = None) -> Optional[str]:
    """
    Check the NodeSpec invariants.

    Returns None when the node is accepted, otherwise the error code:
    - "overlapping_io"      -> I ∩ O ≠ ∅
    - "nonpositive_period"  -> period <= 0
    - "negative_phase"      -> phase < 0
    - "unknown_topic"       -> a referenced topic is not declared
                               (only checked when `topics` is given)
    """
    if spec.inputs & spec.outputs:
        return "overlapping_io"
    if not isinstance(spec.period, Real) or spec.period <= 0:
        return "nonpositive_period"
    if not isinstance(spec.phase, Real) or spec.phase < 0:
        return "negative_phase"
    if topics is not None:
        if any(t not in topics for t in spec.inputs | spec.outputs):
            return "unknown_topic"
    return None


def ensure_valid_node(spec: NodeSpec, topics: Optional[Mapping[str, TopicDecl]] = None) -> NodeSpec:
    error = validate_node(spec, topics)
    if error is None:
        return spec
    details = {
        "overlapping_io": f"topics {sorted(spec.inputs & spec.outputs)} are both read and written",
        "nonpositive_period": f"period {spec.period!r} must be > 0",
        "negative_phase": f"phase {spec.phase!r} must be >= 0",
        "unknown_topic": (
            f"topics {sorted(t for t in spec.inputs | spec.outputs if topics and t not in topics)} "
            "are not declared"
        ),
    }
    raise ModelError(error, f"node {spec.name!r}: {details[error]}")


@dataclass(frozen=True)
class NodeBody:
    """A transition plus its initial local state, as bound to a DSL `fun` name."""
    transition: Transition
    initial_local_state: Any = None

    @classmethod
    def stateless(cls, fn: Callable[[Mapping[str, Any]], Mapping[str, Any]]) -> "NodeBody":
        """Wrap an inputs -> outputs function that keeps no local state."""
        return cls(lambda local_state, inputs: (local_state, fn(inputs)))
