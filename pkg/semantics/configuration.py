"""Configurations and the four discrete rules of the RTA semantics."""
import dataclasses
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional, Tuple

from coremodel.timetable import Calendar
from coremodel.topics import Valuation
from rta.predicates import Mode

from .system import EngineError, SystemSpec


@dataclass(frozen=True)
class Configuration:
    """(L, OE, ct, FN, Topics). Never mutated; every rule returns a new one."""
    local_states: Mapping[str, Any]
    output_enabled: Mapping[str, bool]
    current_time: float
    fire_now: frozenset
    topics: Valuation

    def replace(self, **changes) -> "Configuration":
        return dataclasses.replace(self, **changes)

    def mode_of(self, dm: str) -> Mode:
        return Mode(self.local_states[dm])


def init_configuration(spec: SystemSpec) -> Configuration:
    local = {name: node.initial_local_state for name, node in spec.nodes.items()}
    enabled = {}
    for dm in spec.dms:
        local[dm] = Mode.SC
        enabled[spec.acnodes[dm]] = False
        enabled[spec.scnodes[dm]] = True
    return Configuration(
        local_states=local,
        output_enabled=enabled,
        current_time=0,
        fire_now=frozenset(),
        topics=Valuation.defaults(spec.topics),
    )


def step_env_input(c: Configuration, topic: str, value: Any, spec: SystemSpec) -> Configuration:
    if topic not in spec.system_inputs:
        raise EngineError("not_an_input", f"environment may not write {topic!r}")
    if not spec.topics[topic].domain.contains(value):
        raise EngineError("value_outside_domain", f"{value!r} is not a valid {topic!r} value")
    return c.replace(topics=c.topics.set(topic, value))


def step_time_progress(c: Configuration, calendar: Calendar) -> Configuration:
    if c.fire_now:
        raise EngineError("not_quiescent", f"nodes {sorted(c.fire_now)} have not fired at t={c.current_time}")
    nxt = calendar.next_time_after(c.current_time)
    if nxt is None:
        raise EngineError("horizon_exhausted", f"no calendar entry after t={c.current_time}")
    return c.replace(current_time=nxt, fire_now=frozenset(calendar.nodes_at(nxt)))


def step_dm(c: Configuration, dm: str, spec: SystemSpec) -> Configuration:
    if dm not in c.fire_now:
        raise EngineError("not_scheduled", f"{dm!r} is not in FN at t={c.current_time}")
    if not spec.is_dm(dm):
        raise EngineError("not_a_dm", f"{dm!r} is not a decision module")
    node = spec.dms[dm]
    mode, _ = node.transition(c.local_states[dm], c.topics.restrict(node.inputs))
    return _apply_mode(c, dm, Mode(mode), spec)


def _apply_mode(c: Configuration, dm: str, mode: Mode, spec: SystemSpec) -> Configuration:
    local = dict(c.local_states)
    local[dm] = mode
    enabled = dict(c.output_enabled)
    enabled[spec.acnodes[dm]] = mode == Mode.AC
    enabled[spec.scnodes[dm]] = mode != Mode.AC
    return c.replace(local_states=local, output_enabled=enabled, fire_now=c.fire_now - {dm})


def fire_node(c: Configuration, n: str, spec: SystemSpec,
              transform: Optional[Callable[[dict], dict]] = None) -> Tuple[Configuration, dict]:
    """
    Apply the node rule. Returns the new configuration and the writes that
    reached Topics (empty when the node is output-disabled).
    """
    if n not in c.fire_now:
        raise EngineError("not_scheduled", f"{n!r} is not in FN at t={c.current_time}")
    if spec.is_dm(n):
        raise EngineError("not_a_node", f"{n!r} is a decision module")
    node = spec.nodes[n]
    local_state, outputs = node.transition(c.local_states[n], c.topics.restrict(node.inputs))
    outputs = dict(outputs or {})
    if transform is not None:
        outputs = dict(transform(outputs))
    stray = set(outputs) - node.outputs
    if stray:
        raise EngineError("undeclared_output", f"{n!r} wrote {sorted(stray)} outside its outputs")
    for topic, value in outputs.items():
        if not spec.topics[topic].domain.contains(value):
            raise EngineError("value_outside_domain", f"{n!r} wrote {value!r} to {topic!r}")

    local = dict(c.local_states)
    local[n] = local_state
    published = outputs if c.output_enabled.get(n, True) else {}
    topics = c.topics
    if published:
        entries = dict(topics.entries)
        entries.update(published)
        topics = Valuation(entries)
    return c.replace(local_states=local, topics=topics, fire_now=c.fire_now - {n}), published


def step_node(c: Configuration, n: str, spec: SystemSpec) -> Configuration:
    return fire_node(c, n, spec)[0]
