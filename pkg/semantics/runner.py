import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Protocol, Tuple

from coremodel.nodes import NodeSpec
from rta.modules import RTASpecError, invariant_holds
from rta.predicates import Mode

from .configuration import Configuration, _apply_mode, fire_node, init_configuration, step_env_input
from .scheduling import DefaultScheduler, EnvScript, Scheduler
from .system import SystemSpec
from .trace import DM_STEP, ENV_INPUT, NODE_STEP, TIME_PROGRESS, Trace, TraceEvent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FaultAction:
    """
    What an interceptor does to one firing.

    kind:
    - "drop"     -> the firing does not happen (a DM keeps its mode)
    - "delay"    -> the firing moves to t + delay
    - "perturb"  -> outputs pass through `transform` before publishing
    - "replace"  -> same as perturb, recorded as a replacement
    """
    kind: str
    delay: float = 0
    transform: Optional[Callable[[dict], dict]] = None


class Interceptor(Protocol):
    def intercept(self, time: float, node: NodeSpec, config: Configuration) -> Optional[FaultAction]: ...


@dataclass(frozen=True)
class _Firing:
    name: str
    slipped: bool = False
    fault: Optional[str] = None


def _state_checks(spec: SystemSpec, topics: Dict[str, Any]) -> Tuple[Optional[dict], Optional[dict]]:
    if not spec.modules:
        return None, None
    safe, safer = {}, {}
    for m in spec.modules:
        s = m.state_of(topics)
        safe[m.dm_name] = m.safe(s)
        safer[m.dm_name] = m.safer(s)
    return safe, safer


def _invariant(mode, s, module) -> bool:
    try:
        return invariant_holds(mode, s, module)
    except RTASpecError as exc:
        if exc.code != "state_outside_oracle_domain":
            raise
        return False


def _slip_options(node: NodeSpec, t, bound: int, horizon) -> List:
    return [d for d in range(0, bound + 1) if d < node.period and t + d <= horizon]


def run(spec: SystemSpec, env: Optional[EnvScript] = None, horizon=100, scheduler: Optional[Scheduler] = None,
        slip_bound: int = 0, interceptor: Optional[Interceptor] = None,
        initial: Optional[Configuration] = None) -> Trace:
    """
    Drive the semantics from `initial` (default: init_configuration) up to
    `horizon`, stopping cleanly when no firing is left at or before it.

    Per instant: environment writes due by then, slip choices for the
    calendar firings, then FN is drained one node at a time in the order
    the scheduler picks (alternative 0 = DMs first, then by name).
    """
    env = env or EnvScript()
    scheduler = scheduler or DefaultScheduler()
    calendar = spec.calendar(horizon)
    c = initial or init_configuration(spec)
    trace = Trace(name=spec.name)
    pending: Dict[Any, List[_Firing]] = {}
    env_index = 0
    started = False

    while True:
        if not started and c.current_time == 0 and calendar.nodes_at(0):
            t = 0
        else:
            options = [x for x in (calendar.next_time_after(c.current_time), min(pending, default=None)) if x is not None]
            if not options or min(options) > horizon:
                break
            t = min(options)
            trace.append(TraceEvent(time=t, rule=TIME_PROGRESS))
        started = True

        due, env_index = env.due(env_index, t)
        for write in due:
            k = scheduler.choose(f"env:{write.topic}@{write.time}", write.candidates)
            c = step_env_input(c, write.topic, write.candidates[k], spec)
            trace.append(TraceEvent(time=t, rule=ENV_INPUT, writes={write.topic: write.candidates[k]}))

        firings: Dict[str, _Firing] = {}
        for name in spec.default_order(calendar.nodes_at(t)):
            options = _slip_options(spec.nodes[name], t, slip_bound, horizon) if slip_bound else [0]
            d = options[scheduler.choose(f"slip:{name}@{t}", options)]
            if d:
                pending.setdefault(t + d, []).append(_Firing(name, slipped=True))
            else:
                firings[name] = _Firing(name)
        for f in pending.pop(t, []):
            firings[f.name] = f

        c = c.replace(current_time=t, fire_now=frozenset(firings))
        while c.fire_now:
            order = spec.default_order(c.fire_now)
            name = order[scheduler.choose(f"order@{t}", order)]
            c = _fire(c, firings[name], t, spec, trace, interceptor, pending, horizon)

    trace.final = c
    trace.choices = list(scheduler.points)
    logger.info("%s: %d events up to t=%s", spec.name or "run", len(trace), c.current_time)
    return trace


def _fire(c: Configuration, firing: _Firing, t, spec: SystemSpec, trace: Trace,
          interceptor: Optional[Interceptor], pending, horizon) -> Configuration:
    name = firing.name
    node = spec.nodes[name]
    action = None
    if interceptor is not None and firing.fault != "delay":
        action = interceptor.intercept(t, node, c)
    if action is not None and action.kind == "delay":
        if 0 < action.delay < node.period and t + action.delay <= horizon:
            pending.setdefault(t + action.delay, []).append(_Firing(name, slipped=True, fault="delay"))
            return c.replace(fire_now=c.fire_now - {name})
        action = None
    fault = action.kind if action is not None else firing.fault

    if spec.is_dm(name):
        module = spec.module_of[name]
        before = c.mode_of(name)
        if action is not None and action.kind == "drop":
            c = c.replace(fire_now=c.fire_now - {name})
        else:
            node_mode, _ = node.transition(before, c.topics.restrict(node.inputs))
            c = _apply_mode(c, name, Mode(node_mode), spec)
        after = c.mode_of(name)
        topics = dict(c.topics.entries)
        safe, safer = _state_checks(spec, topics)
        holds = None
        if module.oracle is not None:
            holds = {name: _invariant(after, module.state_of(topics), module)}
        if before != after:
            logger.debug("t=%s %s %s -> %s", t, name, before.value, after.value)
        trace.append(TraceEvent(
            time=t, rule=DM_STEP, node=name, mode_before=before, mode_after=after,
            safe=safe, safer=safer, inv_holds=holds, fault=fault,
        ))
        return c

    if action is not None and action.kind == "drop":
        trace.append(TraceEvent(time=t, rule=NODE_STEP, node=name, fault="drop"))
        return c.replace(fire_now=c.fire_now - {name})
    transform = action.transform if action is not None else None
    c, published = fire_node(c, name, spec, transform=transform)
    safe, safer = _state_checks(spec, dict(c.topics.entries)) if published else (None, None)
    trace.append(TraceEvent(time=t, rule=NODE_STEP, node=name, writes=published, safe=safe, safer=safer, fault=fault))
    return c
