"""
Trace audits.

The audit replays a trace's writes over the topic defaults. Then:
- at every DM firing it re-evaluates the RTA invariant with the recorded mode
- after every write it checks each module's φ_safe
- it counts AC->SC disengagements, SC->AC recoveries and AC-enabled plant time

A plant firing is a free node publishing a module's state topic. Its AC
weight is 1 when that module's DM is in AC at the time, or for a
monitor, when its AC is the controller that was deployed.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Union

from coremodel.errors import RTAError
from coremodel.topics import Valuation
from rta.modules import RTAModuleSpec, invariant_holds
from rta.predicates import Mode
from semantics.system import SystemSpec
from semantics.trace import DM_STEP, ENV_INPUT, NODE_STEP, Trace

from .policies import ExplorationError

logger = logging.getLogger(__name__)


def _first(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


@dataclass
class ModuleAudit:
    inv_checks: int = 0
    inv_violations: int = 0
    first_violation: Optional[int] = None
    unsafe_entries: int = 0
    first_unsafe: Optional[int] = None
    disengagements: int = 0
    recoveries: int = 0
    max_sc_dwell: float = 0
    unrecovered: int = 0
    plant_firings: int = 0
    ac_firings: int = 0

    @property
    def ac_fraction(self) -> float:
        return self.ac_firings / self.plant_firings if self.plant_firings else 0.0

    def merge(self, other: "ModuleAudit") -> "ModuleAudit":
        return ModuleAudit(
            inv_checks=self.inv_checks + other.inv_checks,
            inv_violations=self.inv_violations + other.inv_violations,
            first_violation=_first(self.first_violation, other.first_violation),
            unsafe_entries=self.unsafe_entries + other.unsafe_entries,
            first_unsafe=_first(self.first_unsafe, other.first_unsafe),
            disengagements=self.disengagements + other.disengagements,
            recoveries=self.recoveries + other.recoveries,
            max_sc_dwell=max(self.max_sc_dwell, other.max_sc_dwell),
            unrecovered=self.unrecovered + other.unrecovered,
            plant_firings=self.plant_firings + other.plant_firings,
            ac_firings=self.ac_firings + other.ac_firings,
        )

    def to_dict(self) -> dict:
        return {**asdict(self), "ac_fraction": round(self.ac_fraction, 6)}


@dataclass
class AuditReport:
    modules: Dict[str, ModuleAudit] = field(default_factory=dict)
    events: int = 0
    runs: int = 1

    @property
    def totals(self) -> ModuleAudit:
        total = ModuleAudit()
        for name in sorted(self.modules):
            total = total.merge(self.modules[name])
        return total

    @property
    def inv_violations(self) -> int:
        return self.totals.inv_violations

    @property
    def unsafe_entries(self) -> int:
        return self.totals.unsafe_entries

    @property
    def disengagements(self) -> int:
        return self.totals.disengagements

    @property
    def ac_fraction(self) -> float:
        return self.totals.ac_fraction

    @property
    def ok(self) -> bool:
        t = self.totals
        return t.inv_violations == 0 and t.unsafe_entries == 0

    @property
    def witness(self) -> Optional[int]:
        """Index of the first violating event (invariant first, then φ_safe)."""
        t = self.totals
        return t.first_violation if t.first_violation is not None else t.first_unsafe

    def merge(self, other: "AuditReport") -> "AuditReport":
        names = set(self.modules) | set(other.modules)
        return AuditReport(
            modules={n: self.modules.get(n, ModuleAudit()).merge(other.modules.get(n, ModuleAudit())) for n in names},
            events=self.events + other.events,
            runs=self.runs + other.runs,
        )

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "runs": self.runs,
            "events": self.events,
            "witness": self.witness,
            "totals": self.totals.to_dict(),
            "modules": {n: self.modules[n].to_dict() for n in sorted(self.modules)},
        }

    def render(self) -> str:
        t = self.totals
        lines = [
            f"status: {'ok' if self.ok else 'VIOLATION'}",
            f"runs: {self.runs}  events: {self.events}",
            f"inv_violations: {t.inv_violations} / {t.inv_checks} checks",
            f"unsafe_entries: {t.unsafe_entries}",
            f"disengagements: {t.disengagements}  recoveries: {t.recoveries}  unrecovered: {t.unrecovered}",
            f"max_sc_dwell: {t.max_sc_dwell:g}",
            f"ac_fraction: {t.ac_fraction:.4f} ({t.ac_firings}/{t.plant_firings} plant firings)",
        ]
        if self.witness is not None:
            lines.append(f"witness: event {self.witness}")
        for name in sorted(self.modules):
            m = self.modules[name]
            lines.append(
                f"  [{name}] inv {m.inv_violations}/{m.inv_checks} unsafe {m.unsafe_entries} "
                f"diseng {m.disengagements} recov {m.recoveries} ac {m.ac_fraction:.4f}"
            )
        return "\n".join(lines)


Oracles = Union[None, Any, Mapping[str, Any]]


def _oracle_for(oracle: Oracles, module: RTAModuleSpec):
    if isinstance(oracle, Mapping):
        return oracle.get(module.name) or module.oracle
    return oracle or module.oracle


def _mismatch(i: int, detail: str) -> ExplorationError:
    return ExplorationError("trace_spec_mismatch", f"event {i}: {detail}")


def _safe(module: RTAModuleSpec, topics: dict) -> bool:
    return bool(module.safe(module.state_of(topics)))


def audit(trace: Trace, spec: SystemSpec, oracle: Oracles = None) -> AuditReport:
    """
    `oracle` overrides the modules' own oracles: one for every module, or
    a mapping module name -> oracle. With no oracle at all the recorded
    inv_holds values are counted instead.

    Monitors (modules deployed without their DM) get φ_safe and plant
    counts only. A state that is already unsafe before the first event
    counts as an entry with witness 0. A state topic with no default
    is taken as safe until first written.
    """
    modules = {m.dm_name: m for m in spec.modules}
    watched = {m.name: m for m in spec.modules + spec.monitors}
    stats = {name: ModuleAudit() for name in watched}
    modes = {dm: Mode.SC for dm in modules}
    ungated_ac = {m.name: m.ac.name in spec.nodes for m in spec.monitors}
    disengaged_at: Dict[str, Optional[float]] = {dm: None for dm in modules}
    topics = dict(Valuation.defaults(spec.topics).entries)
    was_safe = {name: topics.get(m.state_topic) is None or _safe(m, topics) for name, m in watched.items()}
    if len(trace):
        for name, safe in was_safe.items():
            if not safe:
                stats[name].unsafe_entries += 1
                stats[name].first_unsafe = 0

    def in_ac(module: RTAModuleSpec) -> bool:
        if module.name in ungated_ac:
            return ungated_ac[module.name]
        return modes[module.dm_name] == Mode.AC

    for i, ev in enumerate(trace):
        if ev.node is not None and ev.node not in spec.nodes:
            raise _mismatch(i, f"unknown node {ev.node!r}")
        for topic in ev.writes or {}:
            if topic not in spec.topics:
                raise _mismatch(i, f"unknown topic {topic!r}")

        if ev.rule == DM_STEP:
            if ev.node not in modules:
                raise _mismatch(i, f"{ev.node!r} is not a decision module")
            dm, module = ev.node, modules[ev.node]
            s = stats[module.name]
            before, after = Mode(ev.mode_before), Mode(ev.mode_after)
            if before != modes[dm]:
                raise _mismatch(i, f"{dm} recorded {before.value}, expected {modes[dm].value}")
            modes[dm] = after
            if before == Mode.AC and after == Mode.SC:
                s.disengagements += 1
                disengaged_at[dm] = ev.time
            elif before == Mode.SC and after == Mode.AC and disengaged_at[dm] is not None:
                s.recoveries += 1
                s.max_sc_dwell = max(s.max_sc_dwell, ev.time - disengaged_at[dm])
                disengaged_at[dm] = None

            holds = _check_invariant(after, module, topics, _oracle_for(oracle, module), ev)
            if holds is not None:
                s.inv_checks += 1
                if not holds:
                    s.inv_violations += 1
                    s.first_violation = _first(s.first_violation, i)
                    logger.debug("invariant of %s fails at event %d (t=%s)", module.name, i, ev.time)

        elif ev.rule in (ENV_INPUT, NODE_STEP) and ev.writes:
            topics.update(ev.writes)
            if ev.rule == NODE_STEP and ev.node not in spec.gated():
                for name, module in watched.items():
                    if module.state_topic in ev.writes and ev.node not in (module.ac.name, module.sc.name):
                        s = stats[name]
                        s.plant_firings += 1
                        s.ac_firings += in_ac(module)
            for name, module in watched.items():
                safe = _safe(module, topics)
                if was_safe[name] and not safe:
                    s = stats[name]
                    s.unsafe_entries += 1
                    s.first_unsafe = _first(s.first_unsafe, i)
                was_safe[name] = safe

    end = trace[-1].time if len(trace) else 0
    for dm, started in disengaged_at.items():
        if started is not None:
            s = stats[modules[dm].name]
            s.unrecovered += 1
            s.max_sc_dwell = max(s.max_sc_dwell, end - started)

    report = AuditReport(modules=stats, events=len(trace))
    logger.info("audit of %s: %s", trace.name or spec.name or "trace", "ok" if report.ok else f"witness {report.witness}")
    return report


def _check_invariant(mode: Mode, module: RTAModuleSpec, topics: dict, oracle, ev) -> Optional[bool]:
    if oracle is None:
        recorded = (ev.inv_holds or {}).get(ev.node)
        return None if recorded is None else bool(recorded)
    try:
        return invariant_holds(mode, module.state_of(topics), module, oracle)
    except RTAError as exc:
        if exc.code == "state_outside_oracle_domain":
            return False
        raise


def completion_time(trace: Trace, topic: str, predicate: Callable[[Any], bool]) -> Optional[float]:
    """Time of the first write of `topic` that satisfies `predicate`."""
    for ev in trace:
        if ev.writes and topic in ev.writes and predicate(ev.writes[topic]):
            return ev.time
    return None
