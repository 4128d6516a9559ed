"""
Scenario -> prepared system, and the runs the CLI and the API share.
"""
import logging
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional

import django
from django.apps import apps
from django.conf import settings

from coremodel.errors import RTAError
from plants.registry import PlantKit, get_plant
from reachability.grid import RegionMask
from reachability.maskio import save_mask
from semantics.system import SystemSpec
from semantics.trace import Trace
from testharness.audit import AuditReport, audit, completion_time
from testharness.explorer import ExplorationResult, RunPool, ScheduleRunner, explore
from testharness.faults import interceptor_factory
from testharness.policies import ScheduleKind

from .ast import Program
from .elaborate import elaborate
from .errors import DslError
from .parser import parse, parse_file
from .scenario import ScenarioConfig

logger = logging.getLogger(__name__)


@dataclass
class Prepared:
    scenario: ScenarioConfig
    spec: SystemSpec
    program: Optional[Program] = None
    kit: Optional[PlantKit] = None
    horizon: float = 0
    faults: Optional[Callable] = field(default=None, repr=False)

    @property
    def wellformedness(self) -> dict:
        return self.spec.metadata.get("wellformedness", {})


def build_kit(scenario: ScenarioConfig) -> Optional[PlantKit]:
    if scenario.plant is None:
        return None
    try:
        return get_plant(scenario.plant).build(**scenario.plant_params())
    except (KeyError, ValueError) as exc:
        raise DslError("bad_scenario_value", str(exc)) from None


def prepare(scenario: ScenarioConfig, allow_unverified: Optional[bool] = None) -> Prepared:
    if scenario.empty:
        return Prepared(scenario, SystemSpec(topics={}, name=scenario.name), horizon=scenario.horizon or 0)
    kit = build_kit(scenario)
    program = parse_file(scenario.program_path())
    spec = elaborate(program, kit or {}, scenario, allow_unverified=allow_unverified)
    horizon = scenario.horizon or (kit.horizon if kit else 0)
    faults = interceptor_factory(scenario.fault_profile(), spec, kit.faults if kit else None)
    return Prepared(scenario, spec, program, kit, horizon, faults)


def schedule_runner(scenario: ScenarioConfig, bound: int) -> ScheduleRunner:
    """Builds a scenario's runner inside a worker process."""
    if not apps.ready:
        django.setup()
    prepared = prepare(scenario)
    return ScheduleRunner(prepared.spec, horizon=prepared.horizon, bound=bound, interceptor_factory=prepared.faults)


def explore_prepared(prepared: Prepared, single: bool = False, jobs: int = 1, **overrides) -> ExplorationResult:
    """
    single=True gives one trace: the default schedule, or the scenario
    seed for random schedules. jobs > 1 runs the schedules on that many
    worker processes.
    """
    if single:
        kind = overrides.get("kind") or prepared.scenario.schedule
        chosen = ScheduleKind.parse(kind)
        overrides.update(kind=ScheduleKind.RANDOM if chosen == ScheduleKind.RANDOM else ScheduleKind.DEFAULT, seeds=1)
    policy = prepared.scenario.policy(**overrides)
    if jobs > 1 and not single and not prepared.scenario.empty:
        with RunPool(partial(schedule_runner, prepared.scenario, policy.bound), jobs) as pool:
            return explore(prepared.spec, policy, horizon=prepared.horizon,
                           interceptor_factory=prepared.faults, pool=pool)
    return explore(prepared.spec, policy, horizon=prepared.horizon,
                   interceptor_factory=prepared.faults, keep_traces=single)


def run_summary(prepared: Prepared, trace: Trace, report: AuditReport) -> dict:
    summary = {"events": len(trace), "digest": trace.digest(), "audit": report.to_dict()}
    kit = prepared.kit
    if kit is not None and kit.completion is not None:
        topic, done = kit.completion
        summary["completion_time"] = completion_time(trace, topic, done)
    return summary


def precompute(prepared: Prepared, out: Optional[Path] = None) -> List[Path]:
    """Write the φ_safe and φ_safer masks of every module that has a grid view."""
    out = Path(out or getattr(settings, "RTA_MASK_CACHE_DIR", "masks")) / prepared.scenario.name
    written = []
    kit = prepared.kit or PlantKit(functions={})
    for module in prepared.spec.modules:
        checked, abstraction, _ = kit.check_view(module)
        for label, pred in (("safe", checked.safe), ("safer", checked.safer)):
            if pred.region is not None:
                mask = pred.region
            elif abstraction is not None:
                mask = RegionMask.from_predicate(abstraction.grid, pred)
            else:
                logger.warning("%s has no grid view; no %s mask written", module.name, label)
                continue
            written.append(save_mask(out / f"{module.name}-{label}.npz", mask))
    return written


def wellformedness_dict(prepared: Prepared) -> Dict[str, dict]:
    return {name: report.to_dict() for name, report in prepared.wellformedness.items()}


def check_source(source: str, scenario: ScenarioConfig) -> dict:
    """Parse and elaborate source text; errors come back as diagnostics."""
    try:
        program = parse(source)
    except DslError as exc:
        return {"ok": False, "stage": "parse", "diagnostics": [d.to_dict() for d in exc.diagnostics]}
    try:
        spec = elaborate(program, build_kit(scenario) or {}, scenario, allow_unverified=True)
    except RTAError as exc:
        diagnostics = exc.diagnostics if isinstance(exc, DslError) else []
        return {"ok": False, "stage": "elaborate", "diagnostics": [d.to_dict() for d in diagnostics] or [exc.to_dict()]}
    reports = {name: r.to_dict() for name, r in spec.metadata["wellformedness"].items()}
    return {
        "ok": all(r["overall"] for r in reports.values()),
        "stage": "check",
        "diagnostics": [],
        "system": spec.describe(),
        "wellformedness": reports,
    }
