"""
python manage.py rta <check|run|explore|precompute|report> --scenario PATH [...]

Exit status: 0 when nothing failed, 1 on a safety violation (or a failed
check), 2 on any error.
"""
import dataclasses
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

from django.core.management.base import BaseCommand, CommandError

from coremodel.errors import RTAError
from dsl.pipeline import explore_prepared, precompute, prepare, run_summary, wellformedness_dict
from dsl.scenario import ScenarioConfig
from semantics.trace import Trace
from testharness.audit import audit
from testharness.models import SimulationRun
from testharness.policies import ScheduleKind

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("check", "run", "explore", "precompute", "report")

OK, VIOLATION, ERROR = 0, 1, 2


@dataclass
class Outcome:
    scenario: str
    subcommand: str
    status: int = OK
    lines: List[str] = field(default_factory=list)
    schedule_id: str = ""
    seed: int = 0
    digest: str = ""
    report: dict = field(default_factory=dict)

    def say(self, line: str) -> None:
        self.lines.append(line)


def _write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, default=str) + "\n")
    return path


def _safe_name(schedule_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", schedule_id) or "default"


def _configure(path: str, options: dict) -> ScenarioConfig:
    scenario = ScenarioConfig.load(path)
    changes = {}
    if options.get("seed") is not None:
        changes["seed"] = options["seed"]
    if options.get("horizon") is not None:
        changes["horizon"] = options["horizon"]
    if options.get("schedule"):
        changes["schedule"] = ScheduleKind.parse(options["schedule"])
    if options.get("bound") is not None:
        changes["bound"] = options["bound"]
    if options.get("cap") is not None:
        changes["cap"] = options["cap"]
    if options.get("fallback"):
        changes["fallback"] = options["fallback"]
    if options.get("allow_unverified"):
        changes["allow_unverified"] = True
    if options.get("out"):
        changes["out"] = Path(options["out"])
    return dataclasses.replace(scenario, **changes)


def execute(subcommand: str, path: str, options: dict) -> Outcome:
    outcome = Outcome(scenario=path, subcommand=subcommand)
    try:
        scenario = _configure(path, options)
        outcome.scenario, outcome.seed = scenario.name, scenario.seed
        handler = {
            "check": _check, "run": _run, "explore": _explore, "precompute": _precompute, "report": _report,
        }[subcommand]
        handler(scenario, options, outcome)
    except RTAError as exc:
        outcome.status = ERROR
        outcome.say(f"error: {exc.code}: {exc.detail}")
        for d in getattr(exc, "diagnostics", [])[1:]:
            outcome.say(f"  {d}")
        outcome.report = exc.to_dict()
    except OSError as exc:
        outcome.status = ERROR
        outcome.say(f"error: {exc}")
        outcome.report = {"error": "io_error", "detail": str(exc)}
    return outcome


def _check(scenario, options, outcome):
    prepared = prepare(scenario, allow_unverified=True)
    reports = prepared.wellformedness
    for report in reports.values():
        outcome.say(report.render())
    outcome.report = {"wellformedness": wellformedness_dict(prepared), "system": prepared.spec.describe()}
    if not all(r.overall for r in reports.values()):
        outcome.status = VIOLATION
    else:
        outcome.say("check: all pass" if all(r.verified for r in reports.values()) else "check: pass (some conditions not checkable)")


def _run(scenario, options, outcome):
    prepared = prepare(scenario)
    result = explore_prepared(prepared, single=True)
    run = result.outcomes[0]
    out = scenario.output_dir()
    trace_path = run.trace.write(out / "trace.jsonl")
    summary = run_summary(prepared, run.trace, run.report)
    _write_json(out / "report.json", summary)
    outcome.schedule_id, outcome.digest, outcome.report = run.schedule_id, run.digest, summary
    outcome.say(run.report.render())
    outcome.say(f"trace: {trace_path} ({len(run.trace)} events, sha256 {run.digest})")
    if not run.ok:
        outcome.status = VIOLATION
        outcome.say(f"violation witness: event {run.report.witness} in {trace_path}")


def _explore(scenario, options, outcome):
    prepared = prepare(scenario)
    result = explore_prepared(prepared, jobs=options.get("jobs") or 1)
    out = scenario.output_dir()
    outcome.report = result.to_dict()
    outcome.say(result.report.render())
    outcome.say(f"schedules: {len(result.outcomes)}{' (sampled)' if result.sampled else ''}")
    for v in result.violations():
        path = v.trace.write(out / "violations" / f"{_safe_name(v.schedule_id)}.jsonl")
        outcome.say(f"violation: schedule {v.schedule_id} witness event {v.report.witness} -> {path}")
    _write_json(out / "explore.json", outcome.report)
    if result.violations():
        outcome.status = VIOLATION
        outcome.schedule_id = result.violations()[0].schedule_id
        outcome.digest = result.violations()[0].digest


def _precompute(scenario, options, outcome):
    prepared = prepare(scenario, allow_unverified=True)
    paths = precompute(prepared, options.get("out"))
    outcome.report = {"masks": [str(p) for p in paths]}
    for p in paths:
        outcome.say(f"mask: {p}")
    if not paths:
        outcome.say("no grid view: nothing to precompute")


def _report(scenario, options, outcome):
    trace_file = options.get("trace") or scenario.output_dir() / "trace.jsonl"
    prepared = prepare(scenario, allow_unverified=True)
    trace = Trace.read(trace_file)
    report = audit(trace, prepared.spec)
    outcome.digest = trace.digest()
    outcome.report = run_summary(prepared, trace, report)
    outcome.say(report.render())
    if not report.ok:
        outcome.status = VIOLATION
        outcome.say(f"violation witness: event {report.witness} in {trace_file}")


def _record(outcome: Outcome) -> SimulationRun:
    status = {OK: SimulationRun.Status.OK, VIOLATION: SimulationRun.Status.VIOLATION}.get(outcome.status, SimulationRun.Status.ERROR)
    return SimulationRun.objects.create(
        scenario=outcome.scenario,
        subcommand=outcome.subcommand,
        schedule_id=outcome.schedule_id,
        seed=outcome.seed,
        digest=outcome.digest,
        status=status,
        report=json.loads(json.dumps(outcome.report, default=str)),
    )


class Command(BaseCommand):
    help = "Check, run, explore and audit RTA scenarios."

    def add_arguments(self, parser):
        parser.add_argument("subcommand", choices=SUBCOMMANDS)
        parser.add_argument("--scenario", nargs="+", required=True, help="scenario file(s)")
        parser.add_argument("--out", help="output directory (default RTA_OUTPUT_DIR)")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--horizon", type=float)
        parser.add_argument("--schedule", choices=("det", "random", "exhaustive"))
        parser.add_argument("--bound", type=int, help="max slip of a firing, in time units")
        parser.add_argument("--cap", type=int, help="max schedules in exhaustive mode")
        parser.add_argument("--fallback", choices=("error", "random"), help="what exhaustive mode does at the cap")
        parser.add_argument("--allow-unverified", action="store_true")
        parser.add_argument("--trace", help="trace file for `report`")
        parser.add_argument("--jobs", type=int, default=1, help="worker processes: one per scenario, or one scenario's schedules")
        parser.add_argument("--record", action="store_true", help="store runs as SimulationRun rows")

    def handle(self, *args, **options):
        sub = options["subcommand"]
        paths = options["scenario"]
        keys = ("out", "seed", "horizon", "schedule", "bound", "cap", "fallback", "allow_unverified", "trace")
        shared = {k: options.get(k) for k in keys}
        shared["jobs"] = options["jobs"] if len(paths) == 1 else 1

        if options["jobs"] > 1 and len(paths) > 1:
            with ProcessPoolExecutor(max_workers=options["jobs"]) as pool:
                outcomes = list(pool.map(execute, [sub] * len(paths), paths, [shared] * len(paths)))
        else:
            outcomes = [execute(sub, p, shared) for p in paths]

        worst = OK
        for outcome in outcomes:
            if len(outcomes) > 1:
                self.stdout.write(f"== {outcome.scenario}")
            for line in outcome.lines:
                self.stdout.write(line)
            if options["record"]:
                run = _record(outcome)
                self.stdout.write(f"recorded run {run.id}")
            worst = max(worst, outcome.status)

        if worst != OK:
            raise CommandError(
                "safety violation" if worst == VIOLATION else "failed; see the diagnostics above",
                returncode=worst,
            )
