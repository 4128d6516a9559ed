"""
Schedule exploration and replay.

Exhaustive mode walks the tree of scheduler choice points level by level:
level k holds the schedules with k deviations from the default. A
schedule's children add one deviation at a choice point after its last
one, so every schedule is generated once. Runs are independent, and
their reports merge in any order, so a RunPool can spread them over
processes.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from semantics.runner import run
from semantics.scheduling import EnvScript, RandomScheduler
from semantics.system import SystemSpec
from semantics.trace import Trace

from .audit import AuditReport, audit
from .policies import (
    ExplorationError, ScheduleKind, SchedulePolicy, deviation_id, parse_schedule_id, random_id, with_script,
)

logger = logging.getLogger(__name__)

Envs = Union[None, EnvScript, Sequence[EnvScript]]


class ReplayMismatch(ExplorationError):
    pass


@dataclass
class ScheduleOutcome:
    schedule_id: str
    digest: str
    report: AuditReport
    trace: Optional[Trace] = None

    @property
    def ok(self) -> bool:
        return self.report.ok


@dataclass
class ExplorationResult:
    policy: SchedulePolicy
    outcomes: List[ScheduleOutcome] = field(default_factory=list)
    sampled: bool = False

    @property
    def report(self) -> AuditReport:
        merged = None
        for o in self.outcomes:
            merged = o.report if merged is None else merged.merge(o.report)
        return merged or AuditReport(runs=0)

    @property
    def schedule_ids(self) -> List[str]:
        return [o.schedule_id for o in self.outcomes]

    def violations(self) -> List[ScheduleOutcome]:
        return [o for o in self.outcomes if not o.ok]

    def to_dict(self) -> dict:
        return {
            "policy": {"kind": self.policy.kind.value, "bound": self.policy.bound, "seed": self.policy.seed},
            "schedules": len(self.outcomes),
            "sampled": self.sampled,
            "report": self.report.to_dict(),
            "violations": [
                {"schedule_id": o.schedule_id, "digest": o.digest, "witness": o.report.witness}
                for o in self.violations()
            ],
        }


def _env_list(env: Envs) -> List[EnvScript]:
    if env is None:
        return [EnvScript()]
    if isinstance(env, EnvScript):
        return [env]
    envs = list(env)
    return envs or [EnvScript()]


def _fault_key(scheduler) -> int:
    return scheduler.seed if isinstance(scheduler, RandomScheduler) else 0


class ScheduleRunner:
    """One spec, its environment scripts and a horizon. Runs schedule ids and audits the traces."""

    def __init__(self, spec: SystemSpec, env: Envs = None, horizon=100, bound: int = 0,
                 interceptor_factory: Optional[Callable[[int], object]] = None, oracle=None,
                 keep_traces: bool = False):
        self.spec = spec
        self.envs = _env_list(env)
        self.horizon = horizon
        self.bound = bound
        self.interceptor_factory = interceptor_factory
        self.oracle = oracle
        self.keep_traces = keep_traces

    def run(self, schedule_id: str) -> Tuple[ScheduleOutcome, Tuple[int, ...]]:
        """The outcome, and the arity of every choice point the run met."""
        index, scheduler = parse_schedule_id(schedule_id)
        interceptor = self.interceptor_factory(_fault_key(scheduler)) if self.interceptor_factory else None
        trace = run(self.spec, self.envs[index or 0], self.horizon, scheduler=scheduler,
                    slip_bound=self.bound, interceptor=interceptor)
        report = audit(trace, self.spec, self.oracle)
        kept = trace if (self.keep_traces or not report.ok) else None
        outcome = ScheduleOutcome(schedule_id, trace.digest(), report, kept)
        return outcome, tuple(p.arity for p in scheduler.points)

    def map(self, schedule_ids: Sequence[str]) -> List[Tuple[ScheduleOutcome, Tuple[int, ...]]]:
        return [self.run(sid) for sid in schedule_ids]


_worker: Optional[ScheduleRunner] = None


def _start_worker(build: Callable[[], ScheduleRunner]) -> None:
    global _worker
    _worker = build()


def _run_in_worker(schedule_id: str):
    return _worker.run(schedule_id)


class RunPool:
    """
    Runs batches of schedule ids on `jobs` worker processes.

    Systems are not picklable, so each worker calls `build` (a picklable
    zero-argument callable) once to get its own ScheduleRunner. Results
    come back in the order of the ids.
    """

    def __init__(self, build: Callable[[], ScheduleRunner], jobs: int):
        self.jobs = jobs
        self.executor = ProcessPoolExecutor(max_workers=jobs, initializer=_start_worker, initargs=(build,))

    def map(self, schedule_ids: Sequence[str]) -> List[Tuple[ScheduleOutcome, Tuple[int, ...]]]:
        chunk = max(1, len(schedule_ids) // (4 * self.jobs))
        return list(self.executor.map(_run_in_worker, schedule_ids, chunksize=chunk))

    def close(self) -> None:
        self.executor.shutdown()

    def __enter__(self) -> "RunPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def explore(spec: SystemSpec, policy: SchedulePolicy, env: Envs = None, horizon=100,
            interceptor_factory: Optional[Callable[[int], object]] = None, oracle=None,
            keep_traces: bool = False, pool: Optional[RunPool] = None) -> ExplorationResult:
    """
    Run every schedule the policy admits and audit each trace.

    Traces are kept for violating schedules (and for all with keep_traces).
    With a pool the runs go to its workers, which must have been built
    for the same spec, env, horizon and bound; exhaustive mode sends one
    tree level per batch.
    """
    runner = ScheduleRunner(spec, env, horizon, policy.bound, interceptor_factory, oracle, keep_traces)
    batch = pool.map if pool is not None else runner.map
    envs = runner.envs
    result = ExplorationResult(policy)
    for k in range(len(envs)):
        index = k if len(envs) > 1 else None
        if policy.kind == ScheduleKind.DEFAULT:
            ids = [with_script("d:", index)]
        elif policy.kind == ScheduleKind.RANDOM:
            ids = [with_script(random_id(seed, policy.deviate), index)
                   for seed in range(policy.seed, policy.seed + policy.seeds)]
        else:
            sampled = _exhaustive(batch, index, policy, result.outcomes)
            result.sampled = result.sampled or sampled
            continue
        result.outcomes.extend(outcome for outcome, _ in batch(ids))

    report = result.report
    logger.info(
        "explored %d schedule(s) of %s: %d violating, %d invariant violations, %d unsafe entries",
        len(result.outcomes), spec.name or "system", len(result.violations()),
        report.inv_violations, report.unsafe_entries,
    )
    return result


def _children(deviations: Dict[int, int], arities: Sequence[int], depth: Optional[int]) -> List[Dict[int, int]]:
    if depth is not None and len(deviations) >= depth:
        return []
    last = max(deviations, default=-1)
    kids = []
    for j in range(last + 1, len(arities)):
        for alt in range(1, arities[j]):
            kids.append({**deviations, j: alt})
    return kids


def _exhaustive(batch, index, policy: SchedulePolicy, out: List[ScheduleOutcome]) -> bool:
    """Returns True when the cap forced random sampling."""
    level = [{}]
    done = 0
    while level:
        if done + len(level) > policy.cap:
            if policy.fallback != "random":
                raise ExplorationError(
                    "explosion_guard",
                    f"at least {done + len(level)} schedules exceed the cap of {policy.cap}",
                )
            rng = np.random.default_rng(policy.seed)
            keep = max(policy.cap - done, 0)
            picks = sorted(rng.choice(len(level), size=keep, replace=False).tolist()) if keep else []
            logger.warning(
                "exploration capped at %d schedules; sampling %d of %d pending at depth %d",
                policy.cap, keep, len(level), len(max(level, key=len)),
            )
            ids = [with_script(deviation_id(level[p]), index) for p in picks]
            out.extend(outcome for outcome, _ in batch(ids))
            return True

        ids = [with_script(deviation_id(d), index) for d in level]
        following = []
        for deviations, (outcome, arities) in zip(level, batch(ids)):
            out.append(outcome)
            following.extend(_children(deviations, arities, policy.depth))
        done += len(level)
        level = following
    return False


def replay(
spec: SystemSpec, schedule_id: str, env: Envs = None, horizon=100,
           interceptor_factory: Optional[Callable[[int], object]] = None, slip_bound: int = 0,
           expected_digest: Optional[str] = None) -> Trace:
    """
    Re-run one schedule. With `expected_digest` a differing trace raises
    ReplayMismatch("digest_mismatch").
    """
    envs = _env_list(env)
    index, scheduler = parse_schedule_id(schedule_id)
    if index is None:
        index = 0
    if index >= len(envs):
        raise ExplorationError("unknown_schedule", f"{schedule_id!r} names script {index}, only {len(envs)} given")
    interceptor = interceptor_factory(_fault_key(scheduler)) if interceptor_factory else None
    trace = run(spec, envs[index], horizon, scheduler=scheduler, slip_bound=slip_bound, interceptor=interceptor)
    if expected_digest is not None and trace.digest() != expected_digest:
        logger.warning("replay of %s diverged: %s != %s", schedule_id, trace.digest(), expected_digest)
        raise ReplayMismatch("digest_mismatch", f"replay of {schedule_id!r} produced digest {trace.digest()}")
    return trace
