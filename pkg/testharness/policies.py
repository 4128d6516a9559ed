"""
Schedule policies and schedule ids.

A schedule id names one run exactly, so it can be replayed:

- "d:"               the default schedule
- "d:3=1,7=2"        default except choice point 3 takes alternative 1, point 7 takes 2
- "r:42"             seeded random choices, seed 42
- "r:42@0.1"         seeded random, leaving the default with probability 0.1

With several environment scripts the id is prefixed by the script
index: "2/d:3=1".
"""
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

from coremodel.errors import RTAError
from semantics.scheduling import RandomScheduler, Scheduler, ScriptedScheduler


class ExplorationError(RTAError):
    pass


class ScheduleKind(str, Enum):
    DEFAULT = "default"
    RANDOM = "random"
    EXHAUSTIVE = "exhaustive"

    @classmethod
    def parse(cls, value: str) -> "ScheduleKind":
        aliases = {"det": cls.DEFAULT, "deterministic": cls.DEFAULT}
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise ExplorationError("unknown_policy", f"schedule kind {value!r} is not det, random or exhaustive") from None


@dataclass(frozen=True)
class SchedulePolicy:
    """
    kind: default / random / exhaustive
    bound: max slip of a firing, in time units (0 = synchronous)
    seed, seeds: random mode runs seeds seed .. seed + seeds - 1
    depth: max deviations per schedule in exhaustive mode (None = all)
    cap: max schedules in exhaustive mode
    fallback: "error" raises at the cap, "random" samples what is left
    deviate: per-choice probability of leaving the default in random mode
    """
    kind: ScheduleKind = ScheduleKind.DEFAULT
    bound: int = 0
    seed: int = 0
    seeds: int = 1
    depth: Optional[int] = None
    cap: int = 1000
    fallback: str = "error"
    deviate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind.parse(self.kind) if isinstance(self.kind, str) else self.kind)
        if self.bound < 0:
            raise ExplorationError("negative_bound", f"asynchrony bound {self.bound!r} must be >= 0")
        if self.fallback not in ("error", "random"):
            raise ExplorationError("unknown_fallback", f"fallback {self.fallback!r} is not 'error' or 'random'")
        if not 0.0 <= self.deviate <= 1.0:
            raise ExplorationError("bad_deviate", f"deviate {self.deviate!r} is not a probability")


def deviation_id(deviations: Dict[int, int]) -> str:
    return "d:" + ",".join(f"{j}={alt}" for j, alt in sorted(deviations.items()))


def random_id(seed: int, deviate: float = 1.0) -> str:
    return f"r:{seed}" if deviate == 1.0 else f"r:{seed}@{deviate:g}"


def with_script(schedule_id: str, script_index: Optional[int]) -> str:
    return schedule_id if script_index is None else f"{script_index}/{schedule_id}"


_DEVIATIONS = re.compile(r"^d:((\d+=\d+)(,\d+=\d+)*)?$")
_RANDOM = re.compile(r"^r:(\d+)(@([0-9.eE+-]+))?$")


def parse_schedule_id(schedule_id: str) -> Tuple[Optional[int], Scheduler]:
    """(environment script index or None, a fresh scheduler reproducing the id)."""
    script = None
    body = schedule_id
    if "/" in schedule_id:
        head, body = schedule_id.split("/", 1)
        if not head.isdigit():
            raise ExplorationError("unknown_schedule", f"bad script index in {schedule_id!r}")
        script = int(head)
    if _DEVIATIONS.match(body):
        pairs = body[2:].split(",") if body[2:] else []
        return script, ScriptedScheduler({int(j): int(alt) for j, alt in (p.split("=") for p in pairs)})
    m = _RANDOM.match(body)
    if m:
        try:
            deviate = float(m.group(3)) if m.group(3) else 1.0
        except ValueError:
            raise ExplorationError("unknown_schedule", f"bad deviation rate in {schedule_id!r}") from None
        return script, RandomScheduler(int(m.group(1)), deviate)
    raise ExplorationError("unknown_schedule", f"{schedule_id!r} is not a schedule id")
