"""
Nondeterminism in a run goes through a Scheduler.

The runner calls `choose(label, alternatives)` at every point where more
than one continuation is possible:

- "env:<topic>@<t>"   which candidate value the environment writes
- "slip:<node>@<t>"   how far a firing slips (alternative 0 = on time)
- "order@<t>"         which enabled node fires next (alternative 0 = default order)

Choice points are numbered in the order they occur. A schedule is the
sparse set of points where the choice differs from alternative 0.
"""
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class ChoicePoint:
    label: str
    arity: int
    chosen: int


class Scheduler:
    def __init__(self):
        self.points: List[ChoicePoint] = []

    def choose(self, label: str, alternatives: Sequence) -> int:
        n = len(alternatives)
        if n <= 1:
            return 0
        index = self._pick(len(self.points), label, n)
        self.points.append(ChoicePoint(label, n, index))
        return index

    def _pick(self, point: int, label: str, arity: int) -> int:
        raise NotImplementedError

    def deviations(self) -> Dict[int, int]:
        return {i: p.chosen for i, p in enumerate(self.points) if p.chosen}


class DefaultScheduler(Scheduler):
    def _pick(self, point, label, arity):
        return 0


class ScriptedScheduler(Scheduler):
    """Alternative 0 everywhere except at the listed choice points."""

    def __init__(self, deviations: Optional[Mapping[int, int]] = None):
        super().__init__()
        self.script = dict(deviations or {})

    def _pick(self, point, label, arity):
        return min(self.script.get(point, 0), arity - 1)


class RandomScheduler(Scheduler):
    """
    Seeded random choices. `deviate` is the probability of leaving the
    default at a choice point (1.0 = uniform over all alternatives).
    """

    def __init__(self, seed: int, deviate: float = 1.0):
        super().__init__()
        self.seed = seed
        self.deviate = deviate
        self.rng = np.random.default_rng(seed)

    def _pick(self, point, label, arity):
        if self.deviate < 1.0 and self.rng.random() >= self.deviate:
            return 0
        return int(self.rng.integers(0, arity))


@dataclass(frozen=True)
class EnvWrite:
    time: float
    topic: str
    candidates: Tuple


class EnvScript:
    """Time-stamped environment writes, applied at the first instant at or after their time."""

    def __init__(self, writes: Sequence = ()):
        entries = []
        for w in writes:
            if isinstance(w, EnvWrite):
                entries.append(w)
                continue
            time, topic, value = w
            candidates = tuple(value) if isinstance(value, list) else (value,)
            entries.append(EnvWrite(time, topic, candidates))
        self.writes = sorted(entries, key=lambda w: (w.time, w.topic))

    def __len__(self):
        return len(self.writes)

    def due(self, start: int, t: float) -> Tuple[List[EnvWrite], int]:
        """Writes from index `start` with time <= t, and the next index."""
        end = start
        while end < len(self.writes) and self.writes[end].time <= t:
            end += 1
        return self.writes[start:end], end
