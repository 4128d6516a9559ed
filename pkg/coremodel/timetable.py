import bisect
from dataclasses import dataclass, field
from numbers import Real
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import ModelError
from .nodes import NodeSpec


@dataclass(frozen=True)
class Calendar:
    """
    Ordered (node name, firing time) pairs. Times are nondecreasing and
    same-time entries are ordered by node name.
    """
    entries: Tuple[Tuple[str, Real], ...] = ()
    _times: Tuple[Real, ...] = field(default=(), init=False, compare=False, repr=False)
    _by_time: Dict[Real, Tuple[str, ...]] = field(default_factory=dict, init=False, compare=False, repr=False)

    def __post_init__(self):
        by_time: Dict[Real, List[str]] = {}
        for name, t in self.entries:
            by_time.setdefault(t, []).append(name)
        object.__setattr__(self, "_times", tuple(sorted(by_time)))
        object.__setattr__(self, "_by_time", {t: tuple(ns) for t, ns in by_time.items()})

    def __len__(self):
        return len(self.entries)

    @property
    def times(self) -> Tuple[Real, ...]:
        return self._times

    def nodes_at(self, t: Real) -> Tuple[str, ...]:
        return self._by_time.get(t, ())

    def next_time_after(self, t: Real) -> Optional[Real]:
        i = bisect.bisect_right(self._times, t)
        return self._times[i] if i < len(self._times) else None

    def firings_of(self, name: str) -> List[Real]:
        return [t for n, t in self.entries if n == name]


def _firing_times(node: NodeSpec, horizon: Real) -> Iterable[Real]:
    k = 0
    while True:
        # phase + k*period rather than accumulation keeps the spacing exact
        t = node.phase + k * node.period
        if t > horizon:
            return
        yield t
        k += 1


def make_calendar(nodes: Iterable[NodeSpec], horizon: Real) -> Calendar:
    """
    Build the system calendar up to (and including) `horizon`.

    Ties at the same instant are ordered by node name so runs are
    reproducible; the systematic tester explores the other orders.
    """
    if horizon <= 0:
        raise ModelError("nonpositive_horizon", f"horizon {horizon!r} must be > 0")
    entries = [(node.name, t) for node in nodes for t in _firing_times(node, horizon)]
    entries.sort(key=lambda e: (e[1], e[0]))
    return Calendar(tuple(entries))
