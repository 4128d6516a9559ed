"""
Static checks for RTA modules.

P2a, P2b and P3 run on a GridAbstraction of the plant: the dynamics, the
grid, and (for P2a/P2b) the SC as a state-feedback policy. Without one,
or when φ_safe/φ_safer have no grid region, the verdict is
not-checkable and the module is left to runtime monitoring.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from coremodel.nodes import NodeSpec
from reachability.grid import DynamicsModel, GridSpec
from reachability.oracle import closed_loop_map, region_shrink
from rta.modules import RTAModuleSpec

from .report import Verdict, WellformednessReport, failed, passed, unchecked

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class GridAbstraction:
    dyn: DynamicsModel
    grid: GridSpec
    sc_policy: Optional[Callable] = None

    _succ = None

    def sc_successors(self) -> np.ndarray:
        if self._succ is None:
            self._succ = closed_loop_map(self.sc_policy, self.dyn, self.grid)
        return self._succ


def _regions(spec: RTAModuleSpec, abstraction: Optional[GridAbstraction], *, need_policy: bool):
    if abstraction is None:
        return None, "no grid abstraction for the plant"
    if spec.safe.region is None or spec.safer.region is None:
        return None, "φ_safe/φ_safer have no grid region"
    if spec.safe.region.grid != abstraction.grid or spec.safer.region.grid != abstraction.grid:
        return None, "regions live on a different grid"
    if need_policy and abstraction.sc_policy is None:
        return None, "no SC policy on the grid"
    return (spec.safe.region, spec.safer.region), ""


def check_p1(spec: RTAModuleSpec) -> Verdict:
    if spec.delta is None or spec.delta <= 0:
        return failed("P1a", spec.dm_name, f"Δ = {spec.delta!r} must be > 0")
    for node in (spec.ac, spec.sc):
        if node.period > spec.delta:
            return failed("P1a", node.name, f"period {node.period} > Δ = {spec.delta}")
    if spec.ac.outputs != spec.sc.outputs:
        diff = sorted(spec.ac.outputs ^ spec.sc.outputs)
        return failed("P1b", diff, f"{spec.ac.name} and {spec.sc.name} publish different topics")
    return passed("P1")


def check_p2a(spec: RTAModuleSpec, abstraction: Optional[GridAbstraction]) -> Verdict:
    regions, why = _regions(spec, abstraction, need_policy=True)
    if regions is None:
        return unchecked("P2a", why)
    safe, _ = regions
    succ = abstraction.sc_successors()
    cells = safe.indices()
    escaping = cells[~safe.cells[succ[cells]]]
    if escaping.size:
        return failed("P2a", abstraction.grid.center_of(escaping[0]), f"{escaping.size} cells leave φ_safe under SC")
    return passed("P2a")


def check_p2b(spec: RTAModuleSpec, abstraction: Optional[GridAbstraction], horizon: Optional[float]) -> Verdict:
    regions, why = _regions(spec, abstraction, need_policy=True)
    if regions is None:
        return unchecked("P2b", why)
    if horizon is None:
        return unchecked("P2b", "no convergence horizon given")
    safe, safer = regions
    succ = abstraction.sc_successors()
    dyn = abstraction.dyn

    # good: the SC orbit from here stays in φ_safer for Δ
    good = safer.cells.copy()
    for _ in range(dyn.ticks(spec.delta)):
        good = safer.cells & good[succ]

    within = good.copy()
    for _ in range(dyn.ticks(horizon)):
        nxt = within | within[succ]
        if np.array_equal(nxt, within):
            break
        within = nxt
    eventually = within.copy()
    while True:
        nxt = eventually | eventually[succ]
        if np.array_equal(nxt, eventually):
            break
        eventually = nxt

    never = np.flatnonzero(safe.cells & ~eventually)
    if never.size:
        return failed("P2b", abstraction.grid.center_of(never[0]), f"{never.size} cells never settle in φ_safer")
    late = np.flatnonzero(safe.cells & ~within)
    if late.size:
        return unchecked("P2b", f"{late.size} cells settle only after the {horizon} horizon")
    return passed("P2b")


def check_p3(spec: RTAModuleSpec, abstraction: Optional[GridAbstraction]) -> Verdict:
    regions, why = _regions(spec, abstraction, need_policy=False)
    if regions is None:
        return unchecked("P3", why)
    safe, safer = regions
    shrunk = region_shrink(safe, 2 * spec.delta, abstraction.dyn, abstraction.grid)
    escaping = (safer - shrunk).indices()
    if escaping.size:
        return failed("P3", abstraction.grid.center_of(escaping[0]), f"{escaping.size} φ_safer cells can leave φ_safe within 2Δ")
    return passed("P3")


def check_composable(modules: Iterable[RTAModuleSpec], free_nodes: Iterable[NodeSpec] = ()) -> Verdict:
    owner = {}
    writer = {}

    def claim(node_name, group):
        if node_name in owner and owner[node_name] != group:
            return failed("composable", node_name, f"node shared by {owner[node_name]} and {group}")
        owner[node_name] = group
        return None

    def publish(topic, group):
        if topic in writer and writer[topic] != group:
            return failed("composable", topic, f"topic written by {writer[topic]} and {group}")
        writer[topic] = group
        return None

    groups = [(m.name, (m.ac.name, m.sc.name, m.dm_name), m.outputs) for m in modules]
    groups += [(n.name, (n.name,), n.outputs) for n in free_nodes]
    for group, names, outputs in groups:
        for name in names:
            bad = claim(name, group)
            if bad:
                return bad
        for topic in sorted(outputs):
            bad = publish(topic, group)
            if bad:
                return bad
    return passed("composable")


def check_module(spec: RTAModuleSpec, abstraction: Optional[GridAbstraction] = None,
                 horizon: Optional[float] = None) -> WellformednessReport:
    report = WellformednessReport(
        module=spec.name,
        resolution=abstraction.grid.resolution if abstraction is not None else None,
    )
    report.add(check_p1(spec))
    report.add(check_p2a(spec, abstraction))
    report.add(check_p2b(spec, abstraction, horizon))
    report.add(check_p3(spec, abstraction))
    logger.info(
        "well-formedness of %s: %s",
        spec.name,
        ", ".join(f"{v.condition}={v.status.value}" for v in report.verdicts.values()),
    )
    return report
