import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

from coremodel.errors import RTAError
from coremodel.nodes import NodeKind, NodeSpec, ensure_valid_node
from coremodel.timetable import Calendar, make_calendar
from coremodel.topics import TopicDecl
from rta.modules import RTAModuleSpec, generate_dm
from wellformedness.checks import check_composable

logger = logging.getLogger(__name__)


class EngineError(RTAError):
    pass


@dataclass(eq=False)
class SystemSpec:
    """
    A program: declared topics, RTA modules and free nodes.

    Derived on construction:
    - dms: generated decision modules, by name
    - nodes: every node (free, AC, SC, DM), by name
    - acnodes / scnodes: DM name -> AC / SC node name
    - system_outputs (OS): union of module outputs
    - system_inputs (IS): given, or every topic no node publishes

    `monitors` are modules deployed without their DM (ac-only or sc-only
    baselines). Nothing gates them; the audit still checks their φ_safe.
    """
    topics: Mapping[str, TopicDecl]
    modules: Tuple[RTAModuleSpec, ...] = ()
    free_nodes: Tuple[NodeSpec, ...] = ()
    system_inputs: Optional[frozenset] = None
    name: str = ""
    metadata: Dict = field(default_factory=dict)
    monitors: Tuple[RTAModuleSpec, ...] = ()

    def __post_init__(self):
        self.topics = dict(self.topics)
        self.modules = tuple(self.modules)
        self.free_nodes = tuple(self.free_nodes)
        self.monitors = tuple(self.monitors)

        verdict = check_composable(self.modules, self.free_nodes)
        if not verdict.ok:
            raise EngineError("not_composable", f"{verdict.detail} (witness {verdict.witness!r})")

        self.dms: Dict[str, NodeSpec] = {m.dm_name: generate_dm(m) for m in self.modules}
        self.module_of: Dict[str, RTAModuleSpec] = {m.dm_name: m for m in self.modules}
        self.acnodes = {m.dm_name: m.ac.name for m in self.modules}
        self.scnodes = {m.dm_name: m.sc.name for m in self.modules}

        nodes: Dict[str, NodeSpec] = {}
        for node in self.free_nodes:
            nodes[node.name] = node
        for m in self.modules:
            nodes[m.ac.name] = m.ac
            nodes[m.sc.name] = m.sc
            nodes[m.dm_name] = self.dms[m.dm_name]
        for node in nodes.values():
            ensure_valid_node(node, self.topics)
        self.nodes = nodes

        self.system_outputs = frozenset().union(*(m.outputs for m in self.modules))
        written = frozenset().union(*(n.outputs for n in nodes.values()))
        if self.system_inputs is None:
            self.system_inputs = frozenset(self.topics) - written
        else:
            self.system_inputs = frozenset(self.system_inputs)
        overlap = self.system_inputs & self.system_outputs
        if overlap:
            raise EngineError("inputs_overlap_outputs", f"topics {sorted(overlap)} are both system inputs and outputs")
        unknown = self.system_inputs - set(self.topics)
        if unknown:
            raise EngineError("unknown_topic", f"system inputs {sorted(unknown)} are not declared")
        for m in self.monitors:
            if m.state_topic not in self.topics:
                raise EngineError("unknown_topic", f"monitor {m.name!r} watches undeclared topic {m.state_topic!r}")

    def is_dm(self, name: str) -> bool:
        return name in self.dms

    def gated(self) -> Iterable[str]:
        return list(self.acnodes.values()) + list(self.scnodes.values())

    def module_by_name(self, name: str) -> RTAModuleSpec:
        for m in self.modules:
            if m.name == name:
                return m
        raise EngineError("unknown_module", name)

    def calendar(self, horizon) -> Calendar:
        return make_calendar(self.nodes.values(), horizon)

    def default_order(self, names: Iterable[str]) -> list:
        """DMs first, then lexicographic."""
        return sorted(names, key=lambda n: (0 if self.is_dm(n) else 1, n))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "topics": sorted(self.topics),
            "modules": [
                {"name": m.name, "ac": m.ac.name, "sc": m.sc.name, "dm": m.dm_name, "delta": m.delta}
                for m in self.modules
            ],
            "free_nodes": sorted(n.name for n in self.free_nodes),
            "system_inputs": sorted(self.system_inputs),
            "system_outputs": sorted(self.system_outputs),
            "monitors": [m.name for m in self.monitors],
        }

    def kind_of(self, name: str) -> NodeKind:
        return self.nodes[name].kind
