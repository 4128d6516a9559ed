"""
Syntax tree of a declaration program.

Positions are (line, column) and do not take part in equality, so a
program and its pretty-printed re-parse compare equal.
"""
from dataclasses import dataclass, field
from typing import Any, Optional, Tuple

Pos = Tuple[int, int]


@dataclass(frozen=True)
class TypeRef:
    kind: str  # scalar | bool | coord | vector | enum | any
    size: Optional[int] = None
    choices: Tuple[str, ...] = ()


@dataclass(frozen=True)
class TopicNode:
    name: str
    type: TypeRef
    default: Any = None
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class NodeDecl:
    name: str
    subscribes: Tuple[str, ...] = ()
    publishes: Tuple[str, ...] = ()
    period: Any = None
    phase: Any = 0
    fun: Optional[str] = None
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class RtaDecl:
    name: str
    ac: str
    sc: str
    delta: Any
    safe: str
    safer: str
    ttf: str
    state: Tuple[str, ...] = ()
    oracle: Optional[str] = None
    pos: Pos = field(default=(0, 0), compare=False)

    @property
    def dm_name(self) -> str:
        return f"{self.name}_dm"


@dataclass(frozen=True)
class Program:
    topics: Tuple[TopicNode, ...] = ()
    nodes: Tuple[NodeDecl, ...] = ()
    rtas: Tuple[RtaDecl, ...] = ()

    def functions(self) -> Tuple[str, ...]:
        """Every function name the program references, in declaration order."""
        names = [n.fun for n in self.nodes if n.fun]
        for r in self.rtas:
            names.extend([r.safe, r.safer, r.ttf] + ([r.oracle] if r.oracle else []))
        return tuple(dict.fromkeys(names))

    def node(self, name: str) -> Optional[NodeDecl]:
        return next((n for n in self.nodes if n.name == name), None)
