"""Canonical source for a Program: parse(pretty(p)) == p."""
from .ast import NodeDecl, Program, RtaDecl, TopicNode, TypeRef


def _type(t: TypeRef) -> str:
    if t.kind == "vector":
        return f"vector({t.size})"
    if t.kind == "enum":
        return f"enum({', '.join(t.choices)})"
    return t.kind


def _literal(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, tuple):
        return "(" + ", ".join(_literal(v) for v in value) + ")"
    return str(value)


def _topic(t: TopicNode) -> str:
    default = "" if t.default is None else f" = {_literal(t.default)}"
    return f"topic {t.name} : {_type(t.type)}{default};"


def _node(n: NodeDecl) -> str:
    lines = [f"node {n.name} {{"]
    if n.subscribes:
        lines.append(f"  subscribes {', '.join(n.subscribes)};")
    if n.publishes:
        lines.append(f"  publishes {', '.join(n.publishes)};")
    lines.append(f"  period {_literal(n.period)};")
    if n.phase:
        lines.append(f"  phase {_literal(n.phase)};")
    lines.append(f"  fun {n.fun};")
    lines.append("}")
    return "\n".join(lines)


def _rta(r: RtaDecl) -> str:
    lines = [
        f"rta {r.name} {{",
        f"  ac {r.ac};",
        f"  sc {r.sc};",
        f"  delta {_literal(r.delta)};",
        f"  safe {r.safe};",
        f"  safer {r.safer};",
        f"  ttf {r.ttf};",
    ]
    if r.state:
        lines.append(f"  state {', '.join(r.state)};")
    if r.oracle:
        lines.append(f"  oracle {r.oracle};")
    lines.append("}")
    return "\n".join(lines)


def pretty(program: Program) -> str:
    blocks = []
    if program.topics:
        blocks.append("\n".join(_topic(t) for t in program.topics))
    blocks.extend(_node(n) for n in program.nodes)
    blocks.extend(_rta(r) for r in program.rtas)
    return "\n\n".join(blocks) + "\n" if blocks else ""
