"""
Parser for declaration programs (see GRAMMAR.md).

The grammar is compiled once by lark (LALR, contextual lexer, so field
keywords stay usable as topic and node names). After parsing, names are
resolved: every diagnostic found is reported, ordered by position.
"""
import logging
import re
from pathlib import Path
from typing import Dict, List

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from .ast import NodeDecl, Program, RtaDecl, TopicNode, TypeRef
from .errors import Diagnostic, DslError

logger = logging.getLogger(__name__)

GRAMMAR = r"""
start: _decl*
_decl: topic | node | rta

topic: "topic" NAME ":" type ("=" literal)? ";"

type: "scalar"                          -> scalar_t
    | "bool"                            -> bool_t
    | "coord"                           -> coord_t
    | "any"                             -> any_t
    | "vector" "(" INT ")"              -> vector_t
    | "enum" "(" NAME ("," NAME)* ")"   -> enum_t

literal: SIGNED_NUMBER                  -> number
       | "true"                         -> true
       | "false"                        -> false
       | "(" [literal ("," literal)*] ")" -> tuple_lit
       | NAME                           -> symbol

node: "node" NAME "{" node_field* "}"
node_field: "subscribes" names ";"      -> subscribes
          | "publishes" names ";"       -> publishes
          | "period" SIGNED_NUMBER ";"  -> period
          | "phase" SIGNED_NUMBER ";"   -> phase
          | "fun" NAME ";"              -> fun

rta: "rta" NAME "{" rta_field* "}"
rta_field: "ac" NAME ";"                -> ac
         | "sc" NAME ";"                -> sc
         | "delta" SIGNED_NUMBER ";"    -> delta
         | "safe" NAME ";"              -> safe
         | "safer" NAME ";"             -> safer
         | "ttf" NAME ";"               -> ttf
         | "state" names ";"            -> state
         | "oracle" NAME ";"            -> oracle

names: NAME ("," NAME)*

NAME: /[A-Za-z_][A-Za-z0-9_]*/

%import common.SIGNED_NUMBER
%import common.INT
%import common.WS
%import common.CPP_COMMENT
%import common.C_COMMENT
%ignore WS
%ignore CPP_COMMENT
%ignore C_COMMENT
"""

_parser = Lark(GRAMMAR, parser="lalr", propagate_positions=True, maybe_placeholders=False)

NODE_FIELDS = ("subscribes", "publishes", "period", "phase", "fun")
NODE_REQUIRED = ("period", "fun")
RTA_FIELDS = ("ac", "sc", "delta", "safe", "safer", "ttf", "state", "oracle")
RTA_REQUIRED = ("ac", "sc", "delta", "safe", "safer", "ttf")

_INT = re.compile(r"^[+-]?\d+$")


def number(text: str):
    return int(text) if _INT.match(text) else float(text)


def _pos(meta):
    return (getattr(meta, "line", 0), getattr(meta, "column", 0))


@v_args(meta=True)
class _Build(Transformer):
    """Parse tree -> AST. Block fields come back as (name, value, pos)."""

    def start(self, meta, items):
        return Program(
            topics=tuple(i for i in items if isinstance(i, TopicNode)),
            nodes=tuple(i for i in items if isinstance(i, NodeDecl)),
            rtas=tuple(i for i in items if isinstance(i, RtaDecl)),
        )

    def topic(self, meta, items):
        name, type_ref = items[0], items[1]
        default = items[2] if len(items) > 2 else None
        return TopicNode(str(name), type_ref, default, _pos(meta))

    def scalar_t(self, meta, items):
        return TypeRef("scalar")

    def bool_t(self, meta, items):
        return TypeRef("bool")

    def coord_t(self, meta, items):
        return TypeRef("coord")

    def any_t(self, meta, items):
        return TypeRef("any")

    def vector_t(self, meta, items):
        return TypeRef("vector", size=int(items[0]))

    def enum_t(self, meta, items):
        return TypeRef("enum", choices=tuple(str(t) for t in items))

    def number(self, meta, items):
        return number(str(items[0]))

    def true(self, meta, items):
        return True

    def false(self, meta, items):
        return False

    def tuple_lit(self, meta, items):
        return tuple(items)

    def symbol(self, meta, items):
        return str(items[0])

    def names(self, meta, items):
        return tuple(str(t) for t in items)

    def _field(name, convert=str):
        def build(self, meta, items):
            return name, convert(items[0]), _pos(meta)
        return build

    subscribes = _field("subscribes", tuple)
    publishes = _field("publishes", tuple)
    period = _field("period", lambda t: number(str(t)))
    phase = _field("phase", lambda t: number(str(t)))
    fun = _field("fun")
    ac = _field("ac")
    sc = _field("sc")
    delta = _field("delta", lambda t: number(str(t)))
    safe = _field("safe")
    safer = _field("safer")
    ttf = _field("ttf")
    state = _field("state", tuple)
    oracle = _field("oracle")
    del _field

    def node(self, meta, items):
        fields = _collect(items[1:], "node", str(items[0]), _pos(meta), NODE_REQUIRED)
        return NodeDecl(name=str(items[0]), pos=_pos(meta), **fields)

    def rta(self, meta, items):
        fields = _collect(items[1:], "rta", str(items[0]), _pos(meta), RTA_REQUIRED)
        return RtaDecl(name=str(items[0]), pos=_pos(meta), **fields)


def _collect(entries, block: str, name: str, pos, required) -> Dict:
    fields, problems = {}, []
    for field, value, where in entries:
        if field in fields:
            problems.append(Diagnostic("syntax_error", f"{block} {name!r}: field {field!r} given twice", *where))
        fields[field] = value
    for field in required:
        if field not in fields:
            problems.append(Diagnostic("syntax_error", f"{block} {name!r}: missing field {field!r}", *pos))
    if problems:
        raise DslError.from_diagnostics(problems)
    return fields


def _describe(exc: UnexpectedInput) -> str:
    if isinstance(exc, UnexpectedEOF):
        return "unexpected end of input"
    if isinstance(exc, UnexpectedToken):
        expected = ", ".join(sorted(exc.expected)[:6])
        token = exc.token
        found = "end of input" if token.type == "$END" else repr(str(token))
        return f"unexpected {found}, expected {expected}"
    if isinstance(exc, UnexpectedCharacters):
        return f"unexpected character {exc.char!r}"
    return str(exc).splitlines()[0]


def parse(source: str) -> Program:
    """Source text -> Program, or DslError with positioned diagnostics."""
    try:
        tree = _parser.parse(source)
    except UnexpectedInput as exc:
        line, column = getattr(exc, "line", 0), getattr(exc, "column", 0)
        if line in (None, -1):
            line, column = _end_of(source)
        raise DslError("syntax_error", _describe(exc), line, column) from None
    try:
        program = _Build().transform(tree)
    except VisitError as exc:
        if isinstance(exc.orig_exc, DslError):
            raise exc.orig_exc from None
        raise
    problems = resolve(program)
    if problems:
        raise DslError.from_diagnostics(problems)
    logger.debug("parsed %d topics, %d nodes, %d rta modules", len(program.topics), len(program.nodes), len(program.rtas))
    return program


def _end_of(source: str):
    lines = source.split("\n")
    return len(lines), len(lines[-1]) + 1


def resolve(program: Program) -> List[Diagnostic]:
    """Duplicate and dangling names, ordered by position."""
    problems: List[Diagnostic] = []
    topics = {}
    for t in program.topics:
        if t.name in topics:
            problems.append(Diagnostic("duplicate_name", f"topic {t.name!r} declared twice", *t.pos))
        topics[t.name] = t

    names = {}
    for decl in list(program.nodes) + list(program.rtas):
        own = [decl.name] + ([decl.dm_name] if isinstance(decl, RtaDecl) else [])
        for n in own:
            if n in names:
                problems.append(Diagnostic("duplicate_name", f"name {n!r} declared twice", *decl.pos))
            names[n] = decl

    for node in program.nodes:
        for topic in node.subscribes + node.publishes:
            if topic not in topics:
                problems.append(Diagnostic("unresolved_reference", f"node {node.name!r} uses undeclared topic {topic!r}", *node.pos))

    nodes = {n.name for n in program.nodes}
    for r in program.rtas:
        for role in ("ac", "sc"):
            target = getattr(r, role)
            if target not in nodes:
                problems.append(Diagnostic("unresolved_reference", f"rta {r.name!r}: {role} node {target!r} is not declared", *r.pos))
        for topic in r.state:
            if topic not in topics:
                problems.append(Diagnostic("unresolved_reference", f"rta {r.name!r}: state topic {topic!r} is not declared", *r.pos))
        if not r.state and "state" not in topics:
            problems.append(Diagnostic("unresolved_reference", f"rta {r.name!r} names no state topic and no topic 'state' exists", *r.pos))
    return sorted(problems, key=lambda d: (d.line, d.column))


def parse_file(path) -> Program:
    return parse(Path(path).read_text())
