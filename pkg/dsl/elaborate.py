"""
Program + function bindings -> SystemSpec.

Every rta block becomes an RTAModuleSpec whose DM is generated by the
engine. Each module is checked before the system is built:
- P1 and composability failures always abort
- P2a / P2b / P3 failures abort unless unverified modules are allowed
The reports land in spec.metadata["wellformedness"].
"""
import logging
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from coremodel.errors import RTAError
from coremodel.nodes import NodeBody, NodeKind, NodeSpec
from coremodel.topics import ANY, BOOL, COORD, SCALAR, TopicDecl, ValueDomain
from plants.common import Deployment, deploy
from plants.registry import PlantKit, predicate
from rta.modules import RTAModuleSpec
from semantics.system import SystemSpec
from wellformedness.checks import check_composable, check_module

from .ast import Program, RtaDecl, TypeRef
from .errors import Diagnostic, DslError

logger = logging.getLogger(__name__)

Bindings = Union[Mapping[str, Any], PlantKit]


def domain_of(t: TypeRef) -> ValueDomain:
    if t.kind == "scalar":
        return SCALAR
    if t.kind == "bool":
        return BOOL
    if t.kind == "coord":
        return COORD
    if t.kind == "vector":
        return ValueDomain("vector", t.size)
    if t.kind == "enum":
        return ValueDomain("enum", choices=t.choices)
    return ANY


def _concat(topics):
    def observe(inputs):
        return np.concatenate([np.asarray(inputs[t], dtype=float).ravel() for t in topics])
    return observe


def _body(handle) -> NodeBody:
    if isinstance(handle, NodeBody):
        return handle
    return NodeBody(handle)


def _unbound(program: Program, functions: Mapping[str, Any]):
    problems = []
    for n in program.nodes:
        if n.fun not in functions:
            problems.append(Diagnostic("unbound_function", f"node {n.name!r}: no binding for {n.fun!r}", *n.pos))
    for r in program.rtas:
        for role in ("safe", "safer", "ttf", "oracle"):
            fn = getattr(r, role)
            if fn is not None and fn not in functions:
                problems.append(Diagnostic("unbound_function", f"rta {r.name!r}: no binding for {role} {fn!r}", *r.pos))
    return problems


def _module(r: RtaDecl, nodes: Dict[str, NodeSpec], functions: Mapping[str, Any]) -> RTAModuleSpec:
    state = r.state or ("state",)
    return RTAModuleSpec(
        name=r.name,
        ac=nodes[r.ac],
        sc=nodes[r.sc],
        dm_name=r.dm_name,
        delta=r.delta,
        safe=predicate(functions[r.safe]),
        safer=predicate(functions[r.safer]),
        ttf2d=functions[r.ttf],
        state_topic=state[0],
        observe=_concat(state) if len(state) > 1 else None,
        extra_inputs=frozenset(state[1:]),
        oracle=functions[r.oracle] if r.oracle else None,
    )


def _failure(r: RtaDecl, detail: str) -> Diagnostic:
    return Diagnostic("wellformedness_failure", f"rta {r.name!r}: {detail}", *r.pos)


def elaborate(program: Program, bindings: Bindings, scenario=None, *, mode=None,
              allow_unverified: Optional[bool] = None, name: str = "") -> SystemSpec:
    kit = bindings if isinstance(bindings, PlantKit) else PlantKit(functions=dict(bindings))
    if scenario is not None:
        mode = mode or scenario.mode
        allow_unverified = scenario.allow_unverified if allow_unverified is None else allow_unverified
        name = name or scenario.name
    mode = Deployment(mode or Deployment.RTA)
    functions = kit.functions

    problems = _unbound(program, functions)
    if problems:
        raise DslError.from_diagnostics(problems)

    topics = {}
    for t in program.topics:
        default = kit.topic_defaults.get(t.name, t.default)
        try:
            topics[t.name] = TopicDecl(t.name, domain_of(t.type), default)
        except RTAError as exc:
            raise DslError(exc.code, f"topic {t.name!r}: {exc.detail}", *t.pos) from None

    roles = {}
    for r in program.rtas:
        roles[r.ac] = NodeKind.AC
        roles[r.sc] = NodeKind.SC
    nodes: Dict[str, NodeSpec] = {}
    for n in program.nodes:
        body = _body(functions[n.fun])
        nodes[n.name] = NodeSpec(
            name=n.name,
            inputs=frozenset(n.subscribes),
            outputs=frozenset(n.publishes),
            period=n.period,
            phase=n.phase,
            transition=body.transition,
            initial_local_state=body.initial_local_state,
            kind=roles.get(n.name, NodeKind.FREE),
        )

    modules, reports, failures = [], {}, []
    for r in program.rtas:
        try:
            module = _module(r, nodes, functions)
        except RTAError as exc:
            failures.append(_failure(r, exc.detail))
            continue
        checked, abstraction, horizon = kit.check_view(module)
        report = check_module(checked, abstraction, horizon)
        reports[r.name] = report
        hard = [v for v in report.failures() if v.condition.startswith("P1")]
        soft = [v for v in report.failures() if not v.condition.startswith("P1")]
        if hard or (soft and not allow_unverified):
            failures.extend(_failure(r, f"{v.condition} fails: {v.detail or v.witness}") for v in hard + soft)
        modules.append(module)
    if failures:
        raise DslError.from_diagnostics(failures)

    gated = {m.ac.name for m in modules} | {m.sc.name for m in modules}
    free = tuple(node for node in nodes.values() if node.name not in gated)
    verdict = check_composable(modules, free)
    if not verdict.ok:
        raise DslError("wellformedness_failure", f"modules are not composable: {verdict.detail}")

    monitors = ()
    if mode != Deployment.RTA:
        deployed, controllers = (), ()
        for m in modules:
            kept, extra, watched = deploy(m, mode)
            deployed += kept
            controllers += extra
            monitors += watched
        modules, free = list(deployed), free + controllers

    label = name or "program"
    if mode != Deployment.RTA:
        label = f"{label}/{mode.value}"
    try:
        spec = SystemSpec(topics=topics, modules=tuple(modules), free_nodes=free, monitors=monitors, name=label)
    except RTAError as exc:
        raise DslError("wellformedness_failure", exc.detail) from None
    spec.metadata["wellformedness"] = reports
    spec.metadata["kit"] = kit
    logger.info("elaborated %s: %d module(s), %d node(s)", spec.name, len(spec.modules), len(spec.nodes))
    return spec
