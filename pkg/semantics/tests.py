from django.test import SimpleTestCase

from coremodel.nodes import NodeKind, NodeSpec
from coremodel.timetable import Calendar
from coremodel.topics import COORD, SCALAR, TopicDecl
from reachability.oracle import ClosedFormOracle
from rta.modules import RTAModuleSpec
from rta.predicates import Mode, SafetyPredicate

from .configuration import (
    fire_node,
    init_configuration,
    step_dm,
    step_env_input,
    step_node,
    step_time_progress,
)
from .runner import FaultAction, run
from .scheduling import DefaultScheduler, EnvScript, RandomScheduler, ScriptedScheduler
from .system import EngineError, SystemSpec
from .trace import DM_STEP, FIELDS, NODE_STEP, TIME_PROGRESS, Trace


def counting(u):
    def transition(k, inputs):
        return (k or 0) + 1, {"u": u}
    return transition


def plant_step(_, inputs):
    return None, {"state": inputs["state"] + inputs["u"]}


def counter_module(prefix="", state="state", u="u"):
    return RTAModuleSpec(
        name=prefix + "counter",
        ac=NodeSpec(prefix + "ac", inputs={state}, outputs={u}, period=5, transition=counting(1.0),
                    initial_local_state=0, kind=NodeKind.AC),
        sc=NodeSpec(prefix + "sc", inputs={state}, outputs={u}, period=5, transition=counting(-1.0),
                    initial_local_state=0, kind=NodeKind.SC),
        dm_name=prefix + "dm",
        delta=5,
        safe=SafetyPredicate(lambda s: s < 100),
        safer=SafetyPredicate(lambda s: s < 50),
        ttf2d=lambda s: s >= 90,
        state_topic=state,
        oracle=ClosedFormOracle(lambda s, t: s + t / 5 < 100),
    )


def counter_system(**extra):
    topics = {
        "state": TopicDecl("state", SCALAR),
        "u": TopicDecl("u", SCALAR),
        "sensor": TopicDecl("sensor", COORD, default=(0.0, 0.0)),
    }
    plant = NodeSpec("plant", inputs={"state", "u"}, outputs={"state"}, period=5, transition=plant_step)
    return SystemSpec(topics=topics, modules=(counter_module(),), free_nodes=(plant,), name="counter", **extra)


class InitConfigurationTests(SimpleTestCase):
    def test_one_module_starts_in_sc(self):
        c = init_configuration(counter_system())
        self.assertEqual(c.output_enabled, {"ac": False, "sc": True})
        self.assertEqual(c.mode_of("dm"), Mode.SC)
        self.assertEqual((c.current_time, c.fire_now), (0, frozenset()))
        self.assertEqual(c.topics["state"], 0.0)

    def test_no_modules(self):
        spec = SystemSpec(topics={"a": TopicDecl("a", SCALAR)}, free_nodes=(NodeSpec("n", outputs={"a"}, period=5),))
        c = init_configuration(spec)
        self.assertEqual(c.output_enabled, {})
        self.assertEqual(c.fire_now, frozenset())

    def test_two_modules(self):
        topics = {n: TopicDecl(n, SCALAR) for n in ("s1", "u1", "s2", "u2")}
        spec = SystemSpec(
            topics=topics,
            modules=(counter_module("a_", "s1", "u1"), counter_module("b_", "s2", "u2")),
        )
        c = init_configuration(spec)
        self.assertEqual({c.mode_of("a_dm"), c.mode_of("b_dm")}, {Mode.SC})
        self.assertTrue(c.output_enabled["a_sc"] and c.output_enabled["b_sc"])

    def test_shared_output_is_rejected(self):
        topics = {n: TopicDecl(n, SCALAR) for n in ("s1", "s2", "u")}
        with self.assertRaises(EngineError) as ctx:
            SystemSpec(topics=topics, modules=(counter_module("a_", "s1", "u"), counter_module("b_", "s2", "u")))
        self.assertEqual(ctx.exception.code, "not_composable")


class EnvInputTests(SimpleTestCase):
    def setUp(self):
        self.spec = counter_system()
        self.c = init_configuration(self.spec)

    def test_only_topics_change(self):
        c2 = step_env_input(self.c, "sensor", (1.0, 2.0), self.spec)
        self.assertEqual(c2.topics["sensor"], (1.0, 2.0))
        self.assertEqual(c2.replace(topics=self.c.topics), self.c)

    def test_module_output_is_not_an_input(self):
        with self.assertRaises(EngineError) as ctx:
            step_env_input(self.c, "u", 1.0, self.spec)
        self.assertEqual(ctx.exception.code, "not_an_input")

    def test_idempotent(self):
        once = step_env_input(self.c, "sensor", (1.0, 2.0), self.spec)
        twice = step_env_input(once, "sensor", (1.0, 2.0), self.spec)
        self.assertEqual(once, twice)


class TimeProgressTests(SimpleTestCase):
    def setUp(self):
        self.c = init_configuration(counter_system())

    def test_next_entry(self):
        c2 = step_time_progress(self.c, Calendar((("n1", 5), ("n2", 10))))
        self.assertEqual((c2.current_time, c2.fire_now), (5, frozenset({"n1"})))

    def test_simultaneous(self):
        c2 = step_time_progress(self.c, Calendar((("n1", 5), ("n2", 5))))
        self.assertEqual(c2.fire_now, frozenset({"n1", "n2"}))

    def test_exhausted(self):
        with self.assertRaises(EngineError) as ctx:
            step_time_progress(self.c.replace(current_time=10), Calendar((("n1", 5), ("n2", 10))))
        self.assertEqual(ctx.exception.code, "horizon_exhausted")

    def test_not_quiescent(self):
        with self.assertRaises(EngineError) as ctx:
            step_time_progress(self.c.replace(fire_now=frozenset({"ac"})), Calendar((("ac", 5),)))
        self.assertEqual(ctx.exception.code, "not_quiescent")


class StepTests(SimpleTestCase):
    def setUp(self):
        self.spec = counter_system()
        self.c = init_configuration(self.spec).replace(fire_now=frozenset({"dm", "ac", "sc", "plant"}))

    def test_dm_enters_ac_inside_safer(self):
        c2 = step_dm(self.c, "dm", self.spec)
        self.assertEqual(c2.mode_of("dm"), Mode.AC)
        self.assertEqual(c2.output_enabled, {"ac": True, "sc": False})
        self.assertEqual(c2.topics, self.c.topics)
        self.assertNotIn("dm", c2.fire_now)

    def test_dm_stays_in_sc_outside_safer(self):
        c = self.c.replace(topics=self.c.topics.set("state", 70.0))
        c2 = step_dm(c, "dm", self.spec)
        self.assertEqual((c2.mode_of("dm"), c2.output_enabled), (Mode.SC, c.output_enabled))

    def test_dm_stays_in_ac_far_from_failure(self):
        c = self.c.replace(
            local_states={**self.c.local_states, "dm": Mode.AC},
            output_enabled={"ac": True, "sc": False},
            topics=self.c.topics.set("state", 70.0),
        )
        self.assertEqual(step_dm(c, "dm", self.spec).mode_of("dm"), Mode.AC)

    def test_dm_errors(self):
        with self.assertRaises(EngineError) as ctx:
            step_dm(self.c.replace(fire_now=frozenset()), "dm", self.spec)
        self.assertEqual(ctx.exception.code, "not_scheduled")
        with self.assertRaises(EngineError) as ctx:
            step_dm(self.c, "ac", self.spec)
        self.assertEqual(ctx.exception.code, "not_a_dm")

    def test_enabled_sc_publishes(self):
        c2 = step_node(self.c, "sc", self.spec)
        self.assertEqual(c2.topics["u"], -1.0)
        self.assertEqual(c2.local_states["sc"], 1)

    def test_disabled_ac_only_advances_local_state(self):
        c2, published = fire_node(self.c, "ac", self.spec)
        self.assertEqual(published, {})
        self.assertEqual(c2.topics, self.c.topics)
        self.assertEqual(c2.local_states["ac"], 1)

    def test_free_node_always_publishes(self):
        c = self.c.replace(topics=self.c.topics.set("u", 2.0))
        self.assertEqual(step_node(c, "plant", self.spec).topics["state"], 2.0)


class RunTests(SimpleTestCase):
    def test_empty_system(self):
        self.assertEqual(len(run(SystemSpec(topics={}), horizon=10)), 0)

    def test_single_periodic_node(self):
        spec = SystemSpec(topics={"a": TopicDecl("a", SCALAR)},
                          free_nodes=(NodeSpec("n", outputs={"a"}, period=5),))
        trace = run(spec, horizon=12)
        self.assertEqual([e.time for e in trace.of_rule(NODE_STEP)], [0, 5, 10])
        self.assertEqual([e.time for e in trace.of_rule(TIME_PROGRESS)], [5, 10])

    def test_dm_fires_first_and_gates_outputs(self):
        trace = run(counter_system(), horizon=20)
        first = [e for e in trace if e.time == 0]
        self.assertEqual([e.node for e in first], ["dm", "ac", "plant", "sc"])
        self.assertEqual(first[0].mode_after, Mode.AC)
        for e in trace.of_rule(NODE_STEP):
            if e.node == "sc":
                self.assertEqual(e.writes, {})
        self.assertEqual(trace.final.topics["state"], 5.0)

    def test_mutual_exclusion_and_monotone_time(self):
        trace = run(counter_system(), horizon=600, scheduler=RandomScheduler(3), slip_bound=2)
        times = [e.time for e in trace]
        self.assertEqual(times, sorted(times))
        oe = trace.final.output_enabled
        self.assertNotEqual(oe["ac"], oe["sc"])
        self.assertTrue(all(all(e.inv_holds.values()) for e in trace.of_rule(DM_STEP)))

    def test_switching_cycle(self):
        trace = run(counter_system(), horizon=800)
        modes = [(e.mode_before, e.mode_after) for e in trace.of_rule(DM_STEP)]
        self.assertIn((Mode.AC, Mode.SC), modes)
        self.assertIn((Mode.SC, Mode.AC), modes)
        self.assertLess(max(e.writes.get("state", 0) for e in trace), 100)

    def test_replay_determinism(self):
        a = run(counter_system(), horizon=200, scheduler=RandomScheduler(11), slip_bound=3)
        b = run(counter_system(), horizon=200, scheduler=RandomScheduler(11), slip_bound=3)
        self.assertEqual(a.to_jsonl(), b.to_jsonl())
        self.assertEqual(a.digest(), b.digest())

    def test_scripted_deviation_changes_order(self):
        default = run(counter_system(), horizon=5, scheduler=DefaultScheduler())
        deviated = run(counter_system(), horizon=5, scheduler=ScriptedScheduler({0: 1}))
        self.assertEqual(default[0].node, "dm")
        self.assertEqual(deviated[0].node, "ac")
        self.assertEqual(deviated[0].writes, {})

    def test_slip_moves_a_firing(self):
        scheduler = ScriptedScheduler({1: 2})
        trace = run(counter_system(), horizon=5, scheduler=scheduler, slip_bound=2)
        self.assertEqual(scheduler.points[1].label, "slip:ac@0")
        ac = [e for e in trace if e.node == "ac"]
        self.assertEqual([e.time for e in ac], [2, 5])

    def test_env_script(self):
        env = EnvScript([(3, "sensor", [(1.0, 1.0), (2.0, 2.0)])])
        trace = run(counter_system(), env=env, horizon=10, scheduler=ScriptedScheduler({3: 1}))
        writes = [e for e in trace if e.rule == "env-input"]
        self.assertEqual(len(writes), 1)
        self.assertEqual((writes[0].time, writes[0].writes["sensor"]), (5, (2.0, 2.0)))

    def test_dropped_dm_keeps_mode(self):
        class DropDm:
            def intercept(self, time, node, config):
                return FaultAction("drop") if node.kind == NodeKind.DM else None

        trace = run(counter_system(), horizon=10, interceptor=DropDm())
        dm_events = trace.of_rule(DM_STEP)
        self.assertTrue(all(e.fault == "drop" and e.mode_after == Mode.SC for e in dm_events))
        self.assertEqual(trace.final.topics["state"], -2.0)

    def test_replaced_outputs(self):
        class Freeze:
            def intercept(self, time, node, config):
                return FaultAction("replace", transform=lambda out: {"u": 0.0}) if node.name == "ac" else None

        trace = run(counter_system(), horizon=20, interceptor=Freeze())
        self.assertEqual(trace.final.topics["state"], 0.0)
        self.assertTrue(any(e.fault == "replace" for e in trace))


class TraceFormatTests(SimpleTestCase):
    def test_field_order_and_round_trip(self):
        trace = run(counter_system(), horizon=20)
        first_line = trace.to_jsonl().splitlines()[0].decode()
        positions = [first_line.index(f'"{name}"') for name in FIELDS]
        self.assertEqual(positions, sorted(positions))
        again = Trace.from_jsonl(trace.to_jsonl())
        self.assertEqual(again.digest(), trace.digest())
