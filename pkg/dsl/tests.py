import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings, tag

from coremodel.nodes import NodeKind
from plants import mountain_car
from plants.common import Deployment
from plants.registry import PLANTS, get_plant
from semantics.trace import Trace
from testharness.models import SimulationRun
from testharness.policies import ScheduleKind
from wellformedness.report import Status

from .ast import NodeDecl, Program, TopicNode, TypeRef
from .elaborate import elaborate
from .errors import DslError
from .parser import parse, parse_file
from .printer import pretty
from .scenario import ScenarioConfig

HERE = Path(__file__).resolve().parent
GOLDEN = HERE / "golden"
MALFORMED = GOLDEN / "malformed"
SCENARIOS = HERE / "scenarios"

# file -> (error code, line); line None where only the code is fixed
EXPECTED_ERRORS = {
    "missing_semicolon": ("syntax_error", 2),
    "unknown_type": ("syntax_error", 2),
    "undefined_sc": ("unresolved_reference", 6),
    "duplicate_topic": ("duplicate_name", 3),
    "duplicate_node": ("duplicate_name", 4),
    "undeclared_topic": ("unresolved_reference", 3),
    "missing_period": ("syntax_error", 4),
    "unterminated_block": ("syntax_error", None),
    "unterminated_comment": ("syntax_error", 2),
    "repeated_field": ("syntax_error", 9),
    "bad_character": ("syntax_error", 2),
}

SHARED_TOPIC = """
topic state : coord;
topic cmd : scalar;
node a_ac { subscribes state; publishes cmd; period 10; fun Go; }
node a_sc { subscribes state; publishes cmd; period 10; fun Stop; }
node b_ac { subscribes state; publishes cmd; period 10; fun Go; }
node b_sc { subscribes state; publishes cmd; period 10; fun Stop; }
rta a { ac a_ac; sc a_sc; delta 10; safe S; safer R; ttf T; }
rta b { ac b_ac; sc b_sc; delta 10; safe S; safer R; ttf T; }
"""


def idle(local, inputs):
    return local, {}


def trivial_bindings(program):
    """Nodes do nothing, predicates accept everything, ttf never fires."""
    bound = {n.fun: idle for n in program.nodes}
    for r in program.rtas:
        bound[r.safe] = bound[r.safer] = lambda s: True
        bound[r.ttf] = lambda s: False
    return bound


class ParserTests(SimpleTestCase):
    def test_single_topic(self):
        program = parse("topic targetWaypoint : coord;")
        self.assertEqual(program, Program(topics=(TopicNode("targetWaypoint", TypeRef("coord")),)))

    def test_topics_and_nodes(self):
        program = parse_file(GOLDEN / "waypoint_follower.rta")
        self.assertEqual([t.name for t in program.topics], ["targetWaypoint", "droneState", "controlAction"])
        self.assertEqual(program.topics[1].type, TypeRef("vector", size=4))
        self.assertEqual(program.topics[2].default, (0.0, 0.0))
        control = program.node("motionControl")
        self.assertEqual(control.subscribes, ("droneState", "targetWaypoint"))
        self.assertEqual(control.publishes, ("controlAction",))
        self.assertEqual(control.period, 10)
        self.assertEqual(control.phase, 0)
        self.assertEqual(program.node("planner").pos, (6, 1))

    def test_rta_block(self):
        program = parse_file(GOLDEN / "motion_primitive.rta")
        (module,) = program.rtas
        self.assertEqual((module.ac, module.sc, module.delta), ("mpr_ac", "mpr_sc", 10))
        self.assertEqual(module.dm_name, "SafeMotionPrimitive_dm")
        self.assertEqual(module.state, ())
        self.assertIsNone(module.oracle)
        self.assertEqual(
            program.functions(),
            ("ThirdPartyPlanner", "SafePlanner", "PhiSafe_MPr", "PhiSafer_MPr", "TTF2D_MPr"),
        )

    def test_literals(self):
        topics = {t.name: t for t in parse_file(GOLDEN / "vector_defaults.rta").topics}
        self.assertEqual(topics["origin"].default, (0, 0, 0))
        self.assertEqual(topics["corner"].default, (1.5, -2, 0.03))
        self.assertIsInstance(topics["corner"].default[1], int)
        self.assertEqual(topics["empty"].default, ())
        self.assertIsNone(topics["blob"].default)
        self.assertEqual(topics["blob"].type, TypeRef("any"))

    def test_enums_and_bools(self):
        program = parse_file(GOLDEN / "enums_and_bools.rta")
        plan, armed, landed = program.topics
        self.assertEqual(plan.type.choices, ("mission", "home", "land"))
        self.assertEqual(plan.default, "home")
        self.assertIs(armed.default, True)
        self.assertIs(landed.default, False)
        self.assertEqual(program.node("supervisor").phase, 5)

    def test_field_keywords_are_usable_as_names(self):
        program = parse_file(GOLDEN / "keywords_as_names.rta")
        self.assertEqual([t.name for t in program.topics], ["state", "period", "safe"])
        self.assertEqual(program.node("delta").publishes, ("period",))
        self.assertEqual(program.node("phase").subscribes, ("period",))

    def test_comments_are_ignored(self):
        program = parse_file(GOLDEN / "comments.rta")
        self.assertEqual([t.default for t in program.topics], [1, -2.5])
        self.assertEqual(program.node("n").period, 5)

    def test_empty_program(self):
        self.assertEqual(parse_file(GOLDEN / "empty.rta"), Program())
        self.assertEqual(parse(""), Program())

    def test_malformed_programs_point_at_the_problem(self):
        self.assertEqual(sorted(p.stem for p in MALFORMED.glob("*.rta")), sorted(EXPECTED_ERRORS))
        for stem, (code, line) in EXPECTED_ERRORS.items():
            with self.subTest(program=stem):
                with self.assertRaises(DslError) as ctx:
                    parse_file(MALFORMED / f"{stem}.rta")
                self.assertEqual(ctx.exception.code, code)
                if line is not None:
                    self.assertEqual(ctx.exception.line, line)
                self.assertGreaterEqual(ctx.exception.column, 1)

    def test_undefined_sc_names_the_node(self):
        with self.assertRaises(DslError) as ctx:
            parse_file(MALFORMED / "undefined_sc.rta")
        self.assertIn("c_sc", ctx.exception.detail)

    def test_every_problem_is_reported_in_order(self):
        source = (
            "topic a : scalar;\n"
            "node n { subscribes x; publishes a; period 1; fun F; }\n"
            "node m { subscribes a; publishes y; period 1; fun G; }\n"
        )
        with self.assertRaises(DslError) as ctx:
            parse(source)
        self.assertEqual([d.line for d in ctx.exception.diagnostics], [2, 3])
        self.assertEqual({d.code for d in ctx.exception.diagnostics}, {"unresolved_reference"})
        self.assertEqual(ctx.exception.to_dict()["line"], 2)

    def test_module_without_state_topic(self):
        source = (
            "topic pos : coord; topic cmd : scalar;\n"
            "node c_ac { subscribes pos; publishes cmd; period 10; fun A; }\n"
            "node c_sc { subscribes pos; publishes cmd; period 10; fun B; }\n"
            "rta c { ac c_ac; sc c_sc; delta 10; safe S; safer R; ttf T; }\n"
        )
        with self.assertRaises(DslError) as ctx:
            parse(source)
        self.assertEqual(ctx.exception.code, "unresolved_reference")
        self.assertEqual(ctx.exception.line, 4)

    def test_decision_module_name_is_reserved(self):
        source = (
            "topic state : coord; topic cmd : scalar;\n"
            "node c_ac { subscribes state; publishes cmd; period 10; fun A; }\n"
            "node c_sc { subscribes state; publishes cmd; period 10; fun B; }\n"
            "node c_dm { subscribes state; period 10; fun D; }\n"
            "rta c { ac c_ac; sc c_sc; delta 10; safe S; safer R; ttf T; }\n"
        )
        with self.assertRaises(DslError) as ctx:
            parse(source)
        self.assertEqual(ctx.exception.code, "duplicate_name")
        self.assertIn("c_dm", ctx.exception.detail)


class PrettyPrinterTests(SimpleTestCase):
    def test_golden_programs_survive_printing(self):
        for path in sorted(GOLDEN.glob("*.rta")):
            with self.subTest(program=path.stem):
                program = parse_file(path)
                text = pretty(program)
                self.assertEqual(parse(text), program)
                self.assertEqual(pretty(parse(text)), text)

    def test_plant_programs_survive_printing(self):
        for binding in PLANTS.values():
            with self.subTest(plant=binding.name):
                program = parse_file(binding.program_path)
                self.assertEqual(parse(pretty(program)), program)

    def test_canonical_layout(self):
        source = "topic x:scalar ;node n{publishes x;period 2;phase 0;fun F;}"
        self.assertEqual(
            pretty(parse(source)),
            "topic x : scalar;\n\nnode n {\n  publishes x;\n  period 2;\n  fun F;\n}\n",
        )

    def test_empty_program_prints_nothing(self):
        self.assertEqual(pretty(Program()), "")

    def test_positions_do_not_affect_equality(self):
        moved = NodeDecl("n", publishes=("x",), period=2, fun="F", pos=(9, 9))
        self.assertEqual(parse("topic x : scalar; node n { publishes x; period 2; fun F; }").nodes, (moved,))


class ElaborateTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.kit = get_plant("mountain-car").build()
        cls.program = parse_file(PLANTS["mountain-car"].program_path)

    def test_mountain_car(self):
        spec = elaborate(self.program, self.kit, name="car")
        (module,) = spec.modules
        self.assertEqual((module.name, module.dm_name, module.delta), ("car", "car_dm", 10))
        self.assertEqual(set(spec.nodes), {"cart", "car_ac", "car_sc", "car_dm"})
        self.assertEqual(spec.kind_of("car_ac"), NodeKind.AC)
        self.assertEqual(spec.kind_of("car_sc"), NodeKind.SC)
        self.assertEqual(spec.kind_of("cart"), NodeKind.FREE)
        self.assertEqual(spec.nodes["cart"].phase, 5)
        self.assertEqual(spec.system_outputs, frozenset({"throttle"}))
        self.assertIsNotNone(module.oracle)
        self.assertTrue(spec.metadata["wellformedness"]["car"].overall)
        self.assertIs(spec.metadata["kit"], self.kit)

    def test_kit_defaults_win_over_program_defaults(self):
        kit = get_plant("battery").build(initial=(80.0, 0.0))
        spec = elaborate(parse_file(PLANTS["battery"].program_path), kit)
        self.assertEqual(spec.topics["battery"].default, (80.0, 0.0))
        self.assertEqual(spec.topics["plan"].default, "mission")

    def test_ac_only_deployment(self):
        spec = elaborate(self.program, self.kit, mode=Deployment.AC_ONLY, name="car")
        self.assertEqual(spec.modules, ())
        self.assertEqual(set(spec.nodes), {"cart", "car_ac"})
        self.assertEqual(spec.kind_of("car_ac"), NodeKind.AC)
        self.assertEqual(spec.name, "car/ac-only")
        self.assertEqual([m.name for m in spec.monitors], ["car"])

    def test_mutant_needs_allow_unverified(self):
        kit = get_plant("mountain-car").build(mutant="p3")
        with self.assertRaises(DslError) as ctx:
            elaborate(self.program, kit)
        self.assertEqual(ctx.exception.code, "wellformedness_failure")
        self.assertIn("P3 fails", "\n".join(str(d) for d in ctx.exception.diagnostics))

        spec = elaborate(self.program, kit, allow_unverified=True)
        report = spec.metadata["wellformedness"]["car"]
        self.assertEqual(report.verdicts["P3"].status, Status.FAIL)
        self.assertFalse(report.overall)

    def test_missing_binding(self):
        program = parse_file(GOLDEN / "motion_primitive.rta")
        bindings = trivial_bindings(program)
        del bindings["TTF2D_MPr"]
        with self.assertRaises(DslError) as ctx:
            elaborate(program, bindings)
        self.assertEqual(ctx.exception.code, "unbound_function")
        self.assertEqual(len(ctx.exception.diagnostics), 1)
        self.assertIn("TTF2D_MPr", ctx.exception.detail)

    def test_unchecked_module_elaborates(self):
        program = parse_file(GOLDEN / "motion_primitive.rta")
        spec = elaborate(program, trivial_bindings(program))
        report = spec.metadata["wellformedness"]["SafeMotionPrimitive"]
        self.assertEqual(report.verdicts["P3"].status, Status.NOT_CHECKABLE)
        self.assertTrue(report.overall)
        self.assertFalse(report.verified)

    def test_modules_sharing_an_output(self):
        program = parse(SHARED_TOPIC)
        with self.assertRaises(DslError) as ctx:
            elaborate(program, trivial_bindings(program))
        self.assertEqual(ctx.exception.code, "wellformedness_failure")
        self.assertIn("cmd", ctx.exception.detail)

    def test_period_longer_than_delta_always_fails(self):
        source = (GOLDEN / "motion_primitive.rta").read_text().replace("delta 10;", "delta 5;")
        program = parse(source)
        with self.assertRaises(DslError) as ctx:
            elaborate(program, trivial_bindings(program), allow_unverified=True)
        self.assertEqual(ctx.exception.code, "wellformedness_failure")
        self.assertIn("P1a", ctx.exception.detail)

    def test_several_state_topics_are_concatenated(self):
        program = parse_file(GOLDEN / "multi_state.rta")
        spec = elaborate(program, trivial_bindings(program))
        (module,) = spec.modules
        self.assertEqual(module.state_topic, "state")
        self.assertEqual(module.extra_inputs, frozenset({"segment"}))
        s = module.state_of({"state": (1.0, 2.0, 3.0, 4.0), "segment": (0.0, 0.0, 8.0, 0.0)})
        np.testing.assert_array_equal(s, [1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 8.0, 0.0])
        self.assertIn("segment", spec.dms["tube_dm"].inputs)


class ScenarioConfigTests(SimpleTestCase):
    def test_load(self):
        scenario = ScenarioConfig.load(SCENARIOS / "car.env")
        self.assertEqual(scenario.name, "car")
        self.assertEqual(scenario.plant, "mountain-car")
        self.assertEqual(scenario.resolution, (100, 100))
        self.assertEqual(scenario.horizon, 4000.0)
        self.assertEqual(scenario.mode, Deployment.RTA)
        self.assertEqual(scenario.program_path(), PLANTS["mountain-car"].program_path)
        self.assertFalse(scenario.empty)

    def test_every_shipped_scenario_loads(self):
        for path in sorted(SCENARIOS.glob("*.env")):
            with self.subTest(scenario=path.stem):
                ScenarioConfig.load(path)

    def test_fallback_and_cap(self):
        scenario = ScenarioConfig.from_mapping({"SCHEDULE": "exhaustive", "CAP": "30", "FALLBACK": "Random"})
        policy = scenario.policy()
        self.assertEqual((policy.cap, policy.fallback), (30, "random"))
        self.assertEqual(ScenarioConfig.from_mapping({}).policy().fallback, "error")
        for bad in ({"FALLBACK": "skip"}, {"CAP": "0"}, {"DEPTH": "-1"}):
            with self.subTest(**bad), self.assertRaises(DslError) as ctx:
                ScenarioConfig.from_mapping(bad)
            self.assertEqual(ctx.exception.code, "bad_scenario_value")

    def test_full_scale_car_scenario(self):
        scenario = ScenarioConfig.load(SCENARIOS / "car_full.env")
        policy = scenario.policy()
        self.assertEqual((policy.kind, policy.cap, policy.fallback), (ScheduleKind.EXHAUSTIVE, 1000, "random"))
        self.assertGreaterEqual(scenario.horizon / mountain_car.TICK, 1000)

    def test_keys_are_case_insensitive(self):
        scenario = ScenarioConfig.from_mapping({"plant": "battery", "seed": "2", "fault_targets": "a, b"})
        self.assertEqual((scenario.plant, scenario.seed), ("battery", 2))
        self.assertEqual(scenario.fault_profile().targets, ("a", "b"))

    def test_empty_scenario(self):
        scenario = ScenarioConfig.from_mapping({})
        self.assertTrue(scenario.empty)
        self.assertIsNone(scenario.program_path())

    @override_settings(RTA_EXPLORE_CAP=50)
    def test_policy(self):
        scenario = ScenarioConfig.from_mapping({"SCHEDULE": "exhaustive", "BOUND": "2", "DEPTH": "3"})
        policy = scenario.policy()
        self.assertEqual((policy.kind, policy.bound, policy.depth, policy.cap), (ScheduleKind.EXHAUSTIVE, 2, 3, 50))
        self.assertEqual(scenario.policy(seeds=4, bound=None).seeds, 4)
        self.assertEqual(scenario.policy(seeds=4, bound=None).bound, 2)

    def test_output_dir(self):
        with override_settings(RTA_OUTPUT_DIR=Path("/tmp/rta-runs")):
            self.assertEqual(ScenarioConfig(name="x").output_dir(), Path("/tmp/rta-runs/x"))
        self.assertEqual(ScenarioConfig(name="x", out=Path("elsewhere")).output_dir(), Path("elsewhere/x"))

    def test_rejections(self):
        cases = (
            ({"COLOUR": "red"}, "unknown_scenario_key"),
            ({"BOUND": "lots"}, "bad_scenario_value"),
            ({"SCHEDULE": "bfs"}, "bad_scenario_value"),
            ({"MODE": "manual"}, "bad_scenario_value"),
            ({"BOUND": "-1"}, "bad_scenario_value"),
            ({"PLANT": "zeppelin"}, "unknown_plant"),
            ({"BATTERY_PRESET": "reckless"}, "unknown_preset"),
            ({"PROGRAM": "missing.rta"}, "program_not_found"),
        )
        for values, code in cases:
            with self.subTest(values=values):
                with self.assertRaises(DslError) as ctx:
                    ScenarioConfig.from_mapping(values)
                self.assertEqual(ctx.exception.code, code)

    def test_missing_file(self):
        with self.assertRaises(DslError) as ctx:
            ScenarioConfig.load(SCENARIOS / "nowhere.env")
        self.assertEqual(ctx.exception.code, "scenario_not_found")


class RtaCommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, *args):
        stdout = StringIO()
        call_command("rta", *args, "--out", str(self.out), stdout=stdout)
        return stdout.getvalue()

    def call_failing(self, *args):
        stdout = StringIO()
        with self.assertRaises(CommandError) as ctx:
            call_command("rta", *args, "--out", str(self.out), stdout=stdout)
        return ctx.exception.returncode, stdout.getvalue()

    def test_check_passes(self):
        output = self.call("check", "--scenario", str(SCENARIOS / "car.env"))
        self.assertIn("module car", output)
        self.assertIn("check: ", output)

    def test_check_rejects_a_mutant(self):
        code, output = self.call_failing("check", "--scenario", str(SCENARIOS / "car_mutant_p3.env"))
        self.assertEqual(code, 1)
        self.assertIn("overall     fail", output)

    def test_run_writes_trace_and_report(self):
        output = self.call("run", "--scenario", str(SCENARIOS / "car.env"), "--horizon", "400")
        trace = Trace.read(self.out / "car" / "trace.jsonl")
        report = json.loads((self.out / "car" / "report.json").read_text())
        self.assertEqual(report["events"], len(trace))
        self.assertEqual(report["digest"], trace.digest())
        self.assertTrue(report["audit"]["ok"])
        self.assertIn(trace.digest(), output)

    def test_run_reports_the_dm_drop_witness(self):
        code, output = self.call_failing("run", "--scenario", str(SCENARIOS / "car_dm_drop.env"))
        self.assertEqual(code, 1)
        trace_path = self.out / "car-dm-drop" / "trace.jsonl"
        self.assertIn("violation witness: event", output)
        self.assertIn(str(trace_path), output)
        self.assertTrue(trace_path.exists())

    def test_report_audits_a_stored_trace(self):
        self.call("run", "--scenario", str(SCENARIOS / "car.env"), "--horizon", "400")
        trace_path = self.out / "car" / "trace.jsonl"
        output = self.call("report", "--scenario", str(SCENARIOS / "car.env"), "--trace", str(trace_path))
        self.assertIn("status: ok", output)

    def test_explore(self):
        output = self.call("explore", "--scenario", str(SCENARIOS / "car_explore.env"))
        self.assertIn("schedules: 22", output)
        data = json.loads((self.out / "car-explore" / "explore.json").read_text())
        self.assertEqual(data["schedules"], 22)
        self.assertFalse((self.out / "car-explore" / "violations").exists())

    def test_explore_samples_at_the_cap_on_worker_processes(self):
        args = ("explore", "--scenario", str(SCENARIOS / "car_full.env"), "--horizon", "100", "--cap", "12")
        output = self.call(*args, "--jobs", "2")
        self.assertIn("schedules: 12 (sampled)", output)
        parallel = json.loads((self.out / "car-full" / "explore.json").read_text())
        self.assertEqual(parallel["schedules"], 12)
        self.assertTrue(parallel["sampled"])

        self.call(*args)
        sequential = json.loads((self.out / "car-full" / "explore.json").read_text())
        self.assertEqual(parallel, sequential)

    def test_cap_without_fallback_is_an_error(self):
        code, output = self.call_failing("explore", "--scenario", str(SCENARIOS / "car_full.env"),
                                         "--horizon", "100", "--cap", "12", "--fallback", "error")
        self.assertEqual(code, 2)
        self.assertIn("explosion_guard", output)

    @tag("slow")
    def test_full_scale_exploration(self):
        output = self.call("explore", "--scenario", str(SCENARIOS / "car_full.env"), "--jobs", "4")
        self.assertIn("schedules: 1000 (sampled)", output)
        data = json.loads((self.out / "car-full" / "explore.json").read_text())
        self.assertEqual(data["violations"], [])
        self.assertEqual(data["report"]["runs"], 1000)

    def test_precompute_writes_masks(self):
        output = self.call("precompute", "--scenario", str(SCENARIOS / "car.env"))
        self.assertTrue((self.out / "car" / "car-safe.npz").exists())
        self.assertTrue((self.out / "car" / "car-safer.npz").exists())
        self.assertIn("mask: ", output)

    def test_empty_scenario_runs_nothing(self):
        self.call("run", "--scenario", str(SCENARIOS / "empty.env"))
        self.assertEqual((self.out / "empty" / "trace.jsonl").read_bytes(), b"")

    def test_missing_scenario_is_an_error(self):
        code, output = self.call_failing("run", "--scenario", str(SCENARIOS / "nowhere.env"))
        self.assertEqual(code, 2)
        self.assertIn("scenario_not_found", output)

    def test_worst_status_wins(self):
        code, output = self.call_failing(
            "check", "--scenario", str(SCENARIOS / "empty.env"), str(SCENARIOS / "nowhere.env"),
            str(SCENARIOS / "car_mutant_p3.env"),
        )
        self.assertEqual(code, 2)
        self.assertIn("== empty", output)

    def test_record(self):
        self.call("run", "--scenario", str(SCENARIOS / "car.env"), "--horizon", "400", "--record")
        run = SimulationRun.objects.get()
        self.assertEqual((run.scenario, run.subcommand, run.status), ("car", "run", SimulationRun.Status.OK))
        self.assertEqual(run.schedule_id, "d:")
        self.assertEqual(len(run.digest), 64)


class CheckViewTests(SimpleTestCase):
    def post(self, body):
        return self.client.post("/dsl/check/", body, content_type="application/json")

    def test_parse_errors(self):
        response = self.post({"source": (MALFORMED / "missing_semicolon.rta").read_text()})
        self.assertEqual(response.status_code, 200)
        data = response.json()
        self.assertEqual((data["ok"], data["stage"]), (False, "parse"))
        self.assertEqual(data["diagnostics"][0]["line"], 2)
        self.assertEqual(data["diagnostics"][0]["error"], "syntax_error")

    def test_unbound_functions_without_a_plant(self):
        data = self.post({"source": (GOLDEN / "motion_primitive.rta").read_text()}).json()
        self.assertEqual((data["ok"], data["stage"]), (False, "elaborate"))
        self.assertEqual(len(data["diagnostics"]), 5)
        self.assertEqual({d["error"] for d in data["diagnostics"]}, {"unbound_function"})

    def test_mountain_car(self):
        body = {"source": PLANTS["mountain-car"].program_path.read_text(), "scenario": {"PLANT": "mountain-car"}}
        data = self.post(body).json()
        self.assertTrue(data["ok"])
        self.assertEqual(data["stage"], "check")
        self.assertEqual(data["system"]["modules"][0]["dm"], "car_dm")
        self.assertTrue(data["wellformedness"]["car"]["overall"])

    def test_bad_requests(self):
        self.assertEqual(self.client.get("/dsl/check/").status_code, 405)
        response = self.client.post("/dsl/check/", "{", content_type="application/json")
        self.assertEqual(response.json()["error"], "invalid_json")
        self.assertEqual(self.post({}).json()["error"], "missing_source")
        response = self.post({"source": "", "scenario": {"PLANT": "zeppelin"}})
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.json()["error"], "unknown_plant")
