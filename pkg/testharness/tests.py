from django.test import SimpleTestCase, TestCase, tag

from coremodel.nodes import NodeSpec
from coremodel.topics import SCALAR, TopicDecl
from plants import mountain_car
from rta.predicates import Mode
from semantics.runner import run
from semantics.scheduling import EnvScript, RandomScheduler, ScriptedScheduler
from semantics.system import SystemSpec
from semantics.tests import counter_module, counter_system, plant_step
from semantics.trace import DM_STEP, Trace

from .audit import AuditReport, ModuleAudit, audit, completion_time
from .explorer import ReplayMismatch, explore, replay
from .faults import FaultProfile, fault_targets, interceptor_factory
from .models import SimulationRun
from .policies import ExplorationError, ScheduleKind, SchedulePolicy, parse_schedule_id


def writer(name, topic):
    return NodeSpec(name, outputs={topic}, period=10, transition=lambda k, inputs: (k, {topic: 1.0}))


def free_system(*names):
    topics = {f"t_{n}": TopicDecl(f"t_{n}", SCALAR) for n in names}
    return SystemSpec(topics=topics, free_nodes=tuple(writer(n, f"t_{n}") for n in names), name="free")


EXHAUSTIVE = SchedulePolicy(kind=ScheduleKind.EXHAUSTIVE)


class SchedulePolicyTests(SimpleTestCase):
    def test_kind_aliases(self):
        self.assertEqual(ScheduleKind.parse("det"), ScheduleKind.DEFAULT)
        self.assertEqual(SchedulePolicy(kind="exhaustive").kind, ScheduleKind.EXHAUSTIVE)
        with self.assertRaises(ExplorationError):
            ScheduleKind.parse("bfs")

    def test_rejects_bad_parameters(self):
        for kwargs in ({"bound": -1}, {"fallback": "ignore"}, {"deviate": 1.5}):
            with self.subTest(**kwargs), self.assertRaises(ExplorationError):
                SchedulePolicy(**kwargs)

    def test_parse_ids(self):
        index, scheduler = parse_schedule_id("d:")
        self.assertIsNone(index)
        self.assertEqual(scheduler.script, {})

        index, scheduler = parse_schedule_id("2/d:3=1,7=2")
        self.assertEqual(index, 2)
        self.assertIsInstance(scheduler, ScriptedScheduler)
        self.assertEqual(scheduler.script, {3: 1, 7: 2})

        index, scheduler = parse_schedule_id("r:42@0.1")
        self.assertIsInstance(scheduler, RandomScheduler)
        self.assertEqual((scheduler.seed, scheduler.deviate), (42, 0.1))

    def test_unknown_id(self):
        for bad in ("x:1", "d:3", "r:", "a/d:"):
            with self.subTest(bad=bad), self.assertRaises(ExplorationError) as ctx:
                parse_schedule_id(bad)
            self.assertEqual(ctx.exception.code, "unknown_schedule")


class ExploreTests(SimpleTestCase):
    def test_single_node_has_one_schedule(self):
        spec = SystemSpec(topics={"a": TopicDecl("a", SCALAR)}, free_nodes=(NodeSpec("n", outputs={"a"}, period=1),))
        result = explore(spec, EXHAUSTIVE, horizon=2)
        self.assertEqual(result.schedule_ids, ["d:"])

    def test_two_same_instant_nodes_have_two_orders(self):
        result = explore(free_system("n1", "n2"), EXHAUSTIVE, horizon=5)
        self.assertEqual(sorted(result.schedule_ids), ["d:", "d:0=1"])
        self.assertEqual(len({o.digest for o in result.outcomes}), 2)

    def test_slips_are_schedules(self):
        result = explore(free_system("n"), SchedulePolicy(kind="exhaustive", bound=2), horizon=5)
        self.assertEqual(sorted(result.schedule_ids), ["d:", "d:0=1", "d:0=2"])

    def test_all_orders_of_four_nodes(self):
        result = explore(free_system("a", "b", "c", "d"), SchedulePolicy(kind="exhaustive", cap=100), horizon=5)
        self.assertEqual(len(result.outcomes), 24)
        self.assertEqual(len({o.digest for o in result.outcomes}), 24)

    def test_depth_limits_deviations(self):
        policy = SchedulePolicy(kind="exhaustive", depth=1)
        result = explore(free_system("a", "b", "c", "d"), policy, horizon=5)
        self.assertEqual(len(result.outcomes), 7)

    def test_explosion_guard(self):
        with self.assertRaises(ExplorationError) as ctx:
            explore(free_system("a", "b", "c", "d"), SchedulePolicy(kind="exhaustive", cap=10), horizon=5)
        self.assertEqual(ctx.exception.code, "explosion_guard")
        self.assertIn("18", ctx.exception.detail)

    def test_random_fallback_fills_the_cap(self):
        policy = SchedulePolicy(kind="exhaustive", cap=10, fallback="random", seed=3)
        result = explore(free_system("a", "b", "c", "d"), policy, horizon=5)
        self.assertTrue(result.sampled)
        self.assertEqual(len(result.outcomes), 10)
        self.assertEqual(len(set(result.schedule_ids)), 10)

    def test_random_mode_runs_one_schedule_per_seed(self):
        policy = SchedulePolicy(kind="random", seed=5, seeds=3, bound=2)
        result = explore(counter_system(), policy, horizon=100)
        self.assertEqual(result.schedule_ids, ["r:5", "r:6", "r:7"])
        self.assertTrue(result.report.ok)
        self.assertEqual(result.report.runs, 3)

    def test_env_scripts_prefix_ids(self):
        scripts = [EnvScript(), EnvScript([(0, "sensor", (1.0, 1.0))])]
        result = explore(counter_system(), SchedulePolicy(), env=scripts, horizon=20)
        self.assertEqual(result.schedule_ids, ["0/d:", "1/d:"])


class MountainCarExplorationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = mountain_car.mountain_car_model()
        cls.spec = mountain_car.mountain_car_system(cls.model)

    def test_no_violation_in_any_explored_schedule(self):
        policy = SchedulePolicy(kind="exhaustive", depth=1, cap=200)
        result = explore(self.spec, policy, horizon=60)
        self.assertEqual(len(result.outcomes), 22)
        report = result.report
        self.assertGreater(report.totals.inv_checks, 0)
        self.assertEqual(report.inv_violations, 0)
        self.assertEqual(report.unsafe_entries, 0)
        self.assertEqual(result.violations(), [])

    def test_slipping_schedules_stay_safe(self):
        result = explore(self.spec, SchedulePolicy(kind="random", bound=2, seeds=4), horizon=1000)
        self.assertTrue(result.report.ok)

    def test_dm_drop_is_detected_and_replays(self):
        faults = interceptor_factory(FaultProfile("dm-drop"), self.spec)
        result = explore(self.spec, SchedulePolicy(), horizon=4000, interceptor_factory=faults)
        report = result.report
        self.assertGreaterEqual(report.inv_violations + report.unsafe_entries, 1)
        self.assertGreaterEqual(report.inv_violations, 1)

        witness = result.violations()[0]
        self.assertIsNotNone(witness.trace)
        again = replay(self.spec, witness.schedule_id, horizon=4000, interceptor_factory=faults,
                       expected_digest=witness.digest)
        self.assertEqual(audit(again, self.spec).witness, witness.report.witness)


@tag("slow")
class MutantExplorationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = mountain_car.mountain_car_model()
        cls.policy = SchedulePolicy(kind="random", bound=2, seeds=20)

    def explore_mutant(self, mutant):
        spec = mountain_car.mountain_car_system(self.model, mutant=mutant)
        return explore(spec, self.policy, horizon=4000)

    def test_broken_sc_and_widened_safer_violate_the_invariant(self):
        for mutant in ("p2a", "p3"):
            with self.subTest(mutant=mutant):
                result = self.explore_mutant(mutant)
                self.assertGreater(result.report.inv_violations, 0)
                self.assertFalse(result.report.ok)
                self.assertTrue(result.violations())

    def test_unreachable_safer_never_hands_control_to_ac(self):
        self.assertGreater(self.explore_mutant(None).report.ac_fraction, 0.0)
        report = self.explore_mutant("p2b").report
        self.assertEqual(report.ac_fraction, 0.0)
        self.assertEqual(report.totals.recoveries, 0)


class AuditTests(SimpleTestCase):
    def test_run_that_stays_safer(self):
        report = audit(run(counter_system(), horizon=100), counter_system())
        totals = report.totals
        self.assertEqual(totals.disengagements, 0)
        self.assertEqual(totals.plant_firings, 21)
        self.assertEqual(report.ac_fraction, 1.0)
        self.assertTrue(report.ok)
        self.assertIsNone(report.witness)

    def test_one_switch_cycle(self):
        spec = counter_system()
        report = audit(run(spec, horizon=700), spec)
        totals = report.totals
        self.assertEqual((totals.disengagements, totals.recoveries, totals.unrecovered), (1, 1, 0))
        self.assertGreater(totals.max_sc_dwell, 0)
        self.assertEqual(totals.plant_firings, 141)
        self.assertTrue(0 < report.ac_fraction < 1)
        self.assertEqual(report.inv_violations, 0)
        self.assertEqual(report.unsafe_entries, 0)

    def test_unsafe_initial_state_counts_as_an_entry(self):
        topics = {"state": TopicDecl("state", SCALAR, default=150.0), "u": TopicDecl("u", SCALAR)}
        plant = NodeSpec("plant", inputs={"state", "u"}, outputs={"state"}, period=5, transition=plant_step)
        spec = SystemSpec(topics=topics, modules=(counter_module(),), free_nodes=(plant,))
        report = audit(run(spec, horizon=20), spec)
        self.assertEqual(report.unsafe_entries, 1)
        self.assertEqual(report.totals.first_unsafe, 0)
        self.assertFalse(report.ok)

    def test_monitor_without_dm(self):
        module = counter_module()
        topics = {"state": TopicDecl("state", SCALAR), "u": TopicDecl("u", SCALAR)}
        plant = NodeSpec("plant", inputs={"state", "u"}, outputs={"state"}, period=5, transition=plant_step)
        spec = SystemSpec(topics=topics, free_nodes=(plant, module.ac), monitors=(module,))
        report = audit(run(spec, horizon=600), spec)
        counter = report.modules["counter"]
        self.assertEqual(counter.inv_checks, 0)
        self.assertEqual(counter.disengagements, 0)
        self.assertGreater(counter.plant_firings, 0)
        self.assertEqual(counter.ac_fraction, 1.0)
        self.assertEqual(counter.unsafe_entries, 1)
        self.assertFalse(report.ok)

    def test_unrecovered_disengagement(self):
        spec = counter_system()
        report = audit(run(spec, horizon=500), spec)
        self.assertEqual(report.totals.unrecovered, 1)

    def test_same_report_from_a_reloaded_trace(self):
        spec = counter_system()
        trace = run(spec, horizon=700)
        reloaded = Trace.from_jsonl(trace.to_jsonl())
        self.assertEqual(audit(reloaded, spec).to_dict(), audit(trace, spec).to_dict())

    def test_trace_from_another_system(self):
        trace = run(counter_system(), horizon=20)
        other = free_system("x")
        with self.assertRaises(ExplorationError) as ctx:
            audit(trace, other)
        self.assertEqual(ctx.exception.code, "trace_spec_mismatch")

    def test_tampered_mode(self):
        spec = counter_system()
        trace = run(spec, horizon=20)
        dm_event = trace.of_rule(DM_STEP)[1]
        dm_event.mode_before = Mode.SC
        with self.assertRaises(ExplorationError) as ctx:
            audit(trace, spec)
        self.assertEqual(ctx.exception.code, "trace_spec_mismatch")

    def test_merge_is_commutative(self):
        a = AuditReport(modules={"m": ModuleAudit(inv_checks=3, first_unsafe=7, plant_firings=4, ac_firings=1)})
        b = AuditReport(modules={"m": ModuleAudit(inv_checks=2, first_unsafe=2, max_sc_dwell=5), "n": ModuleAudit()})
        self.assertEqual(a.merge(b).to_dict(), b.merge(a).to_dict())
        self.assertEqual(a.merge(b).totals.first_unsafe, 2)

    def test_completion_time(self):
        trace = run(counter_system(), horizon=100)
        self.assertEqual(completion_time(trace, "state", lambda s: s >= 10), 45)
        self.assertIsNone(completion_time(trace, "state", lambda s: s > 1000))

    def test_render_mentions_the_counts(self):
        spec = counter_system()
        text = audit(run(spec, horizon=700), spec).render()
        self.assertIn("disengagements: 1", text)
        self.assertIn("status: ok", text)


class FaultTests(SimpleTestCase):
    def test_default_targets(self):
        spec = counter_system()
        self.assertEqual(fault_targets(FaultProfile("kicks"), spec), ("ac",))
        self.assertEqual(fault_targets(FaultProfile("dm-drop"), spec), ("dm",))

    def test_forbidden_and_unknown_targets(self):
        spec = counter_system()
        with self.assertRaises(ExplorationError) as ctx:
            fault_targets(FaultProfile("kicks", targets=("sc",)), spec)
        self.assertEqual(ctx.exception.code, "forbidden_fault_target")
        with self.assertRaises(ExplorationError) as ctx:
            fault_targets(FaultProfile("kicks", targets=("nobody",)), spec)
        self.assertEqual(ctx.exception.code, "unknown_fault_target")
        with self.assertRaises(ExplorationError) as ctx:
            interceptor_factory(FaultProfile("gremlins"), spec)
        self.assertEqual(ctx.exception.code, "unknown_fault")

    def test_no_fault(self):
        self.assertIsNone(interceptor_factory(FaultProfile(), counter_system()))

    def test_replace_freezes_the_controller(self):
        spec = counter_system()
        make = interceptor_factory(FaultProfile("replace", magnitude=0.0), spec)
        trace = run(spec, horizon=50, interceptor=make(0))
        self.assertEqual(trace.final.topics["state"], 0.0)
        self.assertTrue(any(ev.fault == "replace" for ev in trace))

    def test_kicks_perturb_outputs(self):
        spec = counter_system()
        make = interceptor_factory(FaultProfile("kicks", magnitude=0.5, seed=1), spec)
        trace = run(spec, horizon=50, interceptor=make(0))
        kicked = [ev.writes["u"] for ev in trace if ev.node == "ac" and ev.fault == "perturb"]
        self.assertTrue(kicked)
        self.assertTrue(any(u != 1.0 for u in kicked))

    def test_same_key_same_faults(self):
        spec = counter_system()
        make = interceptor_factory(FaultProfile("kicks", rate=0.5, seed=4), spec)
        first = run(spec, horizon=100, interceptor=make(2)).digest()
        self.assertEqual(run(spec, horizon=100, interceptor=make(2)).digest(), first)

    def test_delay_moves_firings(self):
        spec = counter_system()
        make = interceptor_factory(FaultProfile("delay", magnitude=2), spec)
        trace = run(spec, horizon=30, interceptor=make(0))
        delayed = [ev.time for ev in trace if ev.node == "ac" and ev.fault == "delay"]
        self.assertTrue(delayed)
        self.assertTrue(all(t % 5 == 2 for t in delayed))

    def test_dm_drop_only_in_ac(self):
        spec = counter_system()
        make = interceptor_factory(FaultProfile("dm-drop"), spec)
        trace = run(spec, horizon=30, interceptor=make(0))
        dm_events = trace.of_rule(DM_STEP)
        self.assertIsNone(dm_events[0].fault)
        self.assertTrue(all(ev.fault == "drop" for ev in dm_events[1:]))

    def test_plant_fault_factory(self):
        made = {}

        def factory(target, seed, magnitude=9.0):
            made.update(target=target, seed=seed, magnitude=magnitude)
            return None

        make = interceptor_factory(FaultProfile("push", seed=2), counter_system(), {"push": factory})
        make(3)
        self.assertEqual(made, {"target": "ac", "seed": 5, "magnitude": 9.0})


class ReplayTests(SimpleTestCase):
    def test_default_schedule_replays_bit_for_bit(self):
        spec = counter_system()
        outcome = explore(spec, SchedulePolicy(), horizon=200).outcomes[0]
        trace = replay(spec, outcome.schedule_id, horizon=200, expected_digest=outcome.digest)
        self.assertEqual(trace.digest(), outcome.digest)

    def test_every_explored_schedule_replays(self):
        spec = free_system("a", "b", "c")
        for outcome in explore(spec, EXHAUSTIVE, horizon=25).outcomes:
            with self.subTest(schedule=outcome.schedule_id):
                replay(spec, outcome.schedule_id, horizon=25, expected_digest=outcome.digest)

    def test_other_seed_is_a_mismatch(self):
        spec = counter_system()
        policy = SchedulePolicy(kind="random", bound=3, seed=1)
        outcome = explore(spec, policy, horizon=200).outcomes[0]
        with self.assertRaises(ReplayMismatch) as ctx:
            replay(spec, "r:2", horizon=200, slip_bound=3, expected_digest=outcome.digest)
        self.assertEqual(ctx.exception.code, "digest_mismatch")

    def test_unknown_schedule(self):
        with self.assertRaises(ExplorationError) as ctx:
            replay(counter_system(), "s:1")
        self.assertEqual(ctx.exception.code, "unknown_schedule")
        with self.assertRaises(ExplorationError):
            replay(counter_system(), "3/d:")


class RunViewTests(TestCase):
    def test_list_paginates(self):
        for i in range(3):
            SimulationRun.objects.create(scenario=f"car-{i}", subcommand="run", status=SimulationRun.Status.OK)
        SimulationRun.objects.create(scenario="tube", subcommand="explore", status=SimulationRun.Status.VIOLATION)

        data = self.client.get("/runs/", {"page_size": 2}).json()
        self.assertEqual(data["pagination"], {"page": 1, "page_size": 2, "total": 4, "has_next": True})
        self.assertEqual(len(data["results"]), 2)

        data = self.client.get("/runs/", {"status": "violation"}).json()
        self.assertEqual([r["scenario"] for r in data["results"]], ["tube"])

    def test_detail(self):
        run_row = SimulationRun.objects.create(scenario="car", subcommand="run", report={"ok": True})
        data = self.client.get(f"/runs/{run_row.id}/").json()
        self.assertEqual(data["report"], {"ok": True})
        missing = self.client.get("/runs/00000000-0000-0000-0000-000000000000/")
        self.assertEqual(missing.status_code, 404)
        self.assertEqual(missing.json()["error"], "run_not_found")

    def test_methods(self):
        self.assertEqual(self.client.post("/runs/").status_code, 405)
        self.assertEqual(self.client.get("/runs/simulate/").status_code, 405)

    def test_simulate_empty_scenario(self):
        response = self.client.post("/runs/simulate/", {"scenario": {"NAME": "nothing"}}, content_type="application/json")
        self.assertEqual(response.status_code, 201)
        data = response.json()
        self.assertEqual(data["status"], "ok")
        self.assertEqual(data["report"]["events"], 0)
        self.assertEqual(SimulationRun.objects.count(), 1)

    def test_simulate_battery(self):
        body = {"scenario": {"NAME": "battery", "PLANT": "battery", "SEED": "2", "HORIZON": "3000"}}
        response = self.client.post("/runs/simulate/", body, content_type="application/json")
        self.assertEqual(response.status_code, 201)
        data = response.json()
        self.assertEqual(data["status"], "ok")
        self.assertEqual(len(data["digest"]), 64)

    def test_simulate_rejects_bad_scenarios(self):
        response = self.client.post("/runs/simulate/", {"scenario": {"PLANT": "zeppelin"}}, content_type="application/json")
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.json()["error"], "unknown_plant")
        response = self.client.post("/runs/simulate/", "{", content_type="application/json")
        self.assertEqual(response.json()["error"], "invalid_json")
