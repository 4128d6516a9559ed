import numpy as np
from django.test import SimpleTestCase, tag
from numpy.testing import assert_allclose

from coremodel.errors import ModelError
from coremodel.nodes import NodeKind, NodeSpec
from reachability.oracle import reach_sc, ttf_grid
from rta.modules import RTAModuleSpec
from rta.predicates import Mode
from semantics.runner import run
from semantics.scheduling import RandomScheduler
from semantics.system import EngineError, SystemSpec
from testharness.audit import audit
from wellformedness.checks import check_composable, check_module
from wellformedness.report import Status

from . import battery, drone, exploration, mountain_car
from .common import Deployment
from .registry import PLANTS, get_plant


def plant_states(trace, node):
    return [ev.writes for ev in trace.events if ev.node == node and ev.writes]


def unsafe_publications(trace, node, dm):
    return [ev for ev in trace.events if ev.node == node and ev.safe is not None and not ev.safe[dm]]


def switches(trace, dm):
    return [(ev.mode_before, ev.mode_after) for ev in trace.events
            if ev.node == dm and ev.mode_before != ev.mode_after]


def unrecovered_switches(trace, dm, within):
    """AC->SC switches with no SC->AC switch within `within` ms, ignoring ones too close to the end."""
    events = [ev for ev in trace.events if ev.node == dm and ev.mode_before != ev.mode_after]
    end = trace.events[-1].time
    late = []
    for i, ev in enumerate(events):
        if (ev.mode_before, ev.mode_after) != (Mode.AC, Mode.SC) or ev.time + within > end:
            continue
        back = next((e for e in events[i + 1:] if e.mode_after == Mode.AC), None)
        if back is None or back.time - ev.time > within:
            late.append(ev.time)
    return late


class MountainCarStepTests(SimpleTestCase):
    def test_bounds_hold_for_random_states(self):
        rng = np.random.default_rng(7)
        states = np.column_stack([rng.uniform(-1.2, 0.6, 500), rng.uniform(-0.07, 0.07, 500)])
        for a in mountain_car.CONTROLS:
            out = mountain_car.step_batch(states, a)
            self.assertTrue(np.all((out[:, 0] >= -1.2) & (out[:, 0] <= 0.6)))
            self.assertTrue(np.all(np.abs(out[:, 1]) <= 0.07 + 1e-12))

    def test_deterministic(self):
        s = (-0.3, 0.01)
        assert_allclose(mountain_car.mountain_car_step(s, 1), mountain_car.mountain_car_step(s, 1))

    def test_fallen_state_is_absorbing(self):
        s = (-1.15, -0.02)
        assert_allclose(mountain_car.mountain_car_step(s, 1), s)
        self.assertTrue(mountain_car.has_fallen(s))

    def test_left_wall_stops_the_car(self):
        out = mountain_car.mountain_car_step((-1.19, -0.05), -1, x_cliff=-1.5)
        self.assertEqual(out[0], -1.2)
        self.assertEqual(out[1], 0.0)

    def test_energy_pumping_follows_velocity(self):
        self.assertEqual(mountain_car.energy_pumping((-0.5, 0.01)), 1)
        self.assertEqual(mountain_car.energy_pumping((-0.5, -0.01)), -1)


class MountainCarModelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = mountain_car.mountain_car_model()

    def test_initial_state_is_safe_and_goal_is_reachable(self):
        start = self.model.snap(mountain_car.INITIAL_STATE)
        self.assertTrue(self.model.safe.contains(start))
        self.assertLessEqual(self.model.dist[self.model.grid.index_of(start)], 400)

    def test_safer_inside_safe_and_safe_avoids_cliff(self):
        self.assertTrue(self.model.safer.issubset(self.model.safe))
        self.assertTrue(self.model.safer.any())
        centers = self.model.grid.centers[self.model.safe.indices()]
        self.assertTrue(np.all(centers[:, 0] > mountain_car.X_CLIFF))

    def test_ttf_agrees_with_region_shrink_on_every_cell(self):
        m = self.model
        shrunk = m.oracle.shrink(2 * m.delta)
        for c in m.grid.centers:
            self.assertEqual(m.ttf(c), not shrunk.contains(c))
        self.assertEqual(
            m.ttf(m.grid.centers[0]),
            ttf_grid(m.grid.centers[0], m.safe, 2 * m.delta, m.dyn, m.grid),
        )

    def test_sc_reaches_goal_within_400_steps(self):
        s = self.model.snap(mountain_car.INITIAL_STATE)
        for _ in range(400):
            if mountain_car.at_goal(s):
                break
            self.assertTrue(self.model.safe.contains(s))
            s = self.model.snap(mountain_car.mountain_car_step(s, self.model.sc_policy(s)))
        self.assertTrue(mountain_car.at_goal(s))

    def test_reach_sc_matches_direct_simulation(self):
        m = self.model
        s = m.snap(mountain_car.INITIAL_STATE)
        visited = {m.grid.index_of(s)}
        for _ in range(50):
            s = m.snap(mountain_car.mountain_car_step(s, m.sc_policy(s)))
            visited.add(m.grid.index_of(s))
        mask = reach_sc(mountain_car.INITIAL_STATE, 50 * m.dyn.dt, m.sc_policy, m.dyn, m.grid)
        self.assertEqual(set(mask.indices().tolist()), visited)

    def test_module_is_well_formed(self):
        module, abstraction = mountain_car.mountain_car_module(self.model)
        report = check_module(module, abstraction, self.model.p2b_horizon)
        for condition in ("P1", "P2a", "P3"):
            self.assertEqual(report.verdicts[condition].status, Status.PASS, report.render())
        self.assertNotEqual(report.verdicts["P2b"].status, Status.FAIL, report.render())

    def test_each_mutant_breaks_its_condition(self):
        for mutant, condition in (("p3", "P3"), ("p2a", "P2a"), ("p2b", "P2b")):
            with self.subTest(mutant=mutant):
                module, abstraction = mountain_car.mountain_car_module(self.model, mutant)
                report = check_module(module, abstraction, self.model.p2b_horizon)
                self.assertEqual(report.verdicts[condition].status, Status.FAIL)

    def test_unknown_mutant(self):
        with self.assertRaises(ValueError):
            mountain_car.predicates(self.model, "p9")


class MountainCarRunTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = mountain_car.mountain_car_model()

    def test_rta_never_leaves_safe(self):
        spec = mountain_car.mountain_car_system(self.model)
        trace = run(spec, horizon=4000)
        self.assertTrue(plant_states(trace, "cart"))
        self.assertEqual(unsafe_publications(trace, "cart", "car_dm"), [])
        dm_events = trace.of_rule("dm-step")
        self.assertTrue(all(all(ev.inv_holds.values()) for ev in dm_events))

    def test_rta_under_random_slips_stays_safe(self):
        spec = mountain_car.mountain_car_system(self.model)
        for seed in range(3):
            trace = run(spec, horizon=2000, scheduler=RandomScheduler(seed), slip_bound=2)
            self.assertEqual(unsafe_publications(trace, "cart", "car_dm"), [])

    def test_energy_pumping_alone_falls_off_the_cliff(self):
        spec = mountain_car.mountain_car_system(self.model, deployment=Deployment.AC_ONLY)
        trace = run(spec, horizon=4000)
        states = [w["state"] for w in plant_states(trace, "cart")]
        self.assertTrue(any(mountain_car.has_fallen(s) for s in states))
        self.assertEqual(spec.modules, ())
        self.assertFalse(audit(trace, spec).ok)


class TubeTests(SimpleTestCase):
    def setUp(self):
        self.tube = drone.TubeSpec((0.0, 0.0), (1.0, 0.0), 1.5)

    def test_distance_on_the_line_is_zero(self):
        self.assertAlmostEqual(drone.tube_distance((0.3, 0.0), self.tube), 0.0)

    def test_perpendicular_offset(self):
        self.assertAlmostEqual(drone.tube_distance((0.5, 0.3), self.tube), 0.3)

    def test_agrees_with_sampled_minimum(self):
        rng = np.random.default_rng(3)
        tube = drone.TubeSpec((1.0, -2.0), (4.0, 2.0))
        line = np.linspace(0, tube.length, 200001)[:, None] * tube.direction + np.asarray(tube.a)
        for x in rng.uniform(-5, 5, size=(20, 2)):
            brute = np.min(np.linalg.norm(line - x, axis=1))
            self.assertAlmostEqual(drone.tube_distance(x, tube), brute, places=3)

    def test_distance_past_the_endpoints(self):
        self.assertAlmostEqual(drone.tube_distance((2.0, 0.0), self.tube), 1.0)
        self.assertAlmostEqual(drone.tube_distance((-0.3, 0.4), self.tube), 0.5)
        self.assertFalse(self.tube.contains((2.6, 0.0)))
        self.assertFalse(drone.in_tube((2.6, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)))
        self.assertTrue(drone.in_tube((1.2, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)))

    def test_membership_is_strict(self):
        self.assertFalse(self.tube.contains((0.5, 1.5)))
        self.assertTrue(self.tube.contains((0.5, 1.4999)))

    def test_malformed_tube(self):
        with self.assertRaises(ModelError):
            drone.TubeSpec((1.0, 1.0), (1.0, 1.0))
        with self.assertRaises(ModelError):
            drone.TubeSpec((0.0, 0.0), (1.0, 0.0), 0.0)


class GotoControllerTests(SimpleTestCase):
    def setUp(self):
        self.tube = drone.TubeSpec((0.0, 0.0), (8.0, 0.0))

    def test_ac_at_target_is_still(self):
        assert_allclose(drone.goto_ac((8.0, 0.0, 0.0, 0.0), (8.0, 0.0)), (0.0, 0.0))

    def test_ac_points_at_target(self):
        a = drone.goto_ac((2.0, 0.0, 0.0, 0.0), (8.0, 0.0))
        self.assertGreater(a[0], 0)
        self.assertAlmostEqual(a[1], 0.0)

    def test_sc_on_axis_has_no_lateral_command(self):
        a = drone.goto_sc((0.0, 0.0, 0.0, 0.0), self.tube)
        self.assertAlmostEqual(float(a @ self.tube.normal), 0.0)

    def test_sc_pulls_inward_when_drifting_out(self):
        a = drone.goto_sc((4.0, 0.9 * drone.EPSILON, 0.0, 0.5), self.tube)
        self.assertLess(float(a @ self.tube.normal), 0.0)

    def test_sc_takes_the_module_delta(self):
        s = (4.0, 0.9 * drone.EPSILON, 0.0, 0.5)
        assert_allclose(drone.goto_sc(s, self.tube, drone.TICK), drone.goto_sc(s, self.tube))
        assert_allclose(drone.goto_sc(s, self.tube, delta=2 * drone.TICK), drone.goto_sc(s, self.tube))

    def test_sc_respects_axis_limits(self):
        a = drone.goto_sc((0.0, 1.0, 0.0, 2.0), self.tube)
        self.assertTrue(np.all(np.abs(a) <= drone.A_MAX + 1e-9))

    def test_offset_shrinks_outside_safer(self):
        s = np.array([1.0, 1.2, 0.0, 0.0])
        seg = np.asarray((0.0, 0.0, 8.0, 0.0))
        for _ in range(100):
            obs = np.concatenate([s, seg])
            if drone.in_safer(obs):
                break
            before = drone.tube_distance(s, self.tube)
            s = drone.drone_step(s, drone.goto_sc(s, self.tube))
            self.assertLessEqual(drone.tube_distance(s, self.tube), before + 1e-9)
        self.assertTrue(drone.in_safer(np.concatenate([s, seg])))

    def test_safer_lies_inside_tube(self):
        self.assertTrue(drone.excursion_bound(0.0, 0.0) < drone.EPSILON_SAFER)
        self.assertTrue(drone.ttf_tube((1.45, 0.0)))
        self.assertFalse(drone.ttf_tube((0.0, 0.0)))


class LateralAbstractionTests(SimpleTestCase):
    def test_lateral_loop_is_well_formed(self):
        model = drone.lateral_model()
        module, abstraction = drone.lateral_module(model)
        report = check_module(module, abstraction, model.p2b_horizon)
        for condition in ("P1", "P2a", "P3"):
            self.assertEqual(report.verdicts[condition].status, Status.PASS, report.render())
        self.assertNotEqual(report.verdicts["P2b"].status, Status.FAIL, report.render())
        self.assertTrue(model.safer.issubset(model.safe))


class GotoRunTests(SimpleTestCase):
    def test_ac_alone_leaves_tube_under_overshoot(self):
        spec = drone.goto_system(Deployment.AC_ONLY, seed=1)
        trace = run(spec, horizon=6000, interceptor=drone.OvershootFault(seed=1))
        obs = [drone.observation({"state": w["state"], "segment": (0.0, 0.0, 8.0, 0.0)})
               for w in plant_states(trace, "drone")[:40]]
        self.assertTrue(any(not drone.in_tube(o) for o in obs))

    def test_audit_sees_ac_alone_leave_the_tube(self):
        spec = drone.goto_system(Deployment.AC_ONLY, seed=1)
        trace = run(spec, horizon=6000, interceptor=drone.OvershootFault(seed=1))
        report = audit(trace, spec)
        goto = report.modules["goto"]
        self.assertGreaterEqual(goto.unsafe_entries, 1)
        self.assertFalse(report.ok)
        self.assertIsNotNone(report.witness)
        self.assertEqual(goto.inv_checks, 0)
        self.assertEqual(goto.ac_fraction, 1.0)

    def test_sc_alone_is_audited_without_ac_time(self):
        spec = drone.goto_system(Deployment.SC_ONLY, seed=0)
        report = audit(run(spec, horizon=3000), spec)
        self.assertGreater(report.modules["goto"].plant_firings, 0)
        self.assertEqual(report.modules["goto"].ac_fraction, 0.0)
        self.assertTrue(report.ok)

    def test_rta_keeps_tube_under_overshoot(self):
        for seed in range(3):
            spec = drone.goto_system(Deployment.RTA, seed=seed)
            trace = run(spec, horizon=6000, interceptor=drone.OvershootFault(seed=seed))
            self.assertEqual(unsafe_publications(trace, "drone", "goto_dm"), [])
            self.assertIn((Mode.AC, Mode.SC), switches(trace, "goto_dm"))

    def test_completion_time_ordering(self):
        def completion(deployment, seed):
            trace = run(drone.goto_system(deployment, seed=seed), horizon=60_000)
            return next(ev.time for ev in trace.events if ev.writes.get("done") is True)

        for seed in range(2):
            t_ac = completion(Deployment.AC_ONLY, seed)
            t_rta = completion(Deployment.RTA, seed)
            t_sc = completion(Deployment.SC_ONLY, seed)
            self.assertLessEqual(t_ac, t_rta)
            self.assertLess(t_rta, t_sc)


@tag("slow")
class GotoSeedSweepTests(SimpleTestCase):
    def test_nominal_runs_mostly_in_ac(self):
        for seed in range(20):
            spec = drone.goto_system(Deployment.RTA, seed=seed)
            report = audit(run(spec, horizon=20_000), spec)
            self.assertTrue(report.ok, f"seed {seed}")
            self.assertGreaterEqual(report.ac_fraction, 0.9, f"seed {seed}")

    def test_rta_never_leaves_the_tube_under_overshoot(self):
        for seed in range(50):
            spec = drone.goto_system(Deployment.RTA, seed=seed)
            trace = run(spec, horizon=6000, interceptor=drone.OvershootFault(seed=seed))
            report = audit(trace, spec)
            self.assertEqual(report.modules["goto"].unsafe_entries, 0, f"seed {seed}")

    def test_every_disengagement_hands_back_to_ac(self):
        horizon = drone.lateral_model().p2b_horizon
        for seed in range(5):
            spec = drone.goto_system(Deployment.RTA, seed=seed)
            trace = run(spec, horizon=20_000, interceptor=drone.OvershootFault(seed=seed))
            self.assertIn((Mode.AC, Mode.SC), switches(trace, "goto_dm"))
            self.assertIn((Mode.SC, Mode.AC), switches(trace, "goto_dm"))
            self.assertEqual(unrecovered_switches(trace, "goto_dm", horizon), [], f"seed {seed}")


class BatteryTests(SimpleTestCase):
    def test_linear_discharge(self):
        b = 50.0
        for _ in range(10):
            b = battery.battery_step(b, 1.0, False, cost=lambda u: 1.0)
        self.assertAlmostEqual(b, 40.0)

    def test_charge_saturates(self):
        self.assertEqual(battery.battery_step(99.0, 0.0, True, rate=2.0), 100.0)

    def test_empty_battery_stays_empty(self):
        self.assertEqual(battery.battery_step(0.0, 1.0, False), 0.0)
        self.assertFalse(battery.battery_module().safe((0.0, 3.0)))

    def test_budget(self):
        budget = battery.battery_budget()
        self.assertAlmostEqual(budget.t_max, 4.0)
        self.assertAlmostEqual(budget.cost, 0.3)
        self.assertTrue(budget.ttf((4.2, 10.0)))
        self.assertFalse(budget.ttf((50.0, 10.0)))

    def test_presets(self):
        self.assertEqual(battery.battery_budget().safer_threshold, 85.0)
        self.assertEqual(battery.battery_budget("strict").safer_threshold, 95.0)
        self.assertEqual(battery.battery_budget("field").safer_threshold, 90.0)
        with self.assertRaises(ValueError):
            battery.battery_budget("reckless")

    def test_rta_never_empties_the_battery(self):
        for seed in range(2):
            trace = run(battery.battery_system(seed=seed), horizon=20_000,
                        scheduler=RandomScheduler(seed), slip_bound=1)
            charges = [w["battery"][0] for w in plant_states(trace, "pack")]
            self.assertGreater(min(charges), 0.0)
            self.assertIn((Mode.AC, Mode.SC), switches(trace, "battery_dm"))

    @tag("slow")
    def test_fifty_missions_keep_charge(self):
        for seed in range(50):
            spec = battery.battery_system(seed=seed)
            trace = run(spec, horizon=20_000, scheduler=RandomScheduler(seed), slip_bound=1)
            charges = [w["battery"][0] for w in plant_states(trace, "pack")]
            self.assertGreater(min(charges), 0.0, f"mission {seed}")
            self.assertTrue(audit(trace, spec).ok, f"mission {seed}")

    def test_mission_alone_runs_dry(self):
        trace = run(battery.battery_system(Deployment.AC_ONLY), horizon=20_000)
        charges = [w["battery"][0] for w in plant_states(trace, "pack")]
        self.assertEqual(min(charges), 0.0)

    def test_grid_view(self):
        module, abstraction = battery.battery_abstraction(battery.battery_module())
        report = check_module(module, abstraction)
        self.assertEqual(report.verdicts["P3"].status, Status.PASS)
        self.assertEqual(report.verdicts["P2a"].status, Status.NOT_CHECKABLE)
        self.assertTrue(report.overall)


class ExplorationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.world = exploration.exploration_map()
        cls.module = exploration.exploration_module(cls.world)

    def test_centre_keeps_ac(self):
        self.assertFalse(self.module.ttf2d(exploration.CENTRE))
        self.assertTrue(self.module.safer(exploration.CENTRE))

    def test_near_wall_triggers_ttf(self):
        self.assertTrue(self.module.ttf2d((17.7, 5.0)))
        self.assertTrue(self.module.ttf2d((10.0, 2.3)))

    def test_safer_is_inside_known(self):
        self.assertTrue(self.world.safer.issubset(self.world.known))
        self.assertTrue(self.world.safer.count() < self.world.known.count())

    def test_static_checks(self):
        report = check_module(self.module, exploration.exploration_abstraction(self.world))
        self.assertEqual(report.verdicts["P3"].status, Status.PASS)
        self.assertEqual(report.verdicts["P2b"].status, Status.NOT_CHECKABLE)

    def test_rta_switches_back_and_forth_without_hitting_walls(self):
        trace = run(exploration.exploration_system(world=self.world), horizon=40_000)
        self.assertEqual(unsafe_publications(trace, "rover", "explore_dm"), [])
        seen = switches(trace, "explore_dm")
        first_out = seen.index((Mode.AC, Mode.SC))
        self.assertIn((Mode.SC, Mode.AC), seen[first_out:])

    def test_explorer_alone_hits_a_wall(self):
        trace = run(exploration.exploration_system(Deployment.AC_ONLY, world=self.world), horizon=40_000)
        poses = [w["pose"] for w in plant_states(trace, "rover")]
        self.assertTrue(any(self.world.walls.contains(p) for p in poses))


class CompositionTests(SimpleTestCase):
    def test_goto_and_battery_compose(self):
        goto = drone.goto_module()
        pack = battery.battery_module()
        self.assertTrue(check_composable([goto, pack]).ok)

    def test_shared_output_is_rejected(self):
        goto = drone.goto_module()
        rogue = RTAModuleSpec(
            name="rogue",
            ac=NodeSpec("rogue_ac", inputs={"state"}, outputs={"accel"}, period=50, kind=NodeKind.AC),
            sc=NodeSpec("rogue_sc", inputs={"state"}, outputs={"accel"}, period=50, kind=NodeKind.SC),
            dm_name="rogue_dm",
            delta=50,
            safe=goto.safe,
            safer=goto.safer,
            ttf2d=goto.ttf2d,
        )
        spec = drone.goto_system()
        with self.assertRaises(EngineError) as ctx:
            SystemSpec(topics=spec.topics, modules=spec.modules + (rogue,), free_nodes=spec.free_nodes)
        self.assertEqual(ctx.exception.code, "not_composable")


class RegistryTests(SimpleTestCase):
    def test_every_plant_has_a_program(self):
        for binding in PLANTS.values():
            self.assertTrue(binding.program_path.exists(), binding.program_path)

    def test_unknown_plant(self):
        with self.assertRaises(KeyError):
            get_plant("submarine")

    def test_composed_kit_binds_both_plants(self):
        kit = get_plant("goto+battery").build(seed=0)
        self.assertIn("GotoSafe", kit.functions)
        self.assertIn("ReturnHome", kit.functions)
        self.assertIn("overshoot", kit.faults)
