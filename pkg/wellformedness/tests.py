import numpy as np
from django.test import SimpleTestCase

from coremodel.nodes import NodeKind, NodeSpec
from reachability.grid import DynamicsModel, GridSpec, RegionMask
from reachability.oracle import GridOracle, region_shrink
from rta.modules import RTAModuleSpec
from rta.predicates import SafetyPredicate

from .checks import GridAbstraction, check_composable, check_module, check_p1, check_p2a, check_p2b, check_p3
from .report import Status


def make_module(name="walk", ac_outputs=("u",), sc_outputs=("u",), ac_period=0.5, safe=None, safer=None,
                prefix=""):
    always = SafetyPredicate(membership=lambda s: True)
    return RTAModuleSpec(
        name=name,
        ac=NodeSpec(prefix + "ac", inputs={"state"}, outputs=set(ac_outputs), period=ac_period, kind=NodeKind.AC),
        sc=NodeSpec(prefix + "sc", inputs={"state"}, outputs=set(sc_outputs), period=0.5, kind=NodeKind.SC),
        dm_name=prefix + "dm",
        delta=0.5,
        safe=safe or always,
        safer=safer or always,
        ttf2d=lambda s: False,
    )


def walker():
    dyn = DynamicsModel(bounds=[[0.0, 10.0]], controls=(-1, 0, 1), step=lambda xs, u: xs + 0.1 * u, dt=0.1)
    return dyn, GridSpec(dyn.bounds, (100,), samples="center")


def double_integrator():
    def step(xs, a):
        v = np.clip(xs[:, 1] + 0.1 * a, -0.5, 0.5)
        x = np.clip(xs[:, 0] + 0.1 * v, -1.0, 1.0)
        return np.stack([x, v], axis=1)

    dyn = DynamicsModel(bounds=[[-1.0, 1.0], [-0.55, 0.55]], controls=(-1, 0, 1), step=step, dt=0.1)
    return dyn, GridSpec(dyn.bounds, (200, 11), samples="center")


def brake(s):
    if s[1] > 0.05:
        return -1
    if s[1] < -0.05:
        return 1
    return 0


def stops_inside(s):
    n = round(abs(s[1]) / 0.1)
    stop = s[0] + np.sign(s[1]) * 0.01 * n * (n - 1) / 2
    return abs(s[0]) < 0.8 and abs(stop) < 0.8


class P1Tests(SimpleTestCase):
    def test_pass(self):
        self.assertEqual(check_p1(make_module(ac_period=0.25)).status, Status.PASS)

    def test_slow_ac(self):
        verdict = check_p1(make_module(ac_period=1.0))
        self.assertEqual((verdict.status, verdict.condition, verdict.witness), (Status.FAIL, "P1a", "ac"))

    def test_output_mismatch(self):
        verdict = check_p1(make_module(ac_outputs=("thrust",), sc_outputs=("thrust", "aux")))
        self.assertEqual((verdict.status, verdict.condition), (Status.FAIL, "P1b"))
        self.assertEqual(verdict.witness, ["aux"])


class P2aTests(SimpleTestCase):
    def setUp(self):
        self.dyn, self.grid = double_integrator()
        safe = RegionMask.from_predicate(self.grid, stops_inside)
        self.module = make_module(
            safe=SafetyPredicate.from_region(safe),
            safer=SafetyPredicate.from_region(safe),
        )

    def test_braking_sc_stays_inside(self):
        verdict = check_p2a(self.module, GridAbstraction(self.dyn, self.grid, brake))
        self.assertEqual(verdict.status, Status.PASS)

    def test_rightward_drive_escapes(self):
        verdict = check_p2a(self.module, GridAbstraction(self.dyn, self.grid, lambda s: 1))
        self.assertEqual(verdict.status, Status.FAIL)
        self.assertFalse(self.module.safe(self.dyn.step_one(verdict.witness, 1)))
        self.assertGreater(verdict.witness[0], 0.5)

    def test_empty_safe_set(self):
        empty = SafetyPredicate.from_region(RegionMask.empty(self.grid))
        verdict = check_p2a(make_module(safe=empty, safer=empty), GridAbstraction(self.dyn, self.grid, lambda s: 1))
        self.assertEqual(verdict.status, Status.PASS)

    def test_membership_only_is_not_checkable(self):
        verdict = check_p2a(make_module(), GridAbstraction(self.dyn, self.grid, brake))
        self.assertEqual(verdict.status, Status.NOT_CHECKABLE)


class P2bTests(SimpleTestCase):
    def setUp(self):
        self.dyn, self.grid = walker()
        self.safe = RegionMask.from_predicate(self.grid, lambda s: 1.0 <= s[0] < 9.0)
        self.safer = RegionMask.from_predicate(self.grid, lambda s: 3.0 <= s[0] < 7.0)
        self.module = make_module(
            safe=SafetyPredicate.from_region(self.safe),
            safer=SafetyPredicate.from_region(self.safer),
        )

    @staticmethod
    def homing(s):
        if abs(s[0] - 5.0) < 0.06:
            return 0
        return 1 if s[0] < 5.0 else -1

    def test_converges_to_interior_equilibrium(self):
        verdict = check_p2b(self.module, GridAbstraction(self.dyn, self.grid, self.homing), horizon=5.0)
        self.assertEqual(verdict.status, Status.PASS)

    def test_orbit_outside_safer_fails(self):
        dither = lambda s: 1 if s[0] < 2.0 else -1
        verdict = check_p2b(self.module, GridAbstraction(self.dyn, self.grid, dither), horizon=5.0)
        self.assertEqual(verdict.status, Status.FAIL)
        self.assertFalse(self.module.safer(verdict.witness))

    def test_stationary_inside_equal_regions(self):
        same = SafetyPredicate.from_region(self.safe)
        module = make_module(safe=same, safer=same)
        verdict = check_p2b(module, GridAbstraction(self.dyn, self.grid, lambda s: 0), horizon=0)
        self.assertEqual(verdict.status, Status.PASS)

    def test_short_horizon_is_not_checkable(self):
        verdict = check_p2b(self.module, GridAbstraction(self.dyn, self.grid, self.homing), horizon=1.0)
        self.assertEqual(verdict.status, Status.NOT_CHECKABLE)


class P3Tests(SimpleTestCase):
    def setUp(self):
        self.dyn, self.grid = walker()
        self.safe = RegionMask.from_predicate(self.grid, lambda s: 1.0 <= s[0] < 9.0)

    def _check(self, safer_mask):
        module = make_module(
            safe=SafetyPredicate.from_region(self.safe),
            safer=SafetyPredicate.from_region(safer_mask),
        )
        return check_p3(module, GridAbstraction(self.dyn, self.grid))

    def test_shrunk_safer_passes(self):
        self.assertEqual(self._check(region_shrink(self.safe, 1.0, self.dyn, self.grid)).status, Status.PASS)

    def test_safer_equal_to_safe_fails(self):
        verdict = self._check(self.safe)
        self.assertEqual(verdict.status, Status.FAIL)
        oracle = GridOracle(self.dyn, self.grid, self.safe)
        self.assertTrue(oracle.ttf(verdict.witness, 1.0))

    def test_empty_safer_passes(self):
        self.assertEqual(self._check(RegionMask.empty(self.grid)).status, Status.PASS)

    def test_pass_implies_no_ttf_inside_safer(self):
        safer = region_shrink(self.safe, 1.0, self.dyn, self.grid)
        self.assertEqual(self._check(safer).status, Status.PASS)
        oracle = GridOracle(self.dyn, self.grid, self.safe)
        for c in self.grid.centers[safer.indices()]:
            self.assertFalse(oracle.ttf(c, 1.0))


class ComposableTests(SimpleTestCase):
    def test_disjoint_modules(self):
        motion = make_module("motion", ac_outputs=("thrust",), sc_outputs=("thrust",), prefix="m_")
        battery = make_module("battery", ac_outputs=("plan",), sc_outputs=("plan",), prefix="b_")
        self.assertEqual(check_composable([motion, battery]).status, Status.PASS)

    def test_shared_output_topic(self):
        one = make_module("one", ac_outputs=("thrust",), sc_outputs=("thrust",), prefix="a_")
        two = make_module("two", ac_outputs=("thrust",), sc_outputs=("thrust",), prefix="b_")
        verdict = check_composable([one, two])
        self.assertEqual((verdict.status, verdict.witness), (Status.FAIL, "thrust"))

    def test_shared_node(self):
        one = make_module("one", ac_outputs=("x",), sc_outputs=("x",))
        two = make_module("two", ac_outputs=("y",), sc_outputs=("y",))
        verdict = check_composable([one, two])
        self.assertEqual(verdict.status, Status.FAIL)
        self.assertEqual(verdict.witness, "ac")


class ReportTests(SimpleTestCase):
    def test_report_overall_and_render(self):
        dyn, grid = walker()
        safe = RegionMask.from_predicate(grid, lambda s: 1.0 <= s[0] < 9.0)
        module = make_module(
            safe=SafetyPredicate.from_region(safe),
            safer=SafetyPredicate.from_region(safe),
        )
        report = check_module(module, GridAbstraction(dyn, grid, lambda s: 0), horizon=1.0)
        self.assertFalse(report.overall)
        self.assertEqual([v.condition for v in report.failures()], ["P3"])
        text = report.render()
        self.assertIn("P3", text)
        self.assertIn("grid 100", text)
        self.assertEqual(report.to_dict()["verdicts"][0]["status"], "pass")

    def test_unchecked_without_abstraction(self):
        report = check_module(make_module())
        self.assertTrue(report.overall)
        self.assertFalse(report.verified)
