from django.test import SimpleTestCase

from coremodel.nodes import NodeKind, NodeSpec, validate_node
from reachability.grid import DynamicsModel, GridSpec, RegionMask
from reachability.oracle import GridOracle

from .modules import RTAModuleSpec, RTASpecError, dm_transition, generate_dm, invariant_holds
from .predicates import Mode, SafetyPredicate


def walker_module(**overrides):
    """1-D walker on [0, 10], safe on [1, 9), Δ = 0.5 (five ticks)."""
    dyn = DynamicsModel(bounds=[[0.0, 10.0]], controls=(-1, 0, 1), step=lambda xs, u: xs + 0.1 * u, dt=0.1)
    grid = GridSpec(dyn.bounds, (100,), samples="center")
    safe_mask = RegionMask.from_predicate(grid, lambda s: 1.0 <= s[0] < 9.0)
    oracle = GridOracle(dyn, grid, safe_mask)
    fields = dict(
        name="walk",
        ac=NodeSpec("ac", inputs={"state"}, outputs={"u"}, period=0.5, kind=NodeKind.AC),
        sc=NodeSpec("sc", inputs={"state"}, outputs={"u"}, period=0.5, kind=NodeKind.SC),
        dm_name="dm",
        delta=0.5,
        safe=SafetyPredicate.from_region(safe_mask, "safe"),
        safer=SafetyPredicate.from_region(oracle.shrink(1.0), "safer"),
        ttf2d=lambda s: oracle.ttf(s, 1.0),
        oracle=oracle,
    )
    fields.update(overrides)
    return RTAModuleSpec(**fields)


class DmTransitionTests(SimpleTestCase):
    def setUp(self):
        self.spec = walker_module()

    def test_ac_switches_when_failure_is_close(self):
        self.assertEqual(dm_transition(Mode.AC, [1.55], self.spec), Mode.SC)

    def test_sc_returns_inside_safer(self):
        self.assertEqual(dm_transition(Mode.SC, [5.05], self.spec), Mode.AC)

    def test_no_switch_branches(self):
        self.assertEqual(dm_transition(Mode.AC, [5.05], self.spec), Mode.AC)
        self.assertEqual(dm_transition(Mode.SC, [1.55], self.spec), Mode.SC)

    def test_memoryless(self):
        first = dm_transition(Mode.AC, [1.95], self.spec)
        dm_transition(Mode.SC, [5.05], self.spec)
        self.assertEqual(dm_transition(Mode.AC, [1.95], self.spec), first)

    def test_safer_states_never_trigger_ttf(self):
        for c in self.spec.safer.region.grid.centers:
            if self.spec.safer(c):
                self.assertFalse(self.spec.ttf2d(c))


class GenerateDmTests(SimpleTestCase):
    def test_dm_node_shape(self):
        dm = generate_dm(walker_module())
        self.assertEqual(dm.name, "dm")
        self.assertEqual(dm.period, 0.5)
        self.assertEqual(dm.outputs, frozenset())
        self.assertIn("state", dm.inputs)
        self.assertEqual(dm.initial_local_state, Mode.SC)
        self.assertEqual(dm.kind, NodeKind.DM)
        self.assertIsNone(validate_node(dm))

    def test_dm_transition_publishes_nothing(self):
        dm = generate_dm(walker_module())
        mode, out = dm.transition(Mode.SC, {"state": [5.05]})
        self.assertEqual((mode, out), (Mode.AC, {}))

    def test_slow_controller_is_malformed(self):
        slow = NodeSpec("ac", inputs={"state"}, outputs={"u"}, period=1.0, kind=NodeKind.AC)
        with self.assertRaises(RTASpecError) as ctx:
            generate_dm(walker_module(ac=slow))
        self.assertEqual(ctx.exception.code, "malformed_spec")

    def test_mismatched_outputs_are_malformed(self):
        other = NodeSpec("sc", inputs={"state"}, outputs={"v"}, period=0.5, kind=NodeKind.SC)
        with self.assertRaises(RTASpecError) as ctx:
            generate_dm(walker_module(sc=other))
        self.assertIn("outputs differ", ctx.exception.detail)

    def test_safer_outside_safe_is_malformed(self):
        spec = walker_module()
        wide = SafetyPredicate.from_region(RegionMask.full(spec.safe.region.grid))
        with self.assertRaises(RTASpecError):
            generate_dm(walker_module(safer=wide))

    def test_box_predicate(self):
        box = SafetyPredicate.from_box([0, 0], [1, 2])
        self.assertTrue(box([0.5, 2.0]))
        self.assertFalse(box([1.5, 0.0]))
        self.assertIsNone(box.disagreement())


class InvariantTests(SimpleTestCase):
    def setUp(self):
        self.spec = walker_module()

    def test_sc_inside_safe(self):
        self.assertTrue(invariant_holds(Mode.SC, [1.25], self.spec))

    def test_ac_near_boundary(self):
        self.assertFalse(invariant_holds(Mode.AC, [1.25], self.spec))
        self.assertTrue(invariant_holds(Mode.AC, [1.55], self.spec))

    def test_sc_outside_safe(self):
        self.assertFalse(invariant_holds(Mode.SC, [0.5], self.spec))

    def test_uncovered_state(self):
        with self.assertRaises(RTASpecError) as ctx:
            invariant_holds(Mode.SC, [12.0], self.spec)
        self.assertEqual(ctx.exception.code, "state_outside_oracle_domain")
