from django.test import SimpleTestCase

from .errors import ModelError
from .nodes import NodeBody, NodeSpec, ensure_valid_node, validate_node
from .timetable import make_calendar
from .topics import SCALAR, TopicDecl, ValueDomain, Valuation


class ValidateNodeTests(SimpleTestCase):
    def setUp(self):
        self.topics = {n: TopicDecl(n, SCALAR) for n in ("a", "b")}

    def test_accepts_well_formed_node(self):
        node = NodeSpec("n", inputs={"a"}, outputs={"b"}, period=10)
        self.assertIsNone(validate_node(node, self.topics))

    def test_rejects_overlapping_io(self):
        node = NodeSpec("n", inputs={"a", "b"}, outputs={"b"}, period=10)
        self.assertEqual(validate_node(node), "overlapping_io")

    def test_rejects_zero_period(self):
        node = NodeSpec("n", inputs={"a"}, outputs={"b"}, period=0)
        self.assertEqual(validate_node(node), "nonpositive_period")

    def test_rejects_undeclared_topic(self):
        node = NodeSpec("n", inputs={"a"}, outputs={"zzz"}, period=1)
        self.assertEqual(validate_node(node, self.topics), "unknown_topic")

    def test_ensure_raises_with_code(self):
        node = NodeSpec("n", inputs={"a"}, outputs={"a"}, period=1)
        with self.assertRaises(ModelError) as ctx:
            ensure_valid_node(node)
        self.assertEqual(ctx.exception.code, "overlapping_io")


class MakeCalendarTests(SimpleTestCase):
    def test_single_node_progression(self):
        cal = make_calendar([NodeSpec("n", period=5)], 12)
        self.assertEqual(cal.entries, (("n", 0), ("n", 5), ("n", 10)))

    def test_two_nodes_merge_and_tie_break(self):
        nodes = [NodeSpec("n2", period=10), NodeSpec("n1", period=5)]
        cal = make_calendar(nodes, 10)
        self.assertEqual(
            cal.entries,
            (("n1", 0), ("n2", 0), ("n1", 5), ("n1", 10), ("n2", 10)),
        )
        expected = sorted(
            [(t, n.name) for n in nodes for t in range(0, 11, n.period)]
        )
        self.assertEqual([(t, n) for n, t in cal.entries], expected)

    def test_empty_node_set(self):
        self.assertEqual(len(make_calendar([], 10)), 0)

    def test_phase_and_exact_spacing(self):
        cal = make_calendar([NodeSpec("n", period=3, phase=1)], 20)
        times = cal.firings_of("n")
        self.assertEqual(times[0], 1)
        self.assertTrue(all(b - a == 3 for a, b in zip(times, times[1:])))

    def test_lookups(self):
        cal = make_calendar([NodeSpec("a", period=5), NodeSpec("b", period=5)], 10)
        self.assertEqual(cal.nodes_at(5), ("a", "b"))
        self.assertEqual(cal.next_time_after(5), 10)
        self.assertIsNone(cal.next_time_after(10))

    def test_nonpositive_horizon(self):
        with self.assertRaises(ModelError):
            make_calendar([NodeSpec("n", period=1)], 0)

    def test_is_pure(self):
        nodes = [NodeSpec("a", period=2), NodeSpec("b", period=3)]
        self.assertEqual(make_calendar(nodes, 30), make_calendar(nodes, 30))


class TopicTests(SimpleTestCase):
    def test_default_must_lie_in_domain(self):
        with self.assertRaises(ModelError):
            TopicDecl("mode", ValueDomain("enum", choices=("AC", "SC")), default="XX")

    def test_vector_dimension(self):
        dom = ValueDomain("vector", dim=2)
        self.assertTrue(dom.contains((1.0, 2.0)))
        self.assertFalse(dom.contains((1.0,)))
        self.assertFalse(dom.contains(3.0))

    def test_valuation_check_reports_offender(self):
        topics = {"a": TopicDecl("a", SCALAR)}
        self.assertIsNone(Valuation({"a": 1.5}).check(topics))
        self.assertEqual(Valuation({"a": "x"}).check(topics), ("a", "x"))
        self.assertEqual(Valuation.defaults(topics).set("a", 2.0)["a"], 2.0)


class NodeBodyTests(SimpleTestCase):
    def test_stateless_body_keeps_local_state(self):
        body = NodeBody.stateless(lambda inputs: {"y": inputs["x"] + 1})
        self.assertEqual(body.transition("kept", {"x": 1}), ("kept", {"y": 2}))
        self.assertIsNone(body.initial_local_state)
