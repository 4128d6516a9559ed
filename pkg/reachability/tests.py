import itertools
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from .bounds import boundary_distance, boundary_distance_map, cost_star, ttf_battery, ttf_lipschitz, ttf_vmax
from .grid import DynamicsModel, GridSpec, ReachabilityError, RegionMask
from .maskio import load_mask, save_mask
from .oracle import (
    GridOracle,
    closed_loop_map,
    closure,
    reach_sc,
    reach_star,
    region_shrink,
    ttf_grid,
    viability_kernel,
)


def drift_model(dt=0.1):
    return DynamicsModel(bounds=[[0.0, 2.0]], controls=(0,), step=lambda xs, u: xs + dt, dt=dt, name="drift")


def walker_model(dims=1, dt=0.1, hi=10.0):
    controls = tuple(itertools.product((-1, 0, 1), repeat=dims))
    return DynamicsModel(
        bounds=[[0.0, hi]] * dims,
        controls=controls,
        step=lambda xs, u: xs + np.asarray(u, dtype=float) * dt,
        dt=dt,
        name=f"walker{dims}d",
    )


def toy_car():
    """Damped 2-D system with a coarse grid; small enough to enumerate."""
    def step(xs, u):
        x, v = xs[:, 0], xs[:, 1]
        v2 = np.clip(0.9 * v + 0.05 * u, -0.2, 0.2)
        x2 = np.clip(x + v2, -1.0, 1.0)
        return np.stack([x2, v2], axis=1)
    return DynamicsModel(bounds=[[-1.0, 1.0], [-0.2, 0.2]], controls=(-1, 0, 1), step=step, dt=1.0, name="toy")


class GridSpecTests(SimpleTestCase):
    def test_every_in_bounds_state_maps_to_one_cell(self):
        grid = GridSpec([[0.0, 1.0], [-1.0, 1.0]], (4, 8))
        self.assertEqual(grid.cell_of([0.0, -1.0]), (0, 0))
        self.assertEqual(grid.cell_of([1.0, 1.0]), (3, 7))
        self.assertEqual(grid.index_of([0.3, 0.1]), 1 * 8 + 4)

    def test_snap_returns_cell_centre(self):
        grid = GridSpec([[0.0, 1.0]], (10,))
        np.testing.assert_allclose(grid.snap([0.42]), [0.45])

    def test_sample_points_include_centre_first(self):
        grid = GridSpec([[0.0, 1.0], [0.0, 1.0]], (2, 2))
        pts = grid.sample_points
        self.assertEqual(pts.shape, (4, 5, 2))
        np.testing.assert_allclose(pts[:, 0, :], grid.centers)

    def test_mask_dimension_mismatch(self):
        grid = GridSpec([[0.0, 1.0]], (10,))
        with self.assertRaises(ReachabilityError) as ctx:
            RegionMask(grid, np.zeros(9, dtype=bool))
        self.assertEqual(ctx.exception.code, "mask_dimension_mismatch")


class ReachStarTests(SimpleTestCase):
    def setUp(self):
        self.dyn = walker_model(dims=2)
        self.grid = GridSpec(self.dyn.bounds, (100, 100), samples="center")

    def test_zero_horizon_is_the_start_cell(self):
        mask = reach_star([5.0, 5.0], 0, self.dyn, self.grid)
        self.assertEqual(mask.indices().tolist(), [self.grid.index_of([5.0, 5.0])])

    def test_monotone_in_horizon(self):
        small = reach_star([5.0, 5.0], 0.3, self.dyn, self.grid)
        large = reach_star([5.0, 5.0], 0.7, self.dyn, self.grid)
        self.assertTrue(small.issubset(large))
        self.assertEqual(small.count(), 7 * 7)

    def test_out_of_bounds_state(self):
        with self.assertRaises(ReachabilityError) as ctx:
            reach_star([11.0, 5.0], 1.0, self.dyn, self.grid)
        self.assertEqual(ctx.exception.code, "out_of_bounds_state")

    def test_matches_exhaustive_enumeration(self):
        dyn = toy_car()
        grid = GridSpec(dyn.bounds, (21, 9), samples="center")
        start = grid.snap([0.1, 0.0])
        expected = set()
        for seq in itertools.product(dyn.controls, repeat=4):
            s = start
            expected.add(grid.index_of(s))
            for u in seq:
                s = grid.snap(dyn.step_one(s, u))
                expected.add(grid.index_of(s))
        got = reach_star(start, 4.0, dyn, grid)
        self.assertEqual(set(got.indices().tolist()), expected)


class ReachScTests(SimpleTestCase):
    def setUp(self):
        self.dyn = toy_car()
        self.grid = GridSpec(self.dyn.bounds, (41, 17))

    def test_constant_policy_zero_horizon(self):
        mask = reach_sc([0.0, 0.0], 0, lambda s: 0, self.dyn, self.grid)
        self.assertEqual(mask.count(), 1)

    def test_contained_in_reach_star(self):
        rng = np.random.default_rng(7)
        policy = lambda s: -1 if s[1] > 0 else 1
        for _ in range(100):
            s = rng.uniform(self.dyn.bounds[:, 0], self.dyn.bounds[:, 1])
            t = float(rng.integers(0, 8))
            self.assertTrue(reach_sc(s, t, policy, self.dyn, self.grid).issubset(
                reach_star(s, t, self.dyn, self.grid)))


class RegionShrinkTests(SimpleTestCase):
    def test_full_grid_is_fixed(self):
        dyn = toy_car()
        grid = GridSpec(dyn.bounds, (21, 9))
        full = RegionMask.full(grid)
        self.assertEqual(region_shrink(full, 10.0, dyn, grid), full)

    def test_zero_horizon_is_identity(self):
        dyn = toy_car()
        grid = GridSpec(dyn.bounds, (21, 9))
        phi = RegionMask.from_predicate(grid, lambda s: abs(s[0]) < 0.5)
        self.assertEqual(region_shrink(phi, 0, dyn, grid), phi)

    def test_drift_shrinks_by_two_ticks(self):
        dyn = drift_model(dt=0.1)
        grid = GridSpec(dyn.bounds, (200,))
        phi = RegionMask.from_predicate(grid, lambda s: 0.0 <= s[0] < 1.0)
        shrunk = region_shrink(phi, 0.2, dyn, grid)
        expected = RegionMask.from_predicate(grid, lambda s: 0.0 <= s[0] < 0.8)
        self.assertEqual(shrunk, expected)

    def test_monotone_in_time_and_region(self):
        dyn = toy_car()
        grid = GridSpec(dyn.bounds, (21, 9))
        wide = RegionMask.from_predicate(grid, lambda s: abs(s[0]) < 0.8)
        narrow = RegionMask.from_predicate(grid, lambda s: abs(s[0]) < 0.5)
        self.assertTrue(region_shrink(wide, 4.0, dyn, grid).issubset(region_shrink(wide, 2.0, dyn, grid)))
        self.assertTrue(region_shrink(narrow, 3.0, dyn, grid).issubset(region_shrink(wide, 3.0, dyn, grid)))
        self.assertTrue(region_shrink(wide, 3.0, dyn, grid).issubset(wide))

    def test_ttf_grid_matches_shrink_on_every_cell(self):
        dyn = toy_car()
        grid = GridSpec(dyn.bounds, (21, 9))
        phi = RegionMask.from_predicate(grid, lambda s: abs(s[0]) < 0.7)
        shrunk = region_shrink(phi, 2.0, dyn, grid)
        for i, c in enumerate(grid.centers):
            self.assertEqual(ttf_grid(c, phi, 2.0, dyn, grid), not shrunk.cells[i])

    def test_ttf_grid_outside_safe_region(self):
        dyn = drift_model()
        grid = GridSpec(dyn.bounds, (200,))
        phi = RegionMask.from_predicate(grid, lambda s: s[0] < 1.0)
        self.assertTrue(ttf_grid([1.5], phi, 0.0, dyn, grid))
        self.assertFalse(ttf_grid([0.1], phi, 0.2, dyn, grid))


class ClosedLoopTests(SimpleTestCase):
    def test_closure_of_drift_runs_to_the_edge(self):
        dyn = drift_model(dt=0.1)
        grid = GridSpec(dyn.bounds, (20,), samples="center")
        succ = closed_loop_map(lambda s: 0, dyn, grid)
        reached = closure(RegionMask.from_indices(grid, [0]), succ)
        self.assertEqual(reached.count(), 20)

    def test_viability_kernel_of_walker_is_whole_region(self):
        dyn = walker_model(dims=1)
        grid = GridSpec(dyn.bounds, (100,), samples="center")
        region = RegionMask.from_predicate(grid, lambda s: 2.0 < s[0] < 8.0)
        self.assertEqual(viability_kernel(region, dyn), region)

    def test_viability_kernel_of_drift_is_empty(self):
        dyn = drift_model()
        grid = GridSpec(dyn.bounds, (200,), samples="center")
        region = RegionMask.from_predicate(grid, lambda s: s[0] < 1.0)
        self.assertFalse(viability_kernel(region, dyn).any())

    def test_grid_oracle_caches_by_tick_count(self):
        dyn = drift_model()
        grid = GridSpec(dyn.bounds, (200,))
        phi = RegionMask.from_predicate(grid, lambda s: s[0] < 1.0)
        oracle = GridOracle(dyn, grid, phi)
        self.assertIs(oracle.shrink(0.2), oracle.shrink(0.19))
        self.assertTrue(oracle.reach_within_safe([0.5], 0.2))
        self.assertFalse(oracle.covers([3.0]))


class BoundsTests(SimpleTestCase):
    def test_lipschitz_arithmetic(self):
        self.assertFalse(ttf_lipschitz(2.0, 1.0, 1.0))
        self.assertTrue(ttf_lipschitz(0.5, 1.0, 1.0))
        self.assertTrue(ttf_lipschitz(0.0, 1.0, 0.0))
        with self.assertRaises(ReachabilityError) as ctx:
            ttf_lipschitz(1.0, 0.0, 1.0)
        self.assertEqual(ctx.exception.code, "nonpositive_lipschitz")

    def test_lipschitz_is_sound_against_grid(self):
        dyn = walker_model(dims=1, dt=0.1)
        grid = GridSpec(dyn.bounds, (100,), samples="center")
        phi = RegionMask.from_predicate(grid, lambda s: 1.0 <= s[0] < 9.0)
        two_delta = 0.5
        dist = boundary_distance_map(phi)
        shrunk = region_shrink(phi, two_delta, dyn, grid)
        conservative = 0
        for i in phi.indices():
            grid_says = not shrunk.cells[i]
            lip_says = ttf_lipschitz(dist[i], 2.0, two_delta)
            if grid_says:
                self.assertTrue(lip_says, f"cell {i}")
            conservative += int(lip_says and not grid_says)
        self.assertGreater(conservative, 0)

    def test_boundary_distance(self):
        grid = GridSpec([[0.0, 10.0]], (100,))
        phi = RegionMask.from_predicate(grid, lambda s: 1.0 <= s[0] < 9.0)
        self.assertAlmostEqual(boundary_distance([1.05], phi), 0.05)
        self.assertAlmostEqual(boundary_distance([5.05], phi), 3.95)
        self.assertEqual(boundary_distance([0.5], phi), 0.0)

    def test_battery_arithmetic(self):
        self.assertTrue(ttf_battery(50, 5, 48))
        self.assertFalse(ttf_battery(100, 5, 48))
        self.assertFalse(ttf_battery(53, 5, 48))

    def _battery(self, rates):
        return DynamicsModel(
            bounds=[[0.0, 100.0]],
            controls=tuple(rates),
            step=lambda bs, u: np.maximum(bs - rates[u], 0.0),
            dt=1.0,
        )

    def test_cost_star(self):
        self.assertEqual(cost_star(self._battery({"a": 2.0, "b": 2.0}), 6.0), 12.0)
        self.assertEqual(cost_star(self._battery({"slow": 1.0, "fast": 3.0}), 4.0), 12.0)
        table = {"idle": 0.5, "cruise": 2.0, "climb": 4.5}
        self.assertEqual(cost_star(self._battery(table), 3.0), max(table.values()) * 3)

    def test_vmax_box(self):
        grid = GridSpec([[0.0, 10.0], [0.0, 10.0]], (100, 100))
        safe = RegionMask.from_predicate(grid, lambda s: 2.0 < s[0] < 8.0 and 2.0 < s[1] < 8.0)
        self.assertFalse(ttf_vmax([5.0, 5.0], safe, 1.0, 2.0))
        self.assertTrue(ttf_vmax([2.5, 5.0], safe, 1.0, 2.0))
        membership = lambda s: 2.0 < s[0] < 8.0 and 2.0 < s[1] < 8.0
        self.assertFalse(ttf_vmax([5.0, 5.0], membership, 1.0, 2.0))
        self.assertTrue(ttf_vmax([2.5, 5.0], membership, 1.0, 2.0))

    def test_vmax_is_conservative_against_grid(self):
        dyn = walker_model(dims=2, dt=0.5)
        grid = GridSpec(dyn.bounds, (20, 20), samples="center")
        safe = RegionMask.from_predicate(grid, lambda s: 2.0 < s[0] < 8.0 and 1.0 < s[1] < 9.0)
        shrunk = region_shrink(safe, 1.0, dyn, grid)
        for i, c in enumerate(grid.centers):
            if not ttf_vmax(c, safe, 1.0, 1.0):
                self.assertTrue(shrunk.cells[i], f"cell {c}")


class MaskIOTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec([[-1.2, 0.6], [-0.07, 0.07]], (12, 7))
        self.mask = RegionMask.from_predicate(self.grid, lambda s: s[0] + 10 * s[1] > -0.5)

    def test_text_and_binary(self):
        with tempfile.TemporaryDirectory() as tmp:
            for name in ("safer.mask", "safer.npz"):
                path = save_mask(Path(tmp) / name, self.mask)
                self.assertEqual(load_mask(path), self.mask)

    def test_text_header(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_mask(Path(tmp) / "m.txt", self.mask)
            lines = path.read_text().splitlines()
            self.assertEqual(lines[1], "resolution 12 7")
            self.assertEqual(len(lines), 4 + 12)

    def test_malformed(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.mask"
            path.write_text("# rta region mask\nresolution 2\nbounds 0 1\n012\n")
            with self.assertRaises(ReachabilityError) as ctx:
                load_mask(path)
            self.assertEqual(ctx.exception.code, "malformed_mask")
