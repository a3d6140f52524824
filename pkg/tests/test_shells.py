"""Tests for shells: coloring, black ⋆-clusters, exterior boundaries and Δ_z."""

import random
from collections import deque

import pytest

from fpp_lab.errors import NoWhiteWitnessError, WindowOverflowError
from fpp_lab.lattice import Box, LatticeEdge, linf_distance, neighbors, star_neighbors
from fpp_lab.shells import (
    COMPLETE,
    Coloring,
    Shell,
    black_star_cluster,
    build_shell,
    exterior_boundary,
    find_n_of_z,
    l1_diameter,
    shell_from_json,
    shell_properties,
    shell_to_json,
    shell_travel_time,
    shells_separate,
)
from fpp_lab.weights import DistributionSpec, PinnedWeightField, WeightField

ORIGIN = (0, 0)


def _star_flood_oracle(coloring, A, window):
    """Fixed-point closure over an explicit grid of colors."""
    A = set(A)
    black = {p for p in window.points() if coloring.is_black(p)}
    grown = {p for p in black - A if any(linf_distance(p, a) == 1 for a in A)}
    while True:
        more = {p for p in black - A - grown if any(linf_distance(p, g) == 1 for g in grown)}
        if not more:
            return A | grown
        grown |= more


def _lattice_connected(points):
    points = set(points)
    start = next(iter(points))
    seen = {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for _, q in neighbors(p):
            if q in points and q not in seen:
                seen.add(q)
                queue.append(q)
    return seen == points


class TestColoring:
    def test_unit_field_is_white(self, unit_field):
        coloring = Coloring(unit_field, 1.0)
        assert all(coloring.is_white(p) for p in Box(ORIGIN, 3).points())

    def test_pinned_edge_blackens_both_ends(self, unit_field):
        field = PinnedWeightField.pin(unit_field, {LatticeEdge((0, 0), 0): 2.0})
        coloring = Coloring(field, 1.0)
        assert coloring.is_black((0, 0)) and coloring.is_black((1, 0))
        assert coloring.is_white((0, 1))

    def test_white_cluster_reaches(self, unit_field):
        window = Box(ORIGIN, 5)
        assert Coloring(unit_field, 1.0).white_cluster_reaches((2, 2), window)
        assert not Coloring(unit_field, 0.5).white_cluster_reaches((2, 2), window)


class TestBlackStarCluster:
    def test_all_white(self, unit_field):
        cluster = black_star_cluster(Coloring(unit_field, 1.0), [ORIGIN], Box(ORIGIN, 4))
        assert cluster.points == {ORIGIN}
        assert cluster.complete

    def test_all_black_is_indeterminate(self, unit_field):
        coloring = Coloring(unit_field, 0.5)
        cluster = black_star_cluster(coloring, [ORIGIN], Box(ORIGIN, 4))
        assert not cluster.complete
        with pytest.raises(WindowOverflowError):
            black_star_cluster(coloring, [ORIGIN], Box(ORIGIN, 4), require_complete=True)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force(self, seed):
        """Seeded 9x9 Bernoulli coloring against the fixed-point closure."""
        field = WeightField(seed, DistributionSpec.bernoulli(0.8), 2)
        coloring = Coloring(field, 0.0)
        window = Box(ORIGIN, 4)
        for A in ([ORIGIN], [(0, 0), (1, 0)], list(Box((-1, 1), 1).points())):
            cluster = black_star_cluster(coloring, A, window)
            assert cluster.points == _star_flood_oracle(coloring, A, window)

    def test_seed_outside_window(self, unit_field):
        with pytest.raises(ValueError):
            black_star_cluster(Coloring(unit_field, 1.0), [(9, 0)], Box(ORIGIN, 2))


class TestExteriorBoundary:
    def test_single_point(self):
        assert exterior_boundary([ORIGIN], Box(ORIGIN, 5)) == set(star_neighbors(ORIGIN))

    def test_two_by_two_block(self):
        block = [(0, 0), (1, 0), (0, 1), (1, 1)]
        boundary = exterior_boundary(block, Box(ORIGIN, 6))
        assert len(boundary) == 12
        assert all(p not in block for p in boundary)

    def test_hollow_ring_excludes_hole(self):
        ring = [p for p in Box(ORIGIN, 2).points() if linf_distance(p, ORIGIN) == 2]
        boundary = exterior_boundary(ring, Box(ORIGIN, 8))
        assert boundary == {p for p in Box(ORIGIN, 3).points() if linf_distance(p, ORIGIN) == 3}

    def test_overflow(self):
        with pytest.raises(WindowOverflowError):
            exterior_boundary([(3, 0)], Box(ORIGIN, 4))

    def test_star_connected_clusters_have_connected_boundary(self):
        rng = random.Random(17)
        window = Box(ORIGIN, 30)
        for _ in range(100):
            cluster = {ORIGIN}
            for _ in range(rng.randint(1, 30)):
                base = rng.choice(sorted(cluster))
                cluster.add(rng.choice(star_neighbors(base)))
            assert _lattice_connected(exterior_boundary(cluster, window))

    def test_three_dimensions(self):
        assert len(exterior_boundary([(0, 0, 0)], Box((0, 0, 0), 3))) == 26


class TestBuildShell:
    def test_all_white(self, unit_field):
        shell = build_shell(unit_field, ORIGIN, 0.02, Box(ORIGIN, 10))
        assert shell.status == COMPLETE
        assert shell.n_of_z == 0
        assert shell.S == set(star_neighbors(ORIGIN))
        assert shell.delta == shell.S | {ORIGIN}
        assert len(shell.delta) == 9
        assert shell.diameter == 4

    def test_black_center(self, unit_field):
        field = PinnedWeightField.pin(unit_field, {LatticeEdge((0, 0), 0): 2.0})
        shell = build_shell(field, ORIGIN, 0.02, Box(ORIGIN, 10))
        assert shell.n_of_z == 1
        assert shell.S == {p for p in Box(ORIGIN, 2).points() if linf_distance(p, ORIGIN) == 2}
        assert ORIGIN not in shell.delta
        assert (1, 0) not in shell.delta
        assert len(shell.delta) == 16 + 7
        assert shell.diameter == 8

    def test_no_white_witness(self, unit_field):
        with pytest.raises(NoWhiteWitnessError):
            find_n_of_z(Coloring(unit_field, 0.5), ORIGIN, Box(ORIGIN, 6))

    def test_coloring_threshold_must_match(self, unit_field):
        with pytest.raises(ValueError):
            build_shell(unit_field, ORIGIN, 0.02, Box(ORIGIN, 6), Coloring(unit_field, 0.5))

    def test_json_record(self, unit_field):
        shell = build_shell(unit_field, (2, -1), 0.02, Box(ORIGIN, 10))
        assert shell_from_json(shell_to_json(shell)) == shell
        assert Shell.from_dict(shell.to_dict()) == shell

    def test_properties_on_uniform_field(self, uniform_field):
        window = Box(ORIGIN, 40)
        coloring = None
        centers = [(x, y) for x in range(-12, 13, 4) for y in range(-12, 13, 4)]
        for z in centers:
            shell = build_shell(uniform_field, z, 0.02, window, coloring)
            coloring = coloring or Coloring(uniform_field, shell.tbar)
            if not shell.complete:
                continue
            props = shell_properties(shell, coloring, window)
            assert props.ok, (z, props)
            assert shell.S <= shell.delta

    @pytest.mark.slow
    @pytest.mark.statistical
    def test_completion_rate(self, uniform_field):
        window = Box(ORIGIN, 100)
        shell = build_shell(uniform_field, ORIGIN, 0.02, window)
        coloring = Coloring(uniform_field, shell.tbar)
        rng = random.Random(5)
        centers = [(rng.randint(-50, 50), rng.randint(-50, 50)) for _ in range(200)]
        done = sum(build_shell(uniform_field, z, 0.02, window, coloring).complete for z in centers)
        assert done / len(centers) >= 0.99


class TestShellTravelTime:
    def test_unit_weights(self, unit_field):
        window = Box(ORIGIN, 14)
        sy = build_shell(unit_field, (-5, 0), 0.02, window)
        sz = build_shell(unit_field, (5, 0), 0.02, window)
        result = shell_travel_time(unit_field, sy, sz, window)
        assert result.value == 8.0
        assert result.point_time.value == 10.0
        assert result.entry_time.value == 0.0
        assert result.holds
        assert shells_separate(sy, sz, window)

    def test_overlapping_shells(self, unit_field):
        window = Box(ORIGIN, 8)
        sy = build_shell(unit_field, (0, 0), 0.02, window)
        sz = build_shell(unit_field, (2, 0), 0.02, window)
        assert shell_travel_time(unit_field, sy, sz, window).value == 0.0

    def test_comparison_on_uniform_field(self, uniform_field):
        window = Box(ORIGIN, 40)
        y, z = (-15, 0), (15, 0)
        sy = build_shell(uniform_field, y, 0.02, window)
        coloring = Coloring(uniform_field, sy.tbar)
        sz = build_shell(uniform_field, z, 0.02, window, coloring)
        assert sy.complete and sz.complete
        result = shell_travel_time(uniform_field, sy, sz, window)
        assert result.gap >= 0.0
        assert result.holds
        assert shells_separate(sy, sz, window)

    def test_incomplete_shell_rejected(self, unit_field):
        window = Box(ORIGIN, 6)
        good = build_shell(unit_field, ORIGIN, 0.02, window)
        bad = Shell((3, 3), 0, frozenset(), frozenset(), 0, "indeterminate", 1.0)
        with pytest.raises(ValueError):
            shell_travel_time(unit_field, good, bad, window)


def test_l1_diameter():
    assert l1_diameter([]) == 0
    assert l1_diameter([(1, 2)]) == 0
    assert l1_diameter([(0, 0), (2, -3), (1, 1)]) == 5
    assert l1_diameter([(0, 0, 0), (1, -1, 1)]) == 3
