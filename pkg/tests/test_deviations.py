"""
Tests for fpp_lab/deviations.py - time-constant reference, tails, deviation sets and sums
"""

import math
from concurrent.futures import ThreadPoolExecutor

import pytest

from fpp_lab.deviations import (
    EXACT,
    ESTIMATED,
    FanEntry,
    MuEstimate,
    annulus_crossing,
    deviation_sets,
    estimate_mu,
    extend_mu,
    fan_directions,
    grid_measure,
    hre_partial_sum,
    lattice_round,
    lower_bound_chains,
    lp_error,
    off_lattice_limit,
    point_to_shape,
    point_to_shape_replicas,
    radial_sum,
    shape_inclusions,
    tail_above,
    tail_below,
    union_measure,
    y_record_scan,
)
from fpp_lab.errors import (
    EmptyFanError,
    InsufficientDataError,
    MuDegenerateError,
    MuTooUncertainError,
)
from fpp_lab.lattice import Box, LatticeEdge
from fpp_lab.stats import CONVERGING
from fpp_lab.weights import DistributionSpec, PinnedWeightField, WeightField

ORIGIN = (0, 0)
UNIT = DistributionSpec.deterministic(1.0)


@pytest.fixture
def unit_mu():
    return MuEstimate.exact_deterministic(UNIT, 2)


def _spike(field, point, value):
    """Pin all four edges at a point of Z^2 to the same weight."""
    x, y = point
    edges = [
        LatticeEdge((x, y), 0), LatticeEdge((x - 1, y), 0),
        LatticeEdge((x, y), 1), LatticeEdge((x, y - 1), 1),
    ]
    return PinnedWeightField.pin(field, {e: value for e in edges})


def _estimated(value, half_width=0.0):
    return MuEstimate(2, 1, (FanEntry((1, 0), value, half_width),), ESTIMATED)


# Time-constant reference

class TestEstimateMu:
    def test_deterministic_is_exact(self):
        point = estimate_mu(DistributionSpec.deterministic(2.0), (3, 1), (2, 4), 1)
        assert point.mu_hat == 8.0
        assert point.exactness == EXACT
        assert point.value.half_width == 0.0

    def test_needs_replicas(self):
        with pytest.raises(InsufficientDataError):
            estimate_mu(DistributionSpec.uniform(), (1, 0), (5,), 10)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            estimate_mu(UNIT, (0, 0), (5,), 30)
        with pytest.raises(ValueError):
            estimate_mu(UNIT, (1, 0), (5, 3), 30)

    def test_uniform_estimate_is_reproducible(self):
        spec = DistributionSpec.uniform()
        serial = estimate_mu(spec, (1, 0), (5, 10), 30, master_seed=11)
        with ThreadPoolExecutor(max_workers=4) as pool:
            threaded = estimate_mu(spec, (1, 0), (5, 10), 30, master_seed=11, mapper=pool.map)
        assert serial == threaded
        assert 0.1 < serial.mu_hat < 0.6
        assert serial.exactness == ESTIMATED
        assert serial.value.lower <= serial.mu_hat <= serial.value.upper


class TestMuEstimate:
    def test_fan_directions(self):
        assert fan_directions(2, 4) == ((2, 2), (3, 1), (4, 0))
        assert fan_directions(3, 2) == ((1, 1, 0), (2, 0, 0))
        with pytest.raises(ValueError):
            fan_directions(2, 0)

    def test_exact_extension(self, unit_mu):
        assert extend_mu(unit_mu, (3, -4)) == 7.0
        assert unit_mu((0, 0)) == 0.0
        assert unit_mu.mu_lower == unit_mu.mu_upper == 1.0

    def test_nearest_direction_lookup(self):
        fan = MuEstimate(2, 4, (FanEntry((4, 0), 1.0, 0.0), FanEntry((2, 2), 1.2, 0.0)), EXACT)
        assert fan.mu((1, 1)) == pytest.approx(2.4)
        assert fan.mu((-5, 0)) == 5.0
        assert fan.mu((0, 3)) == 3.0
        assert fan.lookup_error((1, -1)) == 0.0

    def test_empty_fan(self):
        with pytest.raises(EmptyFanError):
            MuEstimate(2, 1, (), EXACT)

    def test_round_trip(self):
        fan = MuEstimate(3, 2, (FanEntry((2, 0, 0), 0.4, 0.01), FanEntry((1, 1, 0), 0.45, 0.02)), ESTIMATED)
        assert MuEstimate.from_dict(fan.to_dict()) == fan

    def test_precision_gate(self):
        _estimated(0.3, 0.01).check_precision(10, 0.2)
        with pytest.raises(MuTooUncertainError):
            _estimated(0.3, 0.1).check_precision(10, 0.2)
        with pytest.raises(MuTooUncertainError):
            _estimated(0.3, math.nan).check_precision(10, 0.2)

    def test_deterministic_fan(self):
        fan_estimate = MuEstimate.exact_deterministic(DistributionSpec.deterministic(3.0), 3)
        assert fan_estimate.mu((1, 2, -1)) == 12.0
        with pytest.raises(ValueError):
            MuEstimate.exact_deterministic(DistributionSpec.uniform(), 2)


# Tails

class TestTails:
    def test_deterministic_has_no_deviations(self, unit_mu):
        summary = tail_below(UNIT, (10, 0), 0.2, [10, 20, 40], 30, unit_mu)
        assert summary.counts == (0, 0, 0)
        assert summary.fit is None
        above = tail_above(UNIT, (10, 0), 0.2, [1, 2, 4], 30, unit_mu)
        assert above.counts == (0, 0, 0)
        assert above.y_curves[1] == (0.0, 0.0, 0.0)

    def test_below_needs_x_at_least_norm(self, unit_mu):
        with pytest.raises(ValueError):
            tail_below(UNIT, (10, 0), 0.2, [5, 10], 30, unit_mu)

    def test_noisy_reference_is_refused(self):
        with pytest.raises(MuTooUncertainError):
            tail_below(DistributionSpec.uniform(), (10, 0), 0.2, [10], 30, _estimated(0.35, 0.2))

    def test_counts_nest_in_x(self):
        mu_ref = _estimated(0.35)
        summary = tail_below(DistributionSpec.uniform(), (10, 0), 0.1, [10, 12, 15, 20], 60, mu_ref, master_seed=5)
        counts = summary.counts
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        above = tail_above(DistributionSpec.uniform(), (10, 0), 0.1, [1, 2, 4, 8], 60, mu_ref, master_seed=5)
        assert all(a >= b for a, b in zip(above.counts, above.counts[1:]))
        assert all(a >= b for a, b in zip(above.y_curves[4], above.y_curves[1]))

    def test_pareto_y_curves(self):
        mu_ref = _estimated(3.0)
        summary = tail_above(DistributionSpec.pareto(1.0), (10, 0), 0.2, [4.0, 8.0], 30, mu_ref)
        assert summary.y_curves[1] == pytest.approx((4.0 ** -4, 8.0 ** -4))
        assert summary.y_curves[2] == pytest.approx((2.0 ** -4, 4.0 ** -4))


# Deviation sets

class TestUnionMeasure:
    def test_merging(self):
        assert union_measure([(0.0, 1.0), (0.5, 2.0), (3.0, 4.0)]) == (3.0, 4.0, 2)

    def test_touching_intervals_merge(self):
        assert union_measure([(0.0, 1.0), (1.0, 2.0)]) == (2.0, 2.0, 1)

    def test_empty(self):
        assert union_measure([]) == (0.0, 0.0, 0)
        assert union_measure([(2.0, 2.0)]) == (0.0, 0.0, 0)


class TestDeviationSets:
    @pytest.mark.parametrize("epsilon", [0.1, 0.5])
    def test_deterministic_sets_are_empty(self, unit_field, unit_mu, epsilon):
        report = deviation_sets(unit_field, epsilon, unit_mu, Box(ORIGIN, 8))
        assert report.Z_size == 0
        assert report.T_measure == 0.0
        assert report.components == 0
        assert not report.censored

    def test_single_spike(self, unit_field, unit_mu):
        field = _spike(unit_field, (3, 0), 10.0)
        report = deviation_sets(field, 0.5, unit_mu, Box(ORIGIN, 8))
        assert report.members == ((3, 0),)
        assert report.sup_Z == 3
        assert report.T_measure == 6.0
        assert report.sup_T == 12.0
        assert report.components == 1
        assert not report.censored
        assert grid_measure(report, 0.5) == 6.0

        chains = lower_bound_chains(report, field, unit_mu.mu_upper)
        assert chains.y_count == 1
        assert chains.count_holds
        assert chains.interval_checked == 1
        assert chains.interval_holds

    def test_spike_near_edge_censors(self, unit_field, unit_mu):
        field = _spike(unit_field, (4, 0), 10.0)
        assert deviation_sets(field, 0.5, unit_mu, Box(ORIGIN, 6)).censored

    def test_shape_inclusions(self, unit_field, unit_mu):
        report = deviation_sets(_spike(unit_field, (3, 0), 10.0), 0.5, unit_mu, Box(ORIGIN, 8))
        assert shape_inclusions(report, 4.0) == (True, True)
        assert shape_inclusions(report, 12.0) == (True, True)

    def test_window_must_be_centered(self, unit_field, unit_mu):
        with pytest.raises(ValueError):
            deviation_sets(unit_field, 0.2, unit_mu, Box((1, 0), 5))
        with pytest.raises(ValueError):
            deviation_sets(unit_field, 1.0, unit_mu, Box(ORIGIN, 5))

    def test_beta_must_exceed_threshold(self, unit_field, unit_mu):
        report = deviation_sets(unit_field, 0.5, unit_mu, Box(ORIGIN, 4))
        with pytest.raises(ValueError):
            lower_bound_chains(report, unit_field, 1.0, beta_interval=1.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_uniform_realizations(self, seed):
        field = WeightField(seed, DistributionSpec.uniform(), 2)
        mu_ref = MuEstimate(2, 1, (FanEntry((1, 0), 0.35, 0.0),), EXACT)
        report = deviation_sets(field, 0.25, mu_ref, Box(ORIGIN, 12))
        step = 0.01
        assert abs(grid_measure(report, step) - report.T_measure) <= step * max(1, report.components)
        assert report.T_measure <= report.interval_total() + 1e-12
        chains = lower_bound_chains(report, field, mu_ref.mu_upper)
        assert chains.count_holds
        assert chains.interval_holds


# Summability diagnostics

class TestPartialSums:
    def test_hre_deterministic(self, unit_mu):
        result = hre_partial_sum(UNIT, 2, 1.0, 0.2, (2, 4, 8), 3, unit_mu)
        assert [ci.mean for ci in result.sums] == [0.0, 0.0, 0.0]
        assert result.comparison == (0.0, 0.0, 0.0)
        assert result.trend.trend == CONVERGING

    def test_radial_deterministic(self, unit_mu):
        result = radial_sum(UNIT, (1, 0), 2.0, 0.2, (4, 8), 3, unit_mu)
        assert [ci.mean for ci in result.sums] == [0.0, 0.0]
        assert result.uncertified == 0

    def test_checkpoints_must_nest(self, unit_mu):
        with pytest.raises(ValueError):
            radial_sum(UNIT, (1, 0), 1.0, 0.2, (8, 4), 3, unit_mu)
        with pytest.raises(ValueError):
            hre_partial_sum(UNIT, 2, 0.0, 0.2, (2, 4), 3, unit_mu)

    def test_radial_sums_are_nondecreasing(self):
        mu_ref = _estimated(0.35)
        result = radial_sum(DistributionSpec.uniform(), (1, 0), 1.0, 0.1, (5, 10, 20), 10, mu_ref, master_seed=8)
        means = [ci.mean for ci in result.sums]
        assert means == sorted(means)
        assert all(inc >= 0 for inc in result.trend.increments)

    def test_lp_error_deterministic(self, unit_mu):
        rows = lp_error(UNIT, 2.0, [(3, 0), (2, 2)], 3, unit_mu)
        assert [row.moment.mean for row in rows] == [0.0, 0.0]


# Point-to-shape

class TestPointToShape:
    def test_unit_ratios(self, unit_field, unit_mu):
        hits = point_to_shape(unit_field, (10, 20, 40), unit_mu, Box(ORIGIN, 45))
        assert [h.n for h in hits] == [10, 20, 40]
        assert [h.time for h in hits] == [11.0, 21.0, 41.0]
        assert [h.ratio for h in hits] == [1.1, 21 / 20, 41 / 40]
        assert all(h.exact for h in hits)

    def test_degenerate_mu(self, unit_field):
        flat = MuEstimate(2, 1, (FanEntry((1, 0), 0.0, 0.0),), EXACT)
        with pytest.raises(MuDegenerateError):
            point_to_shape(unit_field, (5,), flat, Box(ORIGIN, 10))

    def test_n_must_be_positive(self, unit_field, unit_mu):
        with pytest.raises(ValueError):
            point_to_shape(unit_field, (0, 5), unit_mu, Box(ORIGIN, 10))

    def test_replicas(self, unit_mu):
        rows = point_to_shape_replicas(UNIT, 2, (10, 20), unit_mu, 3)
        assert [row.ratio.mean for row in rows] == pytest.approx([1.1, 1.05])
        assert all(row.uncertified == 0 for row in rows)


# Y records

class TestYRecords:
    def test_unit_field_has_no_records(self, unit_field):
        assert y_record_scan(unit_field, 0.5, Box(ORIGIN, 8)).records == ()

    def test_spike_record(self, unit_field, unit_mu):
        field = _spike(unit_field, (4, 0), 10.0)
        scan = y_record_scan(field, 2.0, Box(ORIGIN, 8), unit_mu, 0.5)
        assert scan.records == (4,)
        assert scan.sup == 4
        assert scan.certificate_checked == 1
        assert scan.certificate_holds


# Supplementary checks

def test_annulus_deterministic(unit_mu):
    rows, fit = annulus_crossing(UNIT, 2, (2, 4), 0.5, 0.2, unit_mu, 5)
    assert [(r.m, r.ell) for r in rows] == [(2, 1), (4, 2)]
    assert all(r.block.k == 0 for r in rows)
    assert fit is None


def test_lattice_round():
    assert lattice_round((2.5, -1.5)) == (3, -2)
    assert lattice_round((0.4, -0.4)) == (0, 0)


def test_off_lattice_deterministic(unit_mu):
    rows, mu_x, bound = off_lattice_limit(UNIT, (0.5, 0.25), (4, 8), 3, unit_mu)
    assert [row.ratio.mean for row in rows] == [0.75, 0.75]
    assert [row.target for row in rows] == [(2, 1), (4, 2)]
    assert mu_x == 0.75
    assert bound >= 0.0
