"""
Per-experiment collectors and summaries.

A collector turns a config into mergeable report rows (and optional
JSON-lines artifacts). Replicas go through `mapper`, which the runner
binds to a worker pool; each replica only depends on
(master_seed, replica index), so the rows do not depend on the pool size.

A summary recomputes the derived values (fits, trends, bounds) from the
rows and the config alone, so a merged report is summarized exactly like a
fresh one.
"""

import logging
import math
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from fpp_lab.catalog import EXPERIMENTS
from fpp_lab.config import ExperimentConfig
from fpp_lab.deviations import (
    ESTIMATED,
    EXACT,
    MIN_REPLICAS,
    MuEstimate,
    annulus_crossing,
    comparison_series,
    deviation_sets,
    estimate_mu,
    estimate_mu_fan,
    extend_mu,
    grid_measure,
    hre_partial_sum,
    lower_bound_chains,
    lp_error,
    off_lattice_limit,
    point_to_shape_replicas,
    radial_sum,
    tail_above,
    tail_below,
    y_record_scan,
)
from fpp_lab.errors import (
    ConfigError,
    InvalidExponentsError,
    NoRegenerationError,
    NoWhiteWitnessError,
    UnreachableError,
    WindowTooSmallError,
)
from fpp_lab.lattice import Box, Point, l1_norm, linf_norm, origin, scale, unit
from fpp_lab.regen import (
    RegenerationTrace,
    cylinder_tail_check,
    estimate_regen_constants,
    scan_regenerations,
    tube_constant_sweep,
)
from fpp_lab.reports import Report, ReportRow, row
from fpp_lab.shells import (
    Coloring,
    build_shell,
    shell_properties,
    shell_to_json,
    shell_travel_time,
    shells_separate,
)
from fpp_lab.stats import StatBlock, increment_trend, log_linear_fit, log_log_fit
from fpp_lab.weights import WeightField, derive_seed, min_moment_rhs, min_moment_samples, quantile_tbar, y_survival

logger = logging.getLogger(__name__)

Mapper = Callable[..., Iterable[Any]]
Rows = List[ReportRow]
Artifacts = Dict[str, Tuple[str, ...]]
Collected = Tuple[Rows, Artifacts]

# Experiments whose replica count is bounded below for stochastic weights
_MIN_REPLICA_EXPERIMENTS = ('mu', 'tube-sweep')
_REFERENCE_EXPERIMENTS = tuple(
    name for name, info in EXPERIMENTS.items() if 'mu_replicas' in info['defaults']
)


def _point(value: Sequence[Any]) -> Point:
    return tuple(int(c) for c in value)


def _ints(values: Sequence[Any]) -> Tuple[int, ...]:
    return tuple(int(v) for v in values)


def _floats(values: Sequence[Any]) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


def _censored(k: int, n: int) -> ReportRow:
    return row('censored', '', StatBlock.proportion(k, n))


def _reduced(z: Point) -> Point:
    g = 0
    for c in z:
        g = math.gcd(g, abs(c))
    return tuple(c // g for c in z) if g > 1 else z


def _estimates(report: Report, metric: str) -> List[float]:
    return [r.block.estimate for r in report.blocks(metric)]


def _fit_dict(fit: Any) -> Optional[Dict[str, Any]]:
    return fit.to_dict() if fit is not None else None


def check_params(config: ExperimentConfig) -> None:
    """
    Cross-field checks the config loader cannot make on its own.

    Raises:
        ConfigError: If replica counts are too small for the experiment
    """
    stochastic = not config.distribution.is_deterministic
    name = config.experiment
    if stochastic and name in _MIN_REPLICA_EXPERIMENTS and config.replicas < MIN_REPLICAS:
        raise ConfigError(f"'{name}' needs at least {MIN_REPLICAS} replicas, got {config.replicas}")
    if stochastic and name == 'regen':
        need = int(config.thresholds.get('regen.min_traces', MIN_REPLICAS))
        if config.replicas < need:
            raise ConfigError(f"'regen' needs at least {need} traces, got {config.replicas}")
    if stochastic and name in _REFERENCE_EXPERIMENTS and int(config.param('mu_replicas')) < MIN_REPLICAS:
        raise ConfigError(f"mu_replicas must be at least {MIN_REPLICAS}")
    if name == 'shells':
        reach = linf_norm(_shell_partner(config))
        if reach >= config.window_radius:
            raise ConfigError(f"pair_offset reaches {reach}, outside window radius {config.window_radius}")
    if name == 'tails' and config.param('side') not in ('below', 'above', 'both'):
        raise ConfigError(f"side must be below, above or both, got {config.param('side')!r}")
    if name == 'min-moment':
        K, L = int(config.param('K')), int(config.param('L'))
        alpha, beta = float(config.param('alpha')), float(config.param('beta'))
        if beta * K > alpha * L:
            raise InvalidExponentsError(f"beta*K = {beta * K} exceeds alpha*L = {alpha * L}")


# Reference time constant

def fan_reference(config: ExperimentConfig, mapper: Mapper = map) -> MuEstimate:
    """μ over the fan |y| = fan_norm, from an independent stream seeded by mu_seed."""
    spec = config.distribution
    if spec.is_deterministic:
        return MuEstimate.exact_deterministic(spec, config.dimension)
    return estimate_mu_fan(
        spec, config.dimension,
        N=int(config.param('fan_norm')),
        n=int(config.param('fan_n')),
        replicas=int(config.param('mu_replicas')),
        master_seed=int(config.param('mu_seed')),
        confidence=config.confidence,
        mapper=mapper,
    )


def point_reference(config: ExperimentConfig, z: Point, mapper: Mapper = map) -> MuEstimate:
    """μ along the primitive direction of z."""
    spec = config.distribution
    if spec.is_deterministic:
        return MuEstimate.exact_deterministic(spec, config.dimension)
    point = estimate_mu(
        spec, _reduced(z),
        n_grid=_ints(config.param('mu_n_grid')),
        replicas=int(config.param('mu_replicas')),
        master_seed=int(config.param('mu_seed')),
        confidence=config.confidence,
        mapper=mapper,
    )
    return MuEstimate.from_point(point)


# Collectors

def collect_mu(config: ExperimentConfig, mapper: Mapper) -> Collected:
    z = _point(config.param('z'))
    point = estimate_mu(
        config.distribution, z, _ints(config.param('n_grid')), config.replicas,
        config.master_seed, config.confidence, mapper,
    )
    rows = [row('ratio', f"n={n}", b) for n, b in zip(point.n_grid, point.blocks)]
    trials = config.replicas * len(point.n_grid)
    rows.append(_censored(trials - round(point.certified_fraction * trials), trials))
    return rows, {}


def summarize_mu(report: Report) -> Dict[str, Any]:
    config = report.config
    z = _point(config.param('z'))
    ratios = report.blocks('ratio')
    last = ratios[-1].block
    lower, upper = last.interval(config.confidence)
    return {
        'mu_hat': last.estimate,
        'mu_per_unit': last.estimate / l1_norm(z),
        'lower': lower,
        'upper': upper,
        'exactness': EXACT if config.distribution.is_deterministic else ESTIMATED,
        'per_n': {r.key: r.block.estimate for r in ratios},
    }


def collect_tails(config: ExperimentConfig, mapper: Mapper) -> Collected:
    z = _point(config.param('z'))
    eps = float(config.param('epsilon'))
    xs = _floats(config.param('x_grid'))
    side = config.param('side')
    mu_ref = point_reference(config, z, mapper)
    rows: Rows = []
    certified = config.replicas
    if side in ('below', 'both'):
        below = tail_below(config.distribution, z, eps, xs, config.replicas, mu_ref, config.master_seed, mapper)
        rows += [row('below', f"x={x!r}", b) for x, b in zip(xs, below.blocks)]
        certified = below.certified
    if side in ('above', 'both'):
        above = tail_above(config.distribution, z, eps, xs, config.replicas, mu_ref, config.master_seed, mapper)
        rows += [row('above', f"x={x!r}", b) for x, b in zip(xs, above.blocks)]
        rows += [row('dominance', f"x={x!r}", b) for x, b in zip(xs, above.dominance)]
        certified = above.certified
    rows.append(_censored(config.replicas - certified, config.replicas))
    return rows, {}


def summarize_tails(report: Report) -> Dict[str, Any]:
    config = report.config
    spec = config.distribution
    d = config.dimension
    xs = _floats(config.param('x_grid'))
    summary: Dict[str, Any] = {'x_grid': list(xs)}
    below = _estimates(report, 'below')
    if below:
        summary['below'] = {'probabilities': below, 'fit': _fit_dict(log_linear_fit(xs, below))}
    above = _estimates(report, 'above')
    if above:
        fit = log_log_fit(xs, above)
        entry: Dict[str, Any] = {
            'probabilities': above,
            'fit': _fit_dict(fit),
            'y_curves': {str(c): [y_survival(spec, d, x / c) for x in xs] for c in (1, 2, 4)},
            'dominance': _estimates(report, 'dominance'),
        }
        if spec.kind == 'pareto':
            expected = -2.0 * d * spec.a
            tolerance = float(config.thresholds.get('tails.slope_tolerance'))
            entry['expected_slope'] = expected
            entry['slope_within_tolerance'] = fit is not None and abs(fit.slope - expected) <= tolerance
        summary['above'] = entry
    return summary


def _shell_partner(config: ExperimentConfig) -> Point:
    offset = config.param('pair_offset')
    return _point(offset) if offset is not None else scale(6, unit(config.dimension, 0))


def _shell_replica(config: ExperimentConfig, k: int) -> Dict[str, Any]:
    d = config.dimension
    spec = config.distribution
    delta = float(config.param('delta'))
    y = origin(d)
    z = _shell_partner(config)
    window = Box(origin(d), config.window_radius)
    field = WeightField(derive_seed(config.master_seed, k, "shells"), spec, d)
    coloring = Coloring(field, quantile_tbar(spec, delta))

    shells = []
    for center in (y, z):
        try:
            shells.append(build_shell(field, center, delta, window, coloring))
        except NoWhiteWitnessError:
            logger.warning(f"Replica {k}: no white witness around {center}")
            shells.append(None)

    complete = [s for s in shells if s is not None and s.complete]
    result: Dict[str, Any] = {
        'complete': len(complete),
        'properties': [shell_properties(s, coloring, window).ok for s in complete],
        'diameters': [s.diameter for s in complete],
        'comparison': None,
        'separate': None,
        'lines': [shell_to_json(s) for s in complete],
    }
    if len(complete) == 2:
        sy, sz = complete
        try:
            result['comparison'] = shell_travel_time(field, sy, sz, window).holds
        except (WindowTooSmallError, UnreachableError):
            logger.warning(f"Replica {k}: shell comparison censored by the window")
        result['separate'] = shells_separate(sy, sz, window)
    return result


def collect_shells(config: ExperimentConfig, mapper: Mapper) -> Collected:
    results = list(mapper(lambda k: _shell_replica(config, k), range(config.replicas)))
    built = 2 * config.replicas
    complete = sum(r['complete'] for r in results)
    diameters = [dm for r in results for dm in r['diameters']]
    comparisons = [r['comparison'] for r in results if r['comparison'] is not None]
    separations = [r['separate'] for r in results if r['separate'] is not None]
    rows: Rows = [
        row('complete', '', StatBlock.proportion(complete, built)),
        row('properties', '', StatBlock.from_indicators(ok for r in results for ok in r['properties'])),
        row('diameter', '', StatBlock.from_values(diameters)),
    ]
    for kk in _ints(config.param('k_grid')):
        rows.append(row('diameter_tail', f"k={kk}", StatBlock.from_indicators(dm > kk for dm in diameters)))
    rows.append(row('comparison', '', StatBlock.from_indicators(comparisons)))
    rows.append(row('separation', '', StatBlock.from_indicators(separations)))
    rows.append(_censored(built - complete, built))
    return rows, {'shells.jsonl': tuple(line for r in results for line in r['lines'])}


def summarize_shells(report: Report) -> Dict[str, Any]:
    ks = _ints(report.config.param('k_grid'))
    tail = _estimates(report, 'diameter_tail')
    fit = log_linear_fit(ks, tail)
    blocks = {m: report.block(m) for m in ('complete', 'properties', 'diameter', 'comparison', 'separation')}
    return {
        'completion_rate': blocks['complete'].estimate,
        'properties_rate': blocks['properties'].estimate,
        'mean_diameter': blocks['diameter'].estimate,
        'comparison_rate': blocks['comparison'].estimate,
        'separation_rate': blocks['separation'].estimate,
        'diameter_tail': dict(zip([f"k={k}" for k in ks], tail)),
        'diameter_tail_fit': _fit_dict(fit),
        'tbar': quantile_tbar(report.config.distribution, float(report.config.param('delta'))),
    }


def _regen_tbar(config: ExperimentConfig) -> float:
    return quantile_tbar(config.distribution, 1.0 - float(config.param('tbar_quantile')))


def collect_regen(config: ExperimentConfig, mapper: Mapper) -> Collected:
    d = config.dimension
    z = _point(config.param('z'))
    r = float(config.param('r'))
    m_max = int(config.param('m_max'))
    with_full = bool(config.param('with_full_time'))
    tbar = _regen_tbar(config)

    def one(k: int) -> Optional[RegenerationTrace]:
        field = WeightField(derive_seed(config.master_seed, k, "regen"), config.distribution, d)
        try:
            return scan_regenerations(field, z, r, tbar, m_max, with_full_time=with_full)
        except NoRegenerationError:
            return None

    results = list(mapper(one, range(config.replicas)))
    traces = [t for t in results if t is not None]
    rows: Rows = [
        row('segment', '', StatBlock.from_values(s for t in traces for s in t.segment_times)),
        row('increment', '', StatBlock.from_values(i for t in traces for i in t.increments)),
        row('regeneration', '', StatBlock.proportion(
            sum(t.regenerations_within for t in traces), sum(t.m_max for t in traces))),
    ]
    if with_full:
        rows.append(row('full_time_ratio', '', StatBlock.from_values(t.full_time / m_max for t in traces)))
        sandwiches = []
        for t in traces:
            if t.rho[-1] > m_max:
                lower, upper = t.sandwich_bounds(m_max)
                sandwiches.append(lower <= t.full_time <= upper)
        rows.append(row('sandwich', '', StatBlock.from_indicators(sandwiches)))
    rows.append(_censored(len(results) - len(traces), len(results)))
    return rows, {'traces.jsonl': tuple(t.to_json_line() for t in traces)}


def summarize_regen(report: Report) -> Dict[str, Any]:
    config = report.config
    increment = report.block('increment')
    summary: Dict[str, Any] = {
        'tbar': _regen_tbar(config),
        'mean_increment': increment.estimate,
        'mean_increment_interval': list(increment.interval(config.confidence)),
        'regeneration_rate': report.block('regeneration').estimate,
    }
    sandwich = report.block('sandwich')
    if sandwich is not None:
        summary['sandwich_rate'] = sandwich.estimate
    lines = report.artifacts.get('traces.jsonl', ())
    min_traces = int(config.thresholds.get('regen.min_traces'))
    if len(lines) >= min_traces:
        estimate = estimate_regen_constants(
            [RegenerationTrace.from_json_line(line) for line in lines], config.confidence, min_traces,
        )
        summary['estimate'] = estimate.to_dict()
        summary['sandwich_contains'] = estimate.sandwich_contains(float(config.thresholds.get('regen.ci_widths')))
    return summary


def collect_deviation_sets(config: ExperimentConfig, mapper: Mapper) -> Collected:
    d = config.dimension
    eps = float(config.param('epsilon'))
    step = float(config.param('grid_step'))
    mu_ref = fan_reference(config, mapper)
    window = Box(origin(d), config.window_radius)

    def one(k: int) -> Tuple[float, ...]:
        field = WeightField(derive_seed(config.master_seed, k, "deviation-sets"), config.distribution, d)
        report = deviation_sets(field, eps, mu_ref, window)
        chains = lower_bound_chains(report, field, mu_ref.mu_upper)
        grid = grid_measure(report, step)
        agrees = abs(grid - report.T_measure) <= step * max(1, report.components)
        return (report.Z_size, report.sup_Z, report.T_measure, report.sup_T, report.components,
                agrees, chains.count_holds, chains.interval_holds, report.censored)

    results = list(mapper(one, range(config.replicas)))
    columns = list(zip(*results))
    rows: Rows = [
        row(name, '', StatBlock.from_values(float(v) for v in columns[j]))
        for j, name in enumerate(('Z_size', 'sup_Z', 'T_measure', 'sup_T', 'components'))
    ]
    for j, name in enumerate(('grid_agreement', 'count_chain', 'interval_chain'), start=5):
        rows.append(row(name, '', StatBlock.from_indicators(columns[j])))
    rows.append(_censored(sum(columns[8]), config.replicas))
    return rows, {}


def summarize_deviation_sets(report: Report) -> Dict[str, Any]:
    summary: Dict[str, Any] = {
        name: report.block(name).estimate
        for name in ('Z_size', 'sup_Z', 'T_measure', 'sup_T', 'components',
                     'grid_agreement', 'count_chain', 'interval_chain')
    }
    summary['mu_exactness'] = EXACT if report.config.distribution.is_deterministic else ESTIMATED
    return summary


def collect_hre_sum(config: ExperimentConfig, mapper: Mapper) -> Collected:
    radii = _ints(config.param('radii'))
    sums = hre_partial_sum(
        config.distribution, config.dimension,
        alpha=float(config.param('alpha')),
        epsilon=float(config.param('epsilon')),
        radii=radii,
        replicas=config.replicas,
        mu_ref=fan_reference(config, mapper),
        master_seed=config.master_seed,
        confidence=config.confidence,
        threshold=float(config.thresholds.get('trend.increment_ratio')),
        big_m=float(config.param('big_m')),
        mapper=mapper,
    )
    rows = [row('partial_sum', f"R={r}", b) for r, b in zip(radii, sums.blocks)]
    rows.append(_censored(sums.uncertified, config.replicas))
    return rows, {}


def _summarize_sums(report: Report, limits: Sequence[int], big_m: float) -> Dict[str, Any]:
    config = report.config
    means = _estimates(report, 'partial_sum')
    trend = increment_trend(means, float(config.thresholds.get('trend.increment_ratio')))
    alpha = float(config.param('alpha'))
    return {
        'partial_sums': means,
        'trend': trend.to_dict(),
        'comparison': [comparison_series(config.distribution, config.dimension, alpha, big_m, n) for n in limits],
    }


def summarize_hre_sum(report: Report) -> Dict[str, Any]:
    return _summarize_sums(report, _ints(report.config.param('radii')), float(report.config.param('big_m')))


def collect_radial_sum(config: ExperimentConfig, mapper: Mapper) -> Collected:
    z = _point(config.param('z'))
    checkpoints = _ints(config.param('checkpoints'))
    sums = radial_sum(
        config.distribution, z,
        alpha=float(config.param('alpha')),
        epsilon=float(config.param('epsilon')),
        checkpoints=checkpoints,
        replicas=config.replicas,
        mu_ref=point_reference(config, z, mapper),
        master_seed=config.master_seed,
        confidence=config.confidence,
        threshold=float(config.thresholds.get('trend.increment_ratio')),
        mapper=mapper,
    )
    rows = [row('partial_sum', f"N={n}", b) for n, b in zip(checkpoints, sums.blocks)]
    rows.append(_censored(sums.uncertified, config.replicas))
    return rows, {}


def summarize_radial_sum(report: Report) -> Dict[str, Any]:
    return _summarize_sums(report, _ints(report.config.param('checkpoints')), 1.0)


def collect_lp(config: ExperimentConfig, mapper: Mapper) -> Collected:
    zs = [_point(z) for z in config.param('z_grid')]
    rows_lp = lp_error(
        config.distribution, float(config.param('p')), zs, config.replicas,
        fan_reference(config, mapper), config.master_seed, config.confidence, mapper,
    )
    return [row('moment', f"z={list(r.point)}", StatBlock.from_values(r.samples)) for r in rows_lp], {}


def summarize_lp(report: Report) -> Dict[str, Any]:
    return {'p': float(report.config.param('p')),
            'moments': {r.key: r.block.estimate for r in report.blocks('moment')}}


def collect_point_to_shape(config: ExperimentConfig, mapper: Mapper) -> Collected:
    ns = _ints(config.param('n_grid'))
    shape_rows = point_to_shape_replicas(
        config.distribution, config.dimension, ns, fan_reference(config, mapper),
        config.replicas, config.master_seed, config.confidence, mapper,
    )
    rows: Rows = []
    for r in shape_rows:
        rows.append(row('ratio', f"n={r.n}", StatBlock.from_values(r.samples)))
        rows.append(row('error', f"n={r.n}", StatBlock.from_values(abs(x - 1) for x in r.samples)))
    uncertified = sum(r.uncertified for r in shape_rows)
    rows.append(_censored(uncertified, config.replicas * len(shape_rows)))
    return rows, {}


def summarize_point_to_shape(report: Report) -> Dict[str, Any]:
    errors = _estimates(report, 'error')
    return {
        'ratios': {r.key: r.block.estimate for r in report.blocks('ratio')},
        'errors': {r.key: r.block.estimate for r in report.blocks('error')},
        'error_decreasing': all(b < a for a, b in zip(errors, errors[1:])),
    }


def collect_tube_sweep(config: ExperimentConfig, mapper: Mapper) -> Collected:
    radii = _floats(config.param('radii'))
    tube = tube_constant_sweep(
        config.distribution, _point(config.param('z')), radii, int(config.param('n')),
        config.replicas, config.master_seed, config.confidence, mapper,
    )
    rows = [row('tube', f"r={r!r}", StatBlock.from_values(s)) for r, s in zip(radii, tube.samples)]
    rows.append(row('unrestricted', '', StatBlock.from_values(tube.free_samples)))
    rows.append(row('monotone', '', StatBlock.proportion(tube.monotone_realizations, tube.replicas)))
    rows.append(_censored(tube.replicas - tube.certified, tube.replicas))
    return rows, {}


def summarize_tube_sweep(report: Report) -> Dict[str, Any]:
    config = report.config
    widths = float(config.thresholds.get('regen.ci_widths'))
    free = report.block('unrestricted')
    tubes = report.blocks('tube')
    gaps = [r.block.estimate - free.estimate for r in tubes]
    slack = [widths * r.block.half_width(config.confidence) for r in tubes]
    shrinks = all(b <= a + s for a, b, s in zip(gaps, gaps[1:], slack[1:]))
    return {
        'tube_constants': {r.key: r.block.estimate for r in tubes},
        'unrestricted': free.estimate,
        'gaps': gaps,
        'gap_shrinks': shrinks,
        'monotone_rate': report.block('monotone').estimate,
    }


def collect_y_records(config: ExperimentConfig, mapper: Mapper) -> Collected:
    d = config.dimension
    beta = float(config.param('beta'))
    eps = config.param('epsilon')
    mu_ref = fan_reference(config, mapper) if eps is not None else None
    window = Box(origin(d), config.window_radius)

    def one(k: int) -> Tuple[int, int, int, bool]:
        field = WeightField(derive_seed(config.master_seed, k, "y-records"), config.distribution, d)
        scan = y_record_scan(field, beta, window, mu_ref, float(eps) if eps is not None else None)
        return scan.sup, len(scan.records), scan.certificate_checked, scan.certificate_holds

    results = list(mapper(one, range(config.replicas)))
    rows: Rows = [
        row('sup', '', StatBlock.from_values(float(r[0]) for r in results)),
        row('records', '', StatBlock.from_values(float(r[1]) for r in results)),
    ]
    if eps is not None:
        rows.append(row('certificate', '', StatBlock.from_indicators(r[3] for r in results if r[2] > 0)))
    return rows, {}


def summarize_y_records(report: Report) -> Dict[str, Any]:
    summary = {'mean_sup': report.block('sup').estimate, 'mean_records': report.block('records').estimate}
    certificate = report.block('certificate')
    if certificate is not None:
        summary['certificate_rate'] = certificate.estimate
    return summary


def collect_annulus(config: ExperimentConfig, mapper: Mapper) -> Collected:
    annulus_rows, _ = annulus_crossing(
        config.distribution, config.dimension, _ints(config.param('m_values')),
        eta=float(config.param('eta')),
        epsilon=float(config.param('epsilon')),
        mu_ref=fan_reference(config, mapper),
        replicas=config.replicas,
        master_seed=config.master_seed,
        mapper=mapper,
    )
    return [row('crossing', f"m={r.m}", r.block) for r in annulus_rows], {}


def summarize_annulus(report: Report) -> Dict[str, Any]:
    ms = _ints(report.config.param('m_values'))
    probabilities = _estimates(report, 'crossing')
    return {'probabilities': probabilities, 'fit': _fit_dict(log_linear_fit(ms, probabilities))}


def collect_cylinder_tail(config: ExperimentConfig, mapper: Mapper) -> Collected:
    xs = _floats(config.param('x_grid'))
    check = cylinder_tail_check(
        config.distribution, _point(config.param('z')), float(config.param('r')), xs,
        config.replicas, config.master_seed, mapper,
    )
    rows = [row('tail', f"x={r.x!r}", r.lhs) for r in check.rows]
    rows.append(_censored(check.replicas - check.certified, check.replicas))
    return rows, {}


def summarize_cylinder_tail(report: Report) -> Dict[str, Any]:
    config = report.config
    d = config.dimension
    norm = l1_norm(_point(config.param('z')))
    xs = _floats(config.param('x_grid'))
    tails = report.blocks('tail')
    rhs = [9 ** (2 * d) * norm * y_survival(config.distribution, d, x) for x in xs]
    violations = [r.block.interval(config.confidence)[0] > bound for r, bound in zip(tails, rhs)]
    return {'lhs': [r.block.estimate for r in tails], 'rhs': rhs, 'any_violation': any(violations)}


def collect_min_moment(config: ExperimentConfig, mapper: Mapper) -> Collected:
    lhs, moment = min_moment_samples(
        config.distribution,
        int(config.param('K')), int(config.param('L')),
        float(config.param('alpha')), float(config.param('beta')),
        int(config.param('N')), config.replicas,
        derive_seed(config.master_seed, 0, "min-moment"),
    )
    return [
        row('lhs', '', StatBlock.from_values(float(v) for v in lhs)),
        row('min_moment', '', StatBlock.from_values(float(v) for v in moment)),
    ], {}


def summarize_min_moment(report: Report) -> Dict[str, Any]:
    config = report.config
    args = (int(config.param('K')), int(config.param('L')),
            float(config.param('alpha')), float(config.param('beta')), int(config.param('N')))
    lhs = report.block('lhs')
    moment = report.block('min_moment')
    lhs_low, _ = lhs.interval(config.confidence)
    _, moment_high = moment.interval(config.confidence)
    if not math.isfinite(lhs_low):
        lhs_low = lhs.estimate
    if not math.isfinite(moment_high):
        moment_high = moment.estimate
    return {
        'lhs': lhs.estimate,
        'min_moment': moment.estimate,
        'rhs': min_moment_rhs(moment.estimate, *args),
        'holds': lhs_low <= min_moment_rhs(moment_high, *args),
    }


def collect_off_lattice(config: ExperimentConfig, mapper: Mapper) -> Collected:
    ns = _ints(config.param('n_grid'))
    x = _floats(config.param('x'))
    off_rows, _, _ = off_lattice_limit(
        config.distribution, x, ns, config.replicas, fan_reference(config, mapper),
        config.master_seed, config.confidence, mapper,
    )
    return [row('ratio', f"n={r.n}", StatBlock.from_values(r.samples)) for r in off_rows], {}


def summarize_off_lattice(report: Report) -> Dict[str, Any]:
    x = _floats(report.config.param('x'))
    ratios = {r.key: r.block.estimate for r in report.blocks('ratio')}
    summary: Dict[str, Any] = {'ratios': ratios}
    if report.config.distribution.is_deterministic:
        reference = MuEstimate.exact_deterministic(report.config.distribution, report.config.dimension)
        summary['mu_x'] = extend_mu(reference, x)
    return summary


COLLECTORS: Mapping[str, Callable[[ExperimentConfig, Mapper], Collected]] = {
    'mu': collect_mu,
    'tails': collect_tails,
    'shells': collect_shells,
    'regen': collect_regen,
    'deviation-sets': collect_deviation_sets,
    'hre-sum': collect_hre_sum,
    'radial-sum': collect_radial_sum,
    'lp': collect_lp,
    'point-to-shape': collect_point_to_shape,
    'tube-sweep': collect_tube_sweep,
    'y-records': collect_y_records,
    'annulus': collect_annulus,
    'cylinder-tail': collect_cylinder_tail,
    'min-moment': collect_min_moment,
    'off-lattice': collect_off_lattice,
}

SUMMARIES: Mapping[str, Callable[[Report], Dict[str, Any]]] = {
    'mu': summarize_mu,
    'tails': summarize_tails,
    'shells': summarize_shells,
    'regen': summarize_regen,
    'deviation-sets': summarize_deviation_sets,
    'hre-sum': summarize_hre_sum,
    'radial-sum': summarize_radial_sum,
    'lp': summarize_lp,
    'point-to-shape': summarize_point_to_shape,
    'tube-sweep': summarize_tube_sweep,
    'y-records': summarize_y_records,
    'annulus': summarize_annulus,
    'cylinder-tail': summarize_cylinder_tail,
    'min-moment': summarize_min_moment,
    'off-lattice': summarize_off_lattice,
}


def collect(config: ExperimentConfig, mapper: Mapper = map) -> Collected:
    logger.info(f"Collecting '{config.experiment}' with {config.replicas} replicas")
    return COLLECTORS[config.experiment](config, mapper)


def summarize(report: Report) -> Dict[str, Any]:
    return SUMMARIES[report.config.experiment](report)
