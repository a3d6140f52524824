"""
Tests for fpp_lab/runner.py and the experiment collectors
"""

import json

import pytest

from fpp_lab.config import ExperimentConfig
from fpp_lab.errors import ConfigError, ConfigMismatchError, InvalidExponentsError
from fpp_lab.experiments import check_params
from fpp_lab.runner import EXIT_CENSORED, EXIT_OK, build_report, merge_dirs, run
from fpp_lab.run_logging import RunLogger


def _config(experiment, params, distribution=None, **top):
    data = {
        'experiment': experiment,
        'dimension': 2,
        'master_seed': 0,
        'replicas': 4,
        'distribution': distribution or {'kind': 'deterministic', 'c': 1.0},
        'params': params,
    }
    data.update(top)
    return ExperimentConfig.from_dict(data)


def _summary(out_dir):
    with open(out_dir / 'summary.json', 'r', encoding='utf-8') as f:
        return json.load(f)


SMALL_EXPONENTIAL_MU = dict(
    experiment='mu',
    params={'z': [1, 1], 'n_grid': [2, 3]},
    distribution={'kind': 'exponential', 'rate': 1.0},
    replicas=30,
    master_seed=17,
)


class TestRun:

    def test_deterministic_mu_is_exact(self, tmp_path):
        result = run(_config('mu', {'z': [1, 0]}), tmp_path)
        summary = _summary(tmp_path)['summary']
        assert summary['mu_hat'] == 1.0
        assert summary['exactness'] == 'exact'
        assert result.exit_code == EXIT_OK
        assert result.censored_fraction == 0.0
        for name in ('results.csv', 'summary.json', 'config.json', 'run_log.json'):
            assert (tmp_path / name).exists()

    def test_config_echo_round_trips(self, tmp_path):
        config = _config('mu', {'z': [1, 0]})
        run(config, tmp_path)
        with open(tmp_path / 'config.json', 'r', encoding='utf-8') as f:
            assert ExperimentConfig.from_dict(json.load(f)) == config

    def test_rerun_is_byte_identical(self, tmp_path):
        config = _config(**SMALL_EXPONENTIAL_MU)
        run(config, tmp_path / 'a')
        run(config, tmp_path / 'b')
        for name in ('results.csv', 'summary.json', 'config.json'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_thread_count_independent(self, tmp_path):
        config = _config(**SMALL_EXPONENTIAL_MU)
        run(config, tmp_path / 'one', threads=1)
        run(config, tmp_path / 'four', threads=4)
        for name in ('results.csv', 'summary.json'):
            assert (tmp_path / 'one' / name).read_bytes() == (tmp_path / 'four' / name).read_bytes()

    def test_build_report_rejects_zero_threads(self):
        with pytest.raises(ValueError):
            build_report(_config('mu', {'z': [1, 0]}), threads=0)

    def test_run_log_records_steps(self, tmp_path):
        run_logger = RunLogger(correlation_id='fixed')
        run(_config('mu', {'z': [1, 0]}), tmp_path, run_logger=run_logger)
        summary = run_logger.get_summary()
        assert summary['correlation_id'] == 'fixed'
        for event in ('validation', 'run_start', 'replica_complete', 'censoring', 'run_complete'):
            assert summary['by_type'][event] == 1

    def test_failure_is_logged_and_raised(self, tmp_path):
        config = _config('mu', {'z': [1, 0]}, distribution={'kind': 'uniform'}, replicas=5)
        run_logger = RunLogger()
        with pytest.raises(ConfigError):
            run(config, tmp_path, run_logger=run_logger)
        assert run_logger.get_summary()['by_type']['run_failed'] == 1
        assert (tmp_path / 'run_log.json').exists()
        assert not (tmp_path / 'results.csv').exists()


class TestStrictCensoring:

    @pytest.fixture
    def censored_config(self):
        # Almost every vertex is black at the median threshold, so no shell completes
        return _config('shells', {'delta': 0.5, 'pair_offset': [2, 0]}, distribution={'kind': 'uniform'},
                       replicas=3, window_radius=4)

    def test_strict_exit_code(self, tmp_path, censored_config):
        result = run(censored_config, tmp_path, strict=True)
        assert result.censored_fraction > 0.05
        assert result.exit_code == EXIT_CENSORED

    def test_lenient_exit_code(self, tmp_path, censored_config):
        assert run(censored_config, tmp_path).exit_code == EXIT_OK


class TestCheckParams:

    def test_too_few_replicas(self):
        config = _config('mu', {'z': [1, 0]}, distribution={'kind': 'uniform'}, replicas=10)
        with pytest.raises(ConfigError, match="at least 30"):
            check_params(config)

    def test_deterministic_needs_no_minimum(self):
        check_params(_config('mu', {'z': [1, 0]}, replicas=1))

    def test_reference_replicas(self):
        config = _config('deviation-sets', {'epsilon': 0.5, 'mu_replicas': 5},
                         distribution={'kind': 'uniform'}, replicas=2)
        with pytest.raises(ConfigError, match="mu_replicas"):
            check_params(config)

    def test_tail_side(self):
        with pytest.raises(ConfigError, match="side"):
            check_params(_config('tails', {'z': [2, 0], 'epsilon': 0.5, 'x_grid': [2.0], 'side': 'left'}))

    def test_shell_pair_outside_window(self):
        config = _config('shells', {'delta': 0.1}, distribution={'kind': 'uniform'}, window_radius=6)
        with pytest.raises(ConfigError, match="window radius"):
            check_params(config)

    def test_min_moment_exponents(self):
        config = _config('min-moment', {'K': 2, 'L': 2, 'alpha': 1.0, 'beta': 2.0},
                         distribution={'kind': 'uniform'})
        with pytest.raises(InvalidExponentsError):
            check_params(config)


class TestCollectors:
    """Each experiment end to end, on constant weights where the answer is known."""

    def test_deviation_sets_empty_for_constant_weights(self, tmp_path):
        result = run(_config('deviation-sets', {'epsilon': 0.5}, window_radius=6), tmp_path)
        assert result.summary['Z_size'] == 0.0
        assert result.summary['T_measure'] == 0.0
        assert result.summary['count_chain'] == 1.0
        assert result.summary['mu_exactness'] == 'exact'

    def test_tails_vanish_for_constant_weights(self, tmp_path):
        result = run(_config('tails', {'z': [3, 0], 'epsilon': 0.5, 'x_grid': [3.0, 4.0]}), tmp_path)
        assert result.summary['below']['probabilities'] == [0.0, 0.0]
        assert result.summary['above']['probabilities'] == [0.0, 0.0]
        assert result.summary['above']['dominance'] == [0.0, 0.0]

    def test_point_to_shape_constant(self, tmp_path):
        result = run(_config('point-to-shape', {'n_grid': [4, 8]}), tmp_path)
        assert result.summary['ratios'] == {'n=4': 1.25, 'n=8': 1.125}
        assert result.summary['error_decreasing'] is True

    def test_hre_sum_zero_for_constant_weights(self, tmp_path):
        result = run(_config('hre-sum', {'alpha': 1.0, 'epsilon': 0.5, 'radii': [2, 4]}), tmp_path)
        assert result.summary['partial_sums'] == [0.0, 0.0]

    def test_radial_sum_zero_for_constant_weights(self, tmp_path):
        params = {'z': [1, 0], 'alpha': 1.0, 'epsilon': 0.5, 'checkpoints': [2, 4]}
        result = run(_config('radial-sum', params), tmp_path)
        assert result.summary['partial_sums'] == [0.0, 0.0]

    def test_lp_zero_for_constant_weights(self, tmp_path):
        result = run(_config('lp', {'p': 2.0, 'z_grid': [[2, 0], [1, 1]]}), tmp_path)
        assert result.summary['moments'] == {'z=[2, 0]': 0.0, 'z=[1, 1]': 0.0}

    def test_y_records_constant(self, tmp_path):
        # Y = 1 everywhere, so the records are the even n with 0.1 n < 1
        result = run(_config('y-records', {'beta': 0.1}, window_radius=12), tmp_path)
        assert result.summary['mean_sup'] == 8.0
        assert result.summary['mean_records'] == 4.0

    def test_off_lattice_constant(self, tmp_path):
        result = run(_config('off-lattice', {'x': [0.5, 0.25], 'n_grid': [4, 8]}), tmp_path)
        assert result.summary['ratios'] == {'n=4': 0.75, 'n=8': 0.75}
        assert result.summary['mu_x'] == 0.75

    def test_regen_writes_traces(self, tmp_path):
        params = {'z': [1, 0], 'r': 1.0, 'm_max': 8}
        result = run(_config('regen', params, distribution={'kind': 'uniform'}, replicas=30), tmp_path)
        lines = (tmp_path / 'traces.jsonl').read_text(encoding='utf-8').splitlines()
        assert len(lines) == 30 - result.report.block('censored').k
        assert result.summary['sandwich_rate'] == 1.0
        assert result.summary['mean_increment'] >= 1.0

    def test_min_moment_holds(self, tmp_path):
        params = {'K': 1, 'L': 2, 'alpha': 1.0, 'beta': 1.0, 'N': 2}
        result = run(_config('min-moment', params, distribution={'kind': 'uniform'}, replicas=2000), tmp_path)
        assert result.summary['holds'] is True


class TestMergeDirs:

    def test_merge_two_seeds(self, tmp_path):
        base = dict(SMALL_EXPONENTIAL_MU)
        run(_config(**base), tmp_path / 'a')
        run(_config(**{**base, 'master_seed': 18}), tmp_path / 'b')
        result = merge_dirs([tmp_path / 'b', tmp_path / 'a'], tmp_path / 'merged')
        summary = _summary(tmp_path / 'merged')
        assert summary['seeds'] == [17, 18]
        assert summary['replicas'] == 60
        assert summary['master_seed'] == 17
        assert result.report.block('ratio', 'n=3').n == 60

    def test_merge_order_independent(self, tmp_path):
        base = dict(SMALL_EXPONENTIAL_MU)
        run(_config(**base), tmp_path / 'a')
        run(_config(**{**base, 'master_seed': 18}), tmp_path / 'b')
        merge_dirs([tmp_path / 'a', tmp_path / 'b'], tmp_path / 'ab')
        merge_dirs([tmp_path / 'b', tmp_path / 'a'], tmp_path / 'ba')
        for name in ('results.csv', 'summary.json', 'config.json'):
            assert (tmp_path / 'ab' / name).read_bytes() == (tmp_path / 'ba' / name).read_bytes()

    def test_merge_mismatch(self, tmp_path):
        run(_config('mu', {'z': [1, 0]}), tmp_path / 'a')
        run(_config('mu', {'z': [0, 1]}), tmp_path / 'b')
        with pytest.raises(ConfigMismatchError):
            merge_dirs([tmp_path / 'a', tmp_path / 'b'], tmp_path / 'out')
