"""
Tests for fpp_lab/run_logging.py
"""

import json
import logging

from fpp_lab.run_logging import RUN_LOG_FILE, RunLogEntry, RunLogger


class TestRunLogEntry:

    def test_to_dict(self):
        entry = RunLogEntry(
            correlation_id='abc',
            timestamp='2025-01-15T00:00:00+00:00',
            event_type='run_start',
            severity='INFO',
            action='mu',
            result='STARTED',
            details={'replicas': 4},
        )
        data = entry.to_dict()
        assert data['event_type'] == 'run_start'
        assert data['details'] == {'replicas': 4}


class TestRunLogger:

    def test_generates_correlation_id(self):
        assert RunLogger().correlation_id != RunLogger().correlation_id

    def test_keeps_given_correlation_id(self):
        assert RunLogger('batch-7').correlation_id == 'batch-7'

    def test_events_are_recorded(self):
        run_logger = RunLogger('cid')
        run_logger.log_run_start('mu', replicas=4, threads=2, master_seed=9)
        run_logger.log_validation('params', True)
        run_logger.log_replicas_complete('mu', replicas=4, seconds=0.12345)
        run_logger.log_run_complete('mu', '/tmp/out', 0)

        types = [e.event_type for e in run_logger.log_entries]
        assert types == ['run_start', 'validation', 'replica_complete', 'run_complete']
        assert run_logger.log_entries[0].details == {'replicas': 4, 'threads': 2, 'master_seed': 9}
        assert run_logger.log_entries[2].details['seconds'] == 0.123
        assert all(e.correlation_id == 'cid' for e in run_logger.log_entries)

    def test_failed_validation_is_error(self):
        run_logger = RunLogger()
        run_logger.log_validation('params', False, {'error': 'too few replicas'})
        entry = run_logger.log_entries[0]
        assert entry.severity == 'ERROR'
        assert entry.result == 'FAIL'

    def test_censoring_over_limit_warns(self):
        run_logger = RunLogger()
        run_logger.log_censoring(0.01, 0.05)
        run_logger.log_censoring(0.2, 0.05)
        assert [e.result for e in run_logger.log_entries] == ['OK', 'OVER_LIMIT']
        assert [e.severity for e in run_logger.log_entries] == ['INFO', 'WARNING']

    def test_failure_details(self):
        run_logger = RunLogger()
        run_logger.log_failure('tails', ValueError("bad grid"))
        details = run_logger.log_entries[0].details
        assert details == {'error_type': 'ValueError', 'message': 'bad grid'}

    def test_summary_counts(self):
        run_logger = RunLogger()
        run_logger.log_validation('params', True)
        run_logger.log_validation('window', False)
        run_logger.log_censoring(0.0, 0.05)
        summary = run_logger.get_summary()
        assert summary['total_events'] == 3
        assert summary['by_type'] == {'validation': 2, 'censoring': 1}
        assert summary['by_severity'] == {'INFO': 2, 'ERROR': 1}
        assert summary['by_result'] == {'PASS': 1, 'FAIL': 1, 'OK': 1}

    def test_emits_python_log_records(self, caplog):
        run_logger = RunLogger('cid')
        with caplog.at_level(logging.INFO, logger='fpp_lab.run_logging'):
            run_logger.log_run_start('mu', 4, 1, 0)
        assert "[cid] run_start: mu - STARTED" in caplog.text
        assert caplog.records[0].run_log['event_type'] == 'run_start'

    def test_save(self, tmp_path):
        run_logger = RunLogger('cid')
        run_logger.log_run_start('mu', 4, 1, 0)
        path = run_logger.save(tmp_path / 'nested')
        assert path == tmp_path / 'nested' / RUN_LOG_FILE
        data = json.loads(path.read_text(encoding='utf-8'))
        assert data['summary']['correlation_id'] == 'cid'
        assert data['events'][0]['action'] == 'mu'
