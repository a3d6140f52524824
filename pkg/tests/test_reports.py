"""
Tests for fpp_lab/reports.py - result rows, persistence and merging
"""

import csv
import io
import json
import math
import re
from pathlib import Path

import pytest

from fpp_lab.config import ExperimentConfig
from fpp_lab.errors import ConfigError, ConfigMismatchError
from fpp_lab.reports import (
    RESULT_COLUMNS,
    SCHEMA_VERSION,
    Report,
    ReportRow,
    censored_fraction,
    json_safe,
    load_report,
    merge,
    row,
    write_report,
)
from fpp_lab.stats import StatBlock

SCHEMA_DOC = Path(__file__).resolve().parent.parent / 'Documentation' / 'OUTPUT_SCHEMA.md'


def _config(master_seed=0, replicas=100, **params):
    return ExperimentConfig.from_dict({
        'experiment': 'mu',
        'dimension': 2,
        'master_seed': master_seed,
        'replicas': replicas,
        'distribution': {'kind': 'uniform'},
        'params': {'z': [1, 0], **params},
    })


def _report(master_seed, k, values, artifacts=None):
    rows = (
        row('hit', '', StatBlock.proportion(k, 100)),
        row('ratio', 'n=4', StatBlock.from_values(values)),
        row('censored', '', StatBlock.proportion(1, 100)),
    )
    return Report(_config(master_seed), rows, (master_seed,), artifacts or {})


@pytest.fixture
def three_reports():
    return [
        _report(1, 30, [0.5, 0.625, 0.75]),
        _report(2, 40, [0.25, 1.5]),
        _report(3, 35, [0.1, 0.2, 0.3, 0.4]),
    ]


class TestReportRow:

    def test_proportion_fields(self):
        fields = row('hit', 'x=1.0', StatBlock.proportion(3, 10)).csv_fields('tails')
        assert fields[:7] == ['tails', 'hit', 'x=1.0', 'proportion', '10', '3', '0.3']
        assert fields[9] == ''
        assert 0.0 <= float(fields[7]) <= 0.3 <= float(fields[8]) <= 1.0

    def test_mean_fields(self):
        fields = row('ratio', 'n=2', StatBlock.from_values([1.0, 2.0, 3.0])).csv_fields('mu')
        assert fields[3:7] == ['mean', '3', '', '2.0']
        assert float(fields[9]) == pytest.approx(1.0)

    def test_empty_block_writes_blanks(self):
        fields = row('diameter', '', StatBlock.from_values([])).csv_fields('shells')
        assert fields[6:] == ['', '', '', '']

    def test_dict_round_trip(self):
        r = row('ratio', 'n=2', StatBlock.from_values([0.1, 0.7]))
        assert ReportRow.from_dict(json.loads(json.dumps(r.to_dict()))) == r


class TestPersistence:

    def test_csv_header_and_rows(self, three_reports):
        rows = list(csv.reader(io.StringIO(three_reports[0].csv_text())))
        assert tuple(rows[0]) == RESULT_COLUMNS
        assert len(rows) == 4
        assert all(len(r) == len(RESULT_COLUMNS) for r in rows)

    def test_csv_uses_crlf(self, three_reports):
        assert three_reports[0].csv_text().endswith('\r\n')

    def test_columns_match_documentation(self):
        text = SCHEMA_DOC.read_text(encoding='utf-8')
        section = text.split('## results.csv', 1)[1].split('\n## ', 1)[0]
        documented = tuple(re.findall(r'^\| `([a-z_]+)` \|', section, flags=re.MULTILINE))
        assert documented == RESULT_COLUMNS

    def test_write_and_load(self, tmp_path, three_reports):
        report = _report(4, 12, [0.5], artifacts={'traces.jsonl': ('{"a": 1}', '{"a": 2}')})
        write_report(report, tmp_path, {'mu_hat': 0.5, 'bad': math.nan})
        summary = json.loads((tmp_path / 'summary.json').read_text(encoding='utf-8'))
        assert summary['schema_version'] == SCHEMA_VERSION
        assert summary['summary'] == {'mu_hat': 0.5, 'bad': None}
        assert summary['seeds'] == [4]
        assert (tmp_path / 'traces.jsonl').read_text(encoding='utf-8') == '{"a": 1}\n{"a": 2}\n'

        loaded = load_report(tmp_path)
        assert loaded == report

    def test_load_rejects_other_schema(self, tmp_path, three_reports):
        write_report(three_reports[0], tmp_path, {})
        summary_path = tmp_path / 'summary.json'
        data = json.loads(summary_path.read_text(encoding='utf-8'))
        data['schema_version'] = 99
        summary_path.write_text(json.dumps(data), encoding='utf-8')
        with pytest.raises(ConfigError, match="schema_version"):
            load_report(tmp_path)

    def test_load_missing_directory(self, tmp_path):
        with pytest.raises(ConfigError, match="Not a report directory"):
            load_report(tmp_path / 'nothing')

    def test_json_safe(self):
        assert json_safe({'a': [1.0, math.inf], 'b': (math.nan,), 3: 'x'}) == {
            'a': [1.0, None], 'b': [None], '3': 'x',
        }


class TestMerge:

    def test_self_merge_doubles_counts(self, three_reports):
        a = three_reports[0]
        merged = merge([a, a])
        assert merged.block('hit').k == 60
        assert merged.block('hit').n == 200
        assert merged.block('ratio', 'n=4').n == 6
        assert merged.block('ratio', 'n=4').estimate == a.block('ratio', 'n=4').estimate
        assert merged.seeds == (1, 1)
        assert merged.config.replicas == 200

    def test_associative(self, three_reports):
        a, b, c = three_reports
        left = merge([a, merge([b, c])])
        right = merge([merge([a, b]), c])
        assert left.csv_text() == right.csv_text()
        assert json.dumps(left.summary_dict({})) == json.dumps(right.summary_dict({}))
        assert left.config == right.config

    def test_commutative(self, three_reports):
        a, b, c = three_reports
        assert merge([a, b, c]).csv_text() == merge([c, a, b]).csv_text()
        assert merge([a, b, c]).seeds == merge([b, c, a]).seeds == (1, 2, 3)

    def test_merged_config(self, three_reports):
        merged = merge(three_reports)
        assert merged.config.master_seed == 1
        assert merged.config.replicas == 300

    def test_pooled_wilson_narrower(self, three_reports):
        a, b, _ = three_reports
        pooled = merge([a, b]).block('hit')
        assert pooled.k == 70 and pooled.n == 200
        assert pooled.half_width() < a.block('hit').half_width()
        assert pooled.half_width() < b.block('hit').half_width()

    def test_artifacts_pooled_sorted(self):
        a = _report(1, 1, [1.0], artifacts={'traces.jsonl': ('{"k": 2}',)})
        b = _report(2, 1, [1.0], artifacts={'traces.jsonl': ('{"k": 1}',)})
        assert merge([a, b]).artifacts == merge([b, a]).artifacts == {'traces.jsonl': ('{"k": 1}', '{"k": 2}')}

    def test_config_mismatch(self, three_reports):
        other = Report(_config(9, n_grid=[2, 4]), three_reports[0].rows, (9,))
        with pytest.raises(ConfigMismatchError):
            merge([three_reports[0], other])

    def test_row_mismatch(self, three_reports):
        a = three_reports[0]
        other = Report(a.config, a.rows[:2], (5,))
        with pytest.raises(ConfigMismatchError, match="rows"):
            merge([a, other])

    def test_empty(self):
        with pytest.raises(ValueError):
            merge([])

    def test_censored_fraction(self, three_reports):
        assert censored_fraction(three_reports[0].rows) == 0.01
        assert censored_fraction(merge(three_reports).rows) == 0.01
        assert censored_fraction([]) == 0.0
