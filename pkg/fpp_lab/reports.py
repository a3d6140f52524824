"""
Experiment reports: pooled statistic rows, persistence and merging.

A report directory holds

- results.csv: one row per (metric, key) statistic, columns RESULT_COLUMNS
- summary.json: exact pooled blocks plus derived values (schema_version 1)
- config.json: the config echo
- optional JSON-lines artifacts (traces.jsonl, shells.jsonl)

Rows keep exact sums (see StatBlock), so merging reports is associative
and commutative down to the written bytes.
"""

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from fpp_lab.config import ExperimentConfig
from fpp_lab.errors import ConfigError, ConfigMismatchError
from fpp_lab.stats import PROPORTION, StatBlock

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RESULT_COLUMNS = ('experiment', 'metric', 'key', 'kind', 'n', 'k', 'estimate', 'lower', 'upper', 'sd')

RESULTS_FILE = 'results.csv'
SUMMARY_FILE = 'summary.json'
CONFIG_FILE = 'config.json'
ARTIFACT_FILES = ('traces.jsonl', 'shells.jsonl')


def _number(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ''


def json_safe(value: Any) -> Any:
    """Replace non-finite floats by None, recursively."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, Mapping):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


@dataclass(frozen=True)
class ReportRow:
    """One pooled statistic: metric name, row key (e.g. 'n=16') and block."""
    metric: str
    key: str
    block: StatBlock

    @property
    def ident(self) -> Tuple[str, str]:
        return (self.metric, self.key)

    def csv_fields(self, experiment: str, confidence: float = 0.95) -> List[str]:
        b = self.block
        lower, upper = b.interval(confidence)
        if b.kind == PROPORTION:
            k, sd = str(b.k), ''
        else:
            k, sd = '', _number(math.sqrt(b.variance)) if b.n > 1 else ''
        return [
            experiment, self.metric, self.key, b.kind, str(b.n), k,
            _number(b.estimate), _number(lower), _number(upper), sd,
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {'metric': self.metric, 'key': self.key, 'block': self.block.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'ReportRow':
        return cls(str(data['metric']), str(data['key']), StatBlock.from_dict(data['block']))


def row(metric: str, key: Any, block: StatBlock) -> ReportRow:
    return ReportRow(metric, str(key), block)


@dataclass(frozen=True)
class Report:
    """Everything an experiment produced, in mergeable form."""
    config: ExperimentConfig
    rows: Tuple[ReportRow, ...]
    seeds: Tuple[int, ...]
    artifacts: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)

    def blocks(self, metric: str) -> List[ReportRow]:
        return [r for r in self.rows if r.metric == metric]

    def block(self, metric: str, key: Any = '') -> Optional[StatBlock]:
        for r in self.rows:
            if r.metric == metric and r.key == str(key):
                return r.block
        return None

    def csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\r\n')
        writer.writerow(RESULT_COLUMNS)
        for r in self.rows:
            writer.writerow(r.csv_fields(self.config.experiment, self.config.confidence))
        return buffer.getvalue()

    def summary_dict(self, summary: Mapping[str, Any]) -> Dict[str, Any]:
        return {
            'schema_version': SCHEMA_VERSION,
            'experiment': self.config.experiment,
            'master_seed': self.config.master_seed,
            'replicas': self.config.replicas,
            'seeds': list(self.seeds),
            'rows': [r.to_dict() for r in self.rows],
            'summary': json_safe(dict(summary)),
        }


def write_report(report: Report, out_dir: Union[str, Path], summary: Mapping[str, Any]) -> Path:
    """Write results.csv, summary.json, config.json and artifacts into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / RESULTS_FILE, 'w', encoding='utf-8', newline='') as f:
        f.write(report.csv_text())
    with open(out / SUMMARY_FILE, 'w', encoding='utf-8') as f:
        json.dump(report.summary_dict(summary), f, indent=2, sort_keys=True, allow_nan=False)
        f.write('\n')
    with open(out / CONFIG_FILE, 'w', encoding='utf-8') as f:
        f.write(report.config.to_json())
        f.write('\n')
    for name, lines in report.artifacts.items():
        with open(out / name, 'w', encoding='utf-8') as f:
            for line in lines:
                f.write(line + '\n')
    logger.info(f"Wrote {len(report.rows)} result rows to {out}")
    return out


def load_report(out_dir: Union[str, Path]) -> Report:
    """
    Read a report directory written by write_report.

    Raises:
        ConfigError: If a file is missing, unreadable or of another schema version
    """
    out = Path(out_dir)
    try:
        with open(out / CONFIG_FILE, 'r', encoding='utf-8') as f:
            config = ExperimentConfig.from_dict(json.load(f))
        with open(out / SUMMARY_FILE, 'r', encoding='utf-8') as f:
            summary = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Not a report directory: {out} ({e.filename} missing)") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read report {out}: {e}") from e

    version = summary.get('schema_version')
    if version != SCHEMA_VERSION:
        raise ConfigError(f"Report {out} has schema_version {version}, expected {SCHEMA_VERSION}")

    artifacts = {}
    for name in ARTIFACT_FILES:
        path = out / name
        if path.exists():
            with open(path, 'r', encoding='utf-8') as f:
                artifacts[name] = tuple(line.rstrip('\n') for line in f if line.strip())
    return Report(
        config=config,
        rows=tuple(ReportRow.from_dict(r) for r in summary['rows']),
        seeds=tuple(int(s) for s in summary['seeds']),
        artifacts=artifacts,
    )


def _merge_pair(a: Report, b: Report) -> Report:
    if a.config.poolable_dict() != b.config.poolable_dict():
        raise ConfigMismatchError(
            f"Cannot merge {a.config.experiment} reports from different configurations"
        )
    if [r.ident for r in a.rows] != [r.ident for r in b.rows]:
        raise ConfigMismatchError("Reports carry different result rows")
    rows = tuple(ReportRow(x.metric, x.key, x.block.merge(y.block)) for x, y in zip(a.rows, b.rows))
    names = sorted(set(a.artifacts) | set(b.artifacts))
    artifacts = {n: tuple(sorted(a.artifacts.get(n, ()) + b.artifacts.get(n, ()))) for n in names}
    config = dataclasses.replace(
        a.config,
        master_seed=min(a.config.master_seed, b.config.master_seed),
        replicas=a.config.replicas + b.config.replicas,
    )
    return Report(config=config, rows=rows, seeds=tuple(sorted(a.seeds + b.seeds)), artifacts=artifacts)


def merge(reports: Sequence[Report]) -> Report:
    """
    Pool reports from identical configs (master_seed and replicas aside).

    Raises:
        ConfigMismatchError: If configs or row layouts differ
        ValueError: For an empty collection
    """
    if not reports:
        raise ValueError("nothing to merge")
    merged = reports[0]
    for other in reports[1:]:
        merged = _merge_pair(merged, other)
    logger.info(f"Merged {len(reports)} {merged.config.experiment} reports, seeds {list(merged.seeds)}")
    return merged


def censored_fraction(rows: Iterable[ReportRow]) -> float:
    """Pooled fraction of censored replicas, 0 when nothing was recorded."""
    k = n = 0
    for r in rows:
        if r.metric == 'censored':
            k += r.block.k
            n += r.block.n
    return k / n if n else 0.0
