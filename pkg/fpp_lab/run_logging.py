"""
Structured run log.

Provides:
- Structured events for each step of an experiment run
- Correlation ID tracking across a run
- An audit file (run_log.json) next to the results
"""

import json
import logging
import uuid
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

logger = logging.getLogger(__name__)

RUN_LOG_FILE = 'run_log.json'

INFO = 'INFO'
WARNING = 'WARNING'
ERROR = 'ERROR'

_LEVELS = {INFO: logging.INFO, WARNING: logging.WARNING, ERROR: logging.ERROR}


@dataclass
class RunLogEntry:
    """Structured run log entry."""
    correlation_id: str
    timestamp: str
    event_type: str
    severity: str
    action: str
    result: str
    details: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return asdict(self)


class RunLogger:
    """Run logger with an in-memory audit trail."""

    def __init__(self, correlation_id: Optional[str] = None):
        self.correlation_id = correlation_id or str(uuid.uuid4())
        self.log_entries: List[RunLogEntry] = []

    def _record(self, event_type: str, severity: str, action: str, result: str, details: Dict[str, Any]) -> None:
        entry = RunLogEntry(
            correlation_id=self.correlation_id,
            timestamp=datetime.now(timezone.utc).isoformat(),
            event_type=event_type,
            severity=severity,
            action=action,
            result=result,
            details=details,
        )
        self.log_entries.append(entry)
        logger.log(
            _LEVELS.get(severity, logging.INFO),
            f"[{self.correlation_id}] {event_type}: {action} - {result}",
            extra={'run_log': entry.to_dict()},
        )

    def log_run_start(self, experiment: str, replicas: int, threads: int, master_seed: int) -> None:
        self._record('run_start', INFO, experiment, 'STARTED', {
            'replicas': replicas, 'threads': threads, 'master_seed': master_seed,
        })

    def log_validation(self, check: str, passed: bool, details: Optional[Dict[str, Any]] = None) -> None:
        self._record('validation', INFO if passed else ERROR, check, 'PASS' if passed else 'FAIL', details or {})

    def log_replicas_complete(self, experiment: str, replicas: int, seconds: float) -> None:
        self._record('replica_complete', INFO, experiment, 'DONE', {
            'replicas': replicas, 'seconds': round(seconds, 3),
        })

    def log_censoring(self, fraction: float, limit: float) -> None:
        over = fraction > limit
        self._record('censoring', WARNING if over else INFO, 'censored_fraction',
                     'OVER_LIMIT' if over else 'OK', {'fraction': fraction, 'limit': limit})

    def log_run_complete(self, experiment: str, out_dir: str, exit_code: int) -> None:
        self._record('run_complete', INFO if exit_code == 0 else WARNING, experiment,
                     'SUCCESS' if exit_code == 0 else 'FLAGGED', {'out_dir': out_dir, 'exit_code': exit_code})

    def log_failure(self, experiment: str, error: Exception) -> None:
        self._record('run_failed', ERROR, experiment, 'FAIL', {
            'error_type': type(error).__name__, 'message': str(error),
        })

    def get_summary(self) -> Dict[str, Any]:
        """
        Get summary of logged events.

        Returns:
            Dictionary with event counts by type, severity and result
        """
        by_type: Dict[str, int] = {}
        by_severity: Dict[str, int] = {}
        by_result: Dict[str, int] = {}
        for entry in self.log_entries:
            by_type[entry.event_type] = by_type.get(entry.event_type, 0) + 1
            by_severity[entry.severity] = by_severity.get(entry.severity, 0) + 1
            by_result[entry.result] = by_result.get(entry.result, 0) + 1
        return {
            'correlation_id': self.correlation_id,
            'total_events': len(self.log_entries),
            'by_type': by_type,
            'by_severity': by_severity,
            'by_result': by_result,
        }

    def save(self, out_dir: Union[str, Path]) -> Path:
        """Write the audit trail to run_log.json in out_dir."""
        path = Path(out_dir) / RUN_LOG_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump({
                'summary': self.get_summary(),
                'events': [e.to_dict() for e in self.log_entries],
            }, f, indent=2, default=str)
            f.write('\n')
        logger.debug(f"Saved run log to {path}")
        return path
