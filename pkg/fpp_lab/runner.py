"""
Experiment runner.

Validates a config, farms replicas out to a thread pool, pools the results
into a Report and writes the report directory. Output files other than
run_log.json depend on the config alone, never on the thread count.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

from fpp_lab import experiments
from fpp_lab.config import ExperimentConfig
from fpp_lab.reports import Report, censored_fraction, load_report, merge, write_report
from fpp_lab.run_logging import RunLogger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CENSORED = 3


@dataclass(frozen=True)
class RunResult:
    report: Report
    summary: Dict[str, Any]
    out_dir: Path
    censored_fraction: float
    exit_code: int


def build_report(config: ExperimentConfig, threads: int = 1) -> Report:
    """Collect rows for config with a pool of `threads` workers (none for 1)."""
    if threads < 1:
        raise ValueError(f"threads must be positive, got {threads}")
    if threads == 1:
        rows, artifacts = experiments.collect(config, map)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows, artifacts = experiments.collect(config, pool.map)
    return Report(config=config, rows=tuple(rows), seeds=(config.master_seed,), artifacts=artifacts)


def run(
    config: ExperimentConfig,
    out_dir: Union[str, Path],
    threads: int = 1,
    strict: bool = False,
    run_logger: Optional[RunLogger] = None,
) -> RunResult:
    """
    Run one experiment and write its report directory.

    Args:
        config: Validated experiment config
        out_dir: Output directory (created if needed)
        threads: Worker threads for the replicas
        strict: Flag runs whose censored fraction exceeds the threshold
        run_logger: Audit trail (a fresh one when omitted)

    Returns:
        RunResult; exit_code is EXIT_CENSORED for flagged strict runs

    Raises:
        ConfigError: If cross-field checks fail
        FppLabError: From the experiment itself
    """
    run_logger = run_logger or RunLogger()
    out = Path(out_dir)
    logger.info(f"Starting '{config.experiment}' run into {out}")

    try:
        # 1. Cross-field validation
        experiments.check_params(config)
        run_logger.log_validation('params', True)

        # 2. Replicas
        run_logger.log_run_start(config.experiment, config.replicas, threads, config.master_seed)
        started = time.perf_counter()
        report = build_report(config, threads)
        run_logger.log_replicas_complete(config.experiment, config.replicas, time.perf_counter() - started)

        # 3. Derived values
        summary = experiments.summarize(report)

        # 4. Persist
        write_report(report, out, summary)

        # 5. Censoring
        fraction = censored_fraction(report.rows)
        limit = float(config.thresholds.get('censoring.max_censored_fraction'))
        run_logger.log_censoring(fraction, limit)
        exit_code = EXIT_OK
        if fraction > limit:
            logger.warning(f"Censored fraction {fraction:.3f} exceeds {limit:.3f}")
            if strict:
                exit_code = EXIT_CENSORED

        run_logger.log_run_complete(config.experiment, str(out), exit_code)
        logger.info(f"Finished '{config.experiment}': {len(report.rows)} rows, exit code {exit_code}")
        return RunResult(report, summary, out, fraction, exit_code)
    except Exception as e:
        run_logger.log_failure(config.experiment, e)
        raise
    finally:
        run_logger.save(out)


def merge_dirs(in_dirs: Sequence[Union[str, Path]], out_dir: Union[str, Path]) -> RunResult:
    """
    Merge report directories and write the pooled report.

    Raises:
        ConfigMismatchError: If the reports cannot be pooled
        ConfigError: If a directory is not a readable report
    """
    reports = [load_report(d) for d in in_dirs]
    merged = merge(reports)
    summary = experiments.summarize(merged)
    out = write_report(merged, out_dir, summary)
    fraction = censored_fraction(merged.rows)
    return RunResult(merged, summary, out, fraction, EXIT_OK)
