"""
Console text for the command-line interface.

Command output goes to stdout; logs go to stderr.
"""

from typing import Iterable, List, Optional

import pandas as pd

from src.models.cvss import ScoreBreakdown
from src.models.data_models import FilterReport
from src.services.prediction_service import PredictionRun


class ConsoleMessages:
    """Templates for everything the CLI prints."""

    @staticmethod
    def score_line(label: str, breakdown: ScoreBreakdown) -> str:
        return (
            f"{label}: {breakdown.base_score:.1f} {breakdown.severity.value} "
            f"(exploitability {breakdown.exploitability:.6f}, impact {breakdown.impact:.6f})"
        )

    @staticmethod
    def ingest_summary(report: FilterReport, dataset_path: str, report_path: str) -> str:
        lines = [f"Kept {report.kept} of {report.total} CVE records -> {dataset_path}"]
        for reason, count in report.as_rows():
            if reason not in ("kept", "total") and count:
                lines.append(f"  rejected {reason}: {count}")
        lines.append(f"Filter report: {report_path}")
        return "\n".join(lines)

    @staticmethod
    def predict_summary(run: PredictionRun, predictions_path: str) -> str:
        lines = [f"Wrote {len(run.predictions)} prediction rows -> {predictions_path}"]
        for provider_id, summary in sorted(run.summaries.items()):
            status = f"FAILED ({summary.error})" if summary.failed else "ok"
            lines.append(
                f"  {provider_id}: {summary.completed}/{summary.batches} batches, "
                f"{summary.requests_sent} requests, {summary.cache_hits} cache hits, {status}"
            )
        return "\n".join(lines)

    @staticmethod
    def cache_miss(keys: List[str]) -> str:
        return "\n".join([f"Replay cache is missing {len(keys)} prompt(s):"] + [f"  {key}" for key in keys])

    @staticmethod
    def table(title: str, frame: pd.DataFrame) -> str:
        with pd.option_context("display.max_rows", None, "display.max_columns", None, "display.width", 200):
            body = frame.to_string(index=False, float_format=lambda value: f"{value:.4f}")
        return f"{title}\n{body}"

    @staticmethod
    def outputs_written(paths: Iterable[str], out_dir: str) -> str:
        names = sorted(str(path) for path in paths)
        return f"Wrote {len(names)} file(s) under {out_dir}"

    @staticmethod
    def skipped_metrics(metrics: Iterable[str]) -> Optional[str]:
        metrics = list(metrics)
        if not metrics:
            return None
        return f"Meta classification skipped for: {', '.join(metrics)} (too few samples per class)"

    @staticmethod
    def error(message: str) -> str:
        return f"error: {message}"
