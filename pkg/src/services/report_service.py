"""
Report service for tabular outputs.

Turns evaluation, analysis and meta-classification results into pandas
DataFrames with fixed column and row order, so that identical inputs give
identical CSV bytes.
"""

from collections import Counter
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.models.cvss import REPORT_ORDER, MetricKind, Severity, base_score
from src.models.data_models import CveEntry, FilterReport
from src.models.errors import SingleClass
from src.services.evaluation_service import (
    AssociationMatrix,
    EvaluationResult,
    class_distribution,
    imbalance_ratio,
)
from src.services.learners import LogisticRegressionLearner, RandomForestLearner
from src.services.meta_classifier_service import MetaReport, TrainedMetaModel
from src.services.text_analysis_service import OVERALL, CorrelationRow, DescriptionStats

UNDEFINED = "undefined"
EVALUATION_COLUMNS = ["metric", "model", "accuracy", "precision", "recall", "f1", "mae", "baseline"]


def evaluation_frame(result: EvaluationResult) -> pd.DataFrame:
    """
    Per (metric, model) scores in report order, then one OVERALL row per
    model holding the mean over the eight metrics.
    """
    rows = []
    for kind in REPORT_ORDER:
        for model in result.models:
            report = result.reports[(model, kind)]
            rows.append({
                "metric": kind.value,
                "model": model,
                "accuracy": report.accuracy,
                "precision": report.weighted_precision,
                "recall": report.weighted_recall,
                "f1": report.weighted_f1,
                "mae": report.mae,
                "baseline": report.baseline,
            })
    frame = pd.DataFrame(rows, columns=EVALUATION_COLUMNS)

    overall = (
        frame.groupby("model", sort=False)[EVALUATION_COLUMNS[2:]]
        .mean()
        .reset_index()
    )
    overall.insert(0, "metric", OVERALL)
    return pd.concat([frame, overall[EVALUATION_COLUMNS]], ignore_index=True)


def confusion_frame(result: EvaluationResult) -> pd.DataFrame:
    rows = [
        {"metric": kind.value, "model": model, "truth": truth, "pred": pred, "count": count}
        for kind in REPORT_ORDER
        for model in result.models
        for truth, pred, count in result.reports[(model, kind)].confusion.to_long()
    ]
    return pd.DataFrame(rows, columns=["metric", "model", "truth", "pred", "count"])


def overlap_frame(result: EvaluationResult) -> pd.DataFrame:
    """Share and count of CVEs misclassified by exactly k models."""
    rows = []
    for kind in REPORT_ORDER:
        overlap = result.overlaps[kind]
        for k, fraction in enumerate(overlap.fractions):
            rows.append({
                "metric": kind.value,
                "k": k,
                "count": int(round(fraction * overlap.n)),
                "fraction": float(fraction),
            })
    return pd.DataFrame(rows, columns=["metric", "k", "count", "fraction"])


def pairwise_frame(result: EvaluationResult) -> pd.DataFrame:
    rows = []
    for kind in REPORT_ORDER:
        matrix = result.pairwise[kind]
        for first in matrix.index:
            for second in matrix.columns:
                rows.append({
                    "metric": kind.value,
                    "model_a": first,
                    "model_b": second,
                    "fraction": float(matrix.loc[first, second]),
                })
    return pd.DataFrame(rows, columns=["metric", "model_a", "model_b", "fraction"])


def severity_agreement_frame(result: EvaluationResult) -> pd.DataFrame:
    rows = [
        {
            "model": model,
            "severity_accuracy": agreement.accuracy,
            "score_mae": agreement.score_mae if agreement.score_mae is not None else np.nan,
            "valid_share": result.validity.get(model, np.nan),
        }
        for model, agreement in result.severity.items()
    ]
    return pd.DataFrame(rows, columns=["model", "severity_accuracy", "score_mae", "valid_share"])


def filter_frame(report: FilterReport) -> pd.DataFrame:
    return pd.DataFrame(report.as_rows(), columns=["reason", "count"])


def distribution_frame(dataset: Sequence[CveEntry]) -> pd.DataFrame:
    """Class counts and shares per metric, plus each metric's imbalance ratio."""
    rows = []
    for kind in REPORT_ORDER:
        truth = [entry.truth[kind] for entry in dataset]
        try:
            ratio = imbalance_ratio(truth)
        except SingleClass:
            ratio = np.nan
        for value, count, share in class_distribution(truth, kind):
            rows.append({
                "metric": kind.value,
                "value": value,
                "count": count,
                "share": share,
                "imbalance_ratio": ratio,
            })
    return pd.DataFrame(rows, columns=["metric", "value", "count", "share", "imbalance_ratio"])


def severity_distribution_frame(dataset: Sequence[CveEntry]) -> pd.DataFrame:
    """Severity bands of the base scores computed from the true vectors."""
    counts = Counter(base_score(entry.truth).severity for entry in dataset)
    n = len(dataset)
    rows = [
        {"severity": band.value, "count": counts.get(band, 0), "share": counts.get(band, 0) / n if n else 0.0}
        for band in Severity
    ]
    return pd.DataFrame(rows, columns=["severity", "count", "share"])


def association_frame(matrix: AssociationMatrix) -> pd.DataFrame:
    frame = matrix.to_frame()
    frame.index.name = "metric"
    return frame.reset_index()


def length_stats_frame(stats: DescriptionStats) -> pd.DataFrame:
    rows = [
        ("n", stats.n),
        ("mean_chars", stats.mean_chars),
        ("median_chars", stats.median_chars),
        ("min_chars", stats.min_chars),
        ("max_chars", stats.max_chars),
    ]
    return pd.DataFrame(rows, columns=["statistic", "value"])


def histogram_frame(stats: DescriptionStats) -> pd.DataFrame:
    return pd.DataFrame(stats.word_histogram, columns=["bucket_start", "count"])


def correlation_frame(rows: Sequence[CorrelationRow]) -> pd.DataFrame:
    """r and p band per (model, metric, feature); undefined when a series is constant."""
    records = []
    for row in rows:
        if row.result is None:
            r, p_band, n = UNDEFINED, UNDEFINED, ""
        else:
            r, p_band, n = f"{row.result.r:.6f}", row.result.p_band, str(row.result.n)
        records.append({
            "model": row.model,
            "metric": row.metric,
            "feature": row.feature,
            "n": n,
            "r": r,
            "p": p_band,
        })
    return pd.DataFrame(records, columns=["model", "metric", "feature", "n", "r", "p"])


def meta_frame(reports: Dict[MetricKind, MetaReport], skipped: Sequence[MetricKind] = ()) -> pd.DataFrame:
    """
    One row per metric: baseline, each model's hold-out accuracy, the best
    meta accuracy, the selected kind and the change over the best model.
    """
    models: List[str] = sorted({model for report in reports.values() for model in report.model_accuracy})
    columns = ["metric", "baseline", *models, "best_meta", "meta_model", "change"]
    rows = []
    for kind in REPORT_ORDER:
        if kind in reports:
            report = reports[kind]
            row = {"metric": kind.value, "baseline": report.baseline}
            row.update({model: report.model_accuracy.get(model, np.nan) for model in models})
            row.update({
                "best_meta": report.meta_accuracy,
                "meta_model": report.selected.value,
                "change": report.change,
            })
            rows.append(row)
        elif kind in skipped:
            rows.append({"metric": kind.value, "meta_model": "skipped"})
    return pd.DataFrame(rows, columns=columns)


def cv_frame(reports: Dict[MetricKind, MetaReport]) -> pd.DataFrame:
    rows = []
    for kind in REPORT_ORDER:
        report = reports.get(kind)
        if report is None:
            continue
        for result in report.cv_results:
            for fold, (acc, f1) in enumerate(zip(result.fold_accuracy, result.fold_f1)):
                rows.append({
                    "metric": kind.value,
                    "kind": result.kind.value,
                    "fold": fold,
                    "accuracy": acc,
                    "f1": f1,
                    "selected": result.selected,
                })
    return pd.DataFrame(rows, columns=["metric", "kind", "fold", "accuracy", "f1", "selected"])


def explanation_frame(model: TrainedMetaModel) -> Optional[pd.DataFrame]:
    """
    Feature importances for a random forest, coefficients for logistic
    regression; None for the other kinds.
    """
    names = model.feature_names
    learner = model.learner
    if isinstance(learner, RandomForestLearner):
        return pd.DataFrame({
            "metric": model.metric.value,
            "feature": names,
            "importance": learner.feature_importances,
        })
    if isinstance(learner, LogisticRegressionLearner):
        rows = [
            {"metric": model.metric.value, "feature": name, "class": label, "coefficient": learner.coefficients[i, j]}
            for i, name in enumerate(names)
            for j, label in enumerate(model.classes)
        ]
        return pd.DataFrame(rows, columns=["metric", "feature", "class", "coefficient"])
    return None
