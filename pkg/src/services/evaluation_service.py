"""
Evaluation service for per-metric prediction quality.

Confusion matrices, accuracy, per-class and support-weighted
precision/recall/F1, ordinal MAE, majority baselines, imbalance ratios,
Cramér's V association and cross-model misclassification overlap.

UNKNOWN predictions get their own confusion-matrix column, count as wrong
everywhere and take the maximum ordinal distance in the MAE.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.stats

from src.models.cvss import (
    METRIC_VALUES,
    REPORT_ORDER,
    UNKNOWN,
    BaseVector,
    MetricKind,
    base_score,
    max_ordinal_distance,
    ordinal_value,
    score_predicted_vector,
)
from src.models.data_models import CveEntry, PredictionSet, cve_sort_key
from src.models.errors import (
    CoverageMismatch,
    DegenerateTable,
    EmptyInput,
    InvalidValueForKind,
    LengthMismatch,
    SingleClass,
)
from src.utils.logger import LoggerMixin


@dataclass
class ConfusionMatrix:
    """
    Truth × prediction counts for one metric.

    Rows follow the canonical value order; columns are the same values plus
    a final UNKNOWN column.
    """

    kind: MetricKind
    classes: Tuple[str, ...]
    counts: np.ndarray

    @property
    def columns(self) -> Tuple[str, ...]:
        return self.classes + (UNKNOWN,)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count(self, truth: str, pred: str) -> int:
        return int(self.counts[self.classes.index(truth), self.columns.index(pred)])

    def to_long(self) -> List[Tuple[str, str, int]]:
        """(truth, pred, count) for every cell, in row-major order."""
        return [
            (truth, pred, int(self.counts[i, j]))
            for i, truth in enumerate(self.classes)
            for j, pred in enumerate(self.columns)
        ]


@dataclass
class ClassScores:
    """Per-class precision, recall, F1 and true support, in class order."""

    classes: Tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray


@dataclass
class MetricReport:
    """Evaluation bundle for one metric and one model."""

    kind: MetricKind
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    mae: float
    baseline: float
    per_class: ClassScores
    confusion: ConfusionMatrix


@dataclass
class OverlapReport:
    """Share of CVEs misclassified by exactly k of the M models, k = 0..M."""

    kind: MetricKind
    models: Tuple[str, ...]
    fractions: np.ndarray
    n: int

    @property
    def all_models(self) -> float:
        return float(self.fractions[-1])


@dataclass
class AssociationMatrix:
    """Pairwise Cramér's V between ground-truth metrics (NaN where undefined)."""

    kinds: Tuple[MetricKind, ...]
    values: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        labels = [kind.value for kind in self.kinds]
        return pd.DataFrame(self.values, index=labels, columns=labels)


@dataclass
class SeverityAgreement:
    """How well severities derived from predicted vectors match the truth."""

    accuracy: float
    score_mae: Optional[float]
    n: int
    n_valid: int


def _check_pair(truth: Sequence[str], pred: Sequence[str]) -> None:
    if len(truth) != len(pred):
        raise LengthMismatch(f"truth has {len(truth)} labels, predictions {len(pred)}")
    if len(truth) == 0:
        raise EmptyInput("No samples to evaluate")


def confusion_matrix(truth: Sequence[str], pred: Sequence[str], kind: MetricKind) -> ConfusionMatrix:
    """
    Count (truth, prediction) pairs.

    Raises:
        LengthMismatch: If the sequences differ in length
        EmptyInput: If they are empty
        InvalidValueForKind: If a truth label is UNKNOWN or not a level of kind
    """
    _check_pair(truth, pred)
    kind = MetricKind(kind)
    classes = METRIC_VALUES[kind]
    columns = classes + (UNKNOWN,)
    counts = np.zeros((len(classes), len(columns)), dtype=np.int64)

    for t, p in zip(truth, pred):
        if t not in classes:
            raise InvalidValueForKind(f"Ground truth '{t}' is not a valid {kind.value} value")
        column = columns.index(p) if p in columns else len(classes)
        counts[classes.index(t), column] += 1

    return ConfusionMatrix(kind=kind, classes=classes, counts=counts)


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise EmptyInput("Confusion matrix is empty")
    diagonal = sum(int(cm.counts[i, i]) for i in range(len(cm.classes)))
    return diagonal / total


def class_scores(cm: ConfusionMatrix) -> ClassScores:
    """
    Per-class scores; a zero denominator gives 0.

    UNKNOWN predictions are false negatives of the true class and never
    true/false positives of any class.
    """
    if cm.total == 0:
        raise EmptyInput("Confusion matrix is empty")

    n_classes = len(cm.classes)
    square = cm.counts[:, :n_classes].astype(float)
    tp = np.diag(square)
    predicted = square.sum(axis=0)
    support = cm.counts.sum(axis=1).astype(float)

    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)

    return ClassScores(
        classes=cm.classes,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support.astype(np.int64),
    )


def _weighted(values: np.ndarray, support: np.ndarray) -> float:
    total = support.sum()
    if total == 0:
        raise EmptyInput("No support")
    return float((values * support).sum() / total)


def weighted_precision(cm: ConfusionMatrix) -> float:
    scores = class_scores(cm)
    return _weighted(scores.precision, scores.support)


def weighted_recall(cm: ConfusionMatrix) -> float:
    scores = class_scores(cm)
    return _weighted(scores.recall, scores.support)


def weighted_f1(cm: ConfusionMatrix) -> float:
    scores = class_scores(cm)
    return _weighted(scores.f1, scores.support)


def ordinal_mae(truth: Sequence[str], pred: Sequence[str], kind: MetricKind) -> float:
    """
    Mean absolute difference of ordinal encodings.

    UNKNOWN (or any non-level) predictions contribute the maximum distance
    for the metric.
    """
    _check_pair(truth, pred)
    kind = MetricKind(kind)
    worst = max_ordinal_distance(kind)
    total = 0
    for t, p in zip(truth, pred):
        true_ordinal = ordinal_value(kind, t)
        if p in METRIC_VALUES[kind]:
            total += abs(true_ordinal - ordinal_value(kind, p))
        else:
            total += worst
    return total / len(truth)


def majority_class(truth: Sequence[str], kind: Optional[MetricKind] = None) -> str:
    """Most frequent label; ties go to the earliest value in canonical order."""
    if len(truth) == 0:
        raise EmptyInput("No labels")
    counts = Counter(truth)
    order = list(METRIC_VALUES[MetricKind(kind)]) if kind is not None else sorted(counts)
    order += sorted(label for label in counts if label not in order)
    best = max(counts.values())
    return next(label for label in order if counts.get(label, 0) == best)


def majority_baseline(truth: Sequence[str]) -> float:
    """Accuracy of always predicting the most frequent class."""
    if len(truth) == 0:
        raise EmptyInput("No labels")
    return max(Counter(truth).values()) / len(truth)


def imbalance_ratio(truth: Sequence[str]) -> float:
    """Largest class count over smallest non-zero class count."""
    counts = Counter(truth)
    if len(counts) < 2:
        raise SingleClass("Imbalance ratio needs at least two classes")
    return max(counts.values()) / min(counts.values())


def class_distribution(truth: Sequence[str], kind: MetricKind) -> List[Tuple[str, int, float]]:
    """(value, count, share) for every level of kind in canonical order."""
    if len(truth) == 0:
        raise EmptyInput("No labels")
    counts = Counter(truth)
    return [
        (value, counts.get(value, 0), counts.get(value, 0) / len(truth))
        for value in METRIC_VALUES[MetricKind(kind)]
    ]


def cramers_v(a: Sequence[str], b: Sequence[str]) -> float:
    """
    Cramér's V from the Pearson chi-square of the a × b contingency table
    (no continuity correction).

    Raises:
        LengthMismatch: If the sequences differ in length
        EmptyInput: If they are empty
        DegenerateTable: If either variable has a single class
    """
    _check_pair(a, b)
    table = pd.crosstab(pd.Series(list(a), name="a"), pd.Series(list(b), name="b"))
    rows, cols = table.shape
    if rows < 2 or cols < 2:
        raise DegenerateTable(f"Contingency table is {rows}x{cols}")

    chi2 = scipy.stats.chi2_contingency(table.to_numpy(), correction=False)[0]
    n = len(a)
    value = float(np.sqrt(chi2 / (n * (min(rows, cols) - 1))))
    return min(max(value, 0.0), 1.0)


def association_matrix(truth_vectors: Sequence[BaseVector]) -> AssociationMatrix:
    """Cramér's V for every pair of metrics, in report order."""
    if not truth_vectors:
        raise EmptyInput("No ground truth vectors")
    kinds = REPORT_ORDER
    columns = {kind: [vector[kind] for vector in truth_vectors] for kind in kinds}
    values = np.full((len(kinds), len(kinds)), np.nan)
    for i, first in enumerate(kinds):
        values[i, i] = 1.0
        for j in range(i + 1, len(kinds)):
            try:
                v = cramers_v(columns[first], columns[kinds[j]])
            except DegenerateTable:
                continue
            values[i, j] = values[j, i] = v
    return AssociationMatrix(kinds=kinds, values=values)


def _aligned_errors(
    truth: Mapping[str, str],
    predictions_by_model: Mapping[str, Mapping[str, str]]
) -> Tuple[List[str], List[str], np.ndarray]:
    """Error indicator matrix (CVE × model) in sorted CVE / model order."""
    if not predictions_by_model:
        raise EmptyInput("No models")
    if not truth:
        raise EmptyInput("No ground truth")

    cve_ids = sorted(truth, key=cve_sort_key)
    models = sorted(predictions_by_model)
    expected = set(truth)
    for model in models:
        covered = set(predictions_by_model[model])
        if covered != expected:
            raise CoverageMismatch(
                f"Model {model} covers {len(covered & expected)}/{len(expected)} CVEs"
                f" and {len(covered - expected)} unknown ones"
            )

    errors = np.array([
        [predictions_by_model[model][cve_id] != truth[cve_id] for model in models]
        for cve_id in cve_ids
    ], dtype=bool)
    return cve_ids, models, errors


def misclassification_overlap(
    truth: Mapping[str, str],
    predictions_by_model: Mapping[str, Mapping[str, str]],
    kind: MetricKind
) -> OverlapReport:
    """
    Distribution of how many models get each CVE wrong.

    Args:
        truth: cve_id → true label
        predictions_by_model: model → (cve_id → predicted label)
        kind: Metric being compared

    Raises:
        CoverageMismatch: If a model does not cover exactly the truth CVEs
    """
    cve_ids, models, errors = _aligned_errors(truth, predictions_by_model)
    per_cve = errors.sum(axis=1)
    counts = np.bincount(per_cve, minlength=len(models) + 1)
    return OverlapReport(
        kind=MetricKind(kind),
        models=tuple(models),
        fractions=counts / len(cve_ids),
        n=len(cve_ids),
    )


def pairwise_misclassification(
    truth: Mapping[str, str],
    predictions_by_model: Mapping[str, Mapping[str, str]]
) -> pd.DataFrame:
    """
    Share of CVEs misclassified by both model i and model j; the diagonal
    is each model's own error rate.
    """
    _, models, errors = _aligned_errors(truth, predictions_by_model)
    as_float = errors.astype(float)
    shared = as_float.T @ as_float / errors.shape[0]
    return pd.DataFrame(shared, index=models, columns=models)


def evaluate_metric(truth: Sequence[str], pred: Sequence[str], kind: MetricKind) -> MetricReport:
    cm = confusion_matrix(truth, pred, kind)
    scores = class_scores(cm)
    return MetricReport(
        kind=MetricKind(kind),
        accuracy=accuracy(cm),
        weighted_precision=_weighted(scores.precision, scores.support),
        weighted_recall=_weighted(scores.recall, scores.support),
        weighted_f1=_weighted(scores.f1, scores.support),
        mae=ordinal_mae(truth, pred, kind),
        baseline=majority_baseline(truth),
        per_class=scores,
        confusion=cm,
    )


def severity_agreement(
    truth_vectors: Sequence[BaseVector],
    predicted_vectors: Sequence[BaseVector]
) -> SeverityAgreement:
    """
    Score predicted vectors with the base-score formula and compare.

    Invalid predictions count as severity misses and are left out of the
    score MAE (None when no prediction is valid).
    """
    if len(truth_vectors) != len(predicted_vectors):
        raise LengthMismatch("truth and prediction counts differ")
    if not truth_vectors:
        raise EmptyInput("No vectors")

    hits = 0
    abs_errors = []
    for truth, pred in zip(truth_vectors, predicted_vectors):
        predicted = score_predicted_vector(pred)
        if predicted is None:
            continue
        actual = base_score(truth)
        hits += int(predicted.severity == actual.severity)
        abs_errors.append(abs(predicted.base_score - actual.base_score))

    return SeverityAgreement(
        accuracy=hits / len(truth_vectors),
        score_mae=float(np.mean(abs_errors)) if abs_errors else None,
        n=len(truth_vectors),
        n_valid=len(abs_errors),
    )


@dataclass
class EvaluationResult:
    """Everything the evaluate command reports."""

    models: Tuple[str, ...]
    reports: Dict[Tuple[str, MetricKind], MetricReport]
    overlaps: Dict[MetricKind, OverlapReport]
    pairwise: Dict[MetricKind, pd.DataFrame]
    severity: Dict[str, SeverityAgreement]
    validity: Dict[str, float] = field(default_factory=dict)


def group_predictions(
    dataset: Sequence[CveEntry],
    predictions: Sequence[PredictionSet]
) -> Dict[str, Dict[str, PredictionSet]]:
    """
    model → (cve_id → prediction), checking that every model covers the
    dataset exactly once.

    Raises:
        EmptyInput: If there are no predictions
        CoverageMismatch: On missing, extra or duplicated CVEs
    """
    if not predictions:
        raise EmptyInput("No predictions")

    expected = {entry.cve_id for entry in dataset}
    grouped: Dict[str, Dict[str, PredictionSet]] = {}
    for prediction in predictions:
        by_cve = grouped.setdefault(prediction.model_id, {})
        if prediction.cve_id in by_cve:
            raise CoverageMismatch(
                f"Model {prediction.model_id} predicts {prediction.cve_id} more than once"
            )
        by_cve[prediction.cve_id] = prediction

    for model, by_cve in sorted(grouped.items()):
        missing = expected - set(by_cve)
        extra = set(by_cve) - expected
        if missing or extra:
            raise CoverageMismatch(
                f"Model {model}: {len(missing)} CVE(s) without prediction, "
                f"{len(extra)} prediction(s) for CVEs not in the dataset"
            )
    return {model: grouped[model] for model in sorted(grouped)}


class EvaluationService(LoggerMixin):
    """Evaluates every model on every metric."""

    def evaluate(
        self,
        dataset: Sequence[CveEntry],
        predictions: Sequence[PredictionSet]
    ) -> EvaluationResult:
        """
        Build metric reports, overlap and severity agreement.

        Raises:
            EmptyInput: If dataset or predictions are empty
            CoverageMismatch: If predictions do not cover the dataset exactly
        """
        if not dataset:
            raise EmptyInput("Dataset is empty")

        try:
            grouped = group_predictions(dataset, predictions)
        except Exception as e:
            self.logger.error("Predictions do not match the dataset", error=str(e))
            raise

        entries = sorted(dataset, key=lambda entry: cve_sort_key(entry.cve_id))
        models = tuple(grouped)
        reports: Dict[Tuple[str, MetricKind], MetricReport] = {}
        overlaps: Dict[MetricKind, OverlapReport] = {}
        pairwise: Dict[MetricKind, pd.DataFrame] = {}

        for kind in REPORT_ORDER:
            truth = [entry.truth[kind] for entry in entries]
            by_model: Dict[str, Dict[str, str]] = {}
            for model in models:
                pred = [grouped[model][entry.cve_id][kind] for entry in entries]
                reports[(model, kind)] = evaluate_metric(truth, pred, kind)
                by_model[model] = {entry.cve_id: label for entry, label in zip(entries, pred)}

            truth_map = {entry.cve_id: entry.truth[kind] for entry in entries}
            overlaps[kind] = misclassification_overlap(truth_map, by_model, kind)
            pairwise[kind] = pairwise_misclassification(truth_map, by_model)

        severity = {
            model: severity_agreement(
                [entry.truth for entry in entries],
                [grouped[model][entry.cve_id].labels for entry in entries],
            )
            for model in models
        }
        validity = {
            model: sum(grouped[model][entry.cve_id].valid for entry in entries) / len(entries)
            for model in models
        }

        self.logger.info("Evaluation finished", models=list(models), entries=len(entries))
        return EvaluationResult(
            models=models,
            reports=reports,
            overlaps=overlaps,
            pairwise=pairwise,
            severity=severity,
            validity=validity,
        )
