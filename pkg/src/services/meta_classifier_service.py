"""
Meta-classification service.

Encodes the per-model predictions for one CVSS metric into consensus
features, compares the meta-model kinds with stratified cross-validation on
a training split and reports the selected kind's hold-out accuracy next to
every individual model.
"""

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import StratifiedKFold

from src.models.cvss import METRIC_VALUES, REPORT_ORDER, UNKNOWN, MetricKind
from src.models.data_models import CveEntry, PredictionSet, cve_sort_key
from src.models.errors import (
    ConfigError,
    EmptyInput,
    InvariantViolation,
    SchemaMismatch,
    SingleClass,
    TooFewPerClass,
    WrongModelCount,
)
from src.services.evaluation_service import (
    accuracy,
    confusion_matrix,
    group_predictions,
    majority_baseline,
    weighted_f1,
)
from src.services.learners import (
    VOTING_MEMBERS,
    MetaLearner,
    MetaModelKind,
    VotingLearner,
    learner_from_params,
    make_learner,
)
from src.utils.logger import LoggerMixin

MODEL_FORMAT_VERSION = "1.0"
UNKNOWN_CODE = -1
DEFAULT_FOLDS = 5
DEFAULT_TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class MetaFeatureVector:
    """Encoded predictions of all models for one CVE and one metric."""

    kind: MetricKind
    codes: Tuple[int, ...]
    valid: Tuple[int, ...]
    majority: int
    confidence: float
    consensus: float

    @property
    def n_models(self) -> int:
        return len(self.codes)

    @property
    def majority_label(self) -> str:
        if self.majority == UNKNOWN_CODE:
            return UNKNOWN
        return METRIC_VALUES[self.kind][self.majority]


def class_code(kind: MetricKind, label: str) -> int:
    """Index of label in the metric's canonical value order, -1 otherwise."""
    values = METRIC_VALUES[kind]
    return values.index(label) if label in values else UNKNOWN_CODE


def encode_labels(
    labels: Sequence[str],
    kind: MetricKind,
    n_models: Optional[int] = None
) -> MetaFeatureVector:
    """
    Encode one CVE's labels (one per model, in model order).

    UNKNOWN labels get code -1 and validity 0 and take no part in the
    majority, confidence or consensus tallies. Majority ties go to the
    earliest class in canonical order.

    Raises:
        WrongModelCount: If n_models is given and differs from len(labels)
    """
    kind = MetricKind(kind)
    if not labels:
        raise WrongModelCount("No model predictions to encode")
    if n_models is not None and len(labels) != n_models:
        raise WrongModelCount(f"Expected {n_models} model predictions, got {len(labels)}")

    codes = tuple(class_code(kind, label) for label in labels)
    valid_codes = [code for code in codes if code != UNKNOWN_CODE]
    n_valid = len(valid_codes)

    if n_valid == 0:
        majority, confidence, consensus = UNKNOWN_CODE, 0.0, 0.0
    else:
        counts = Counter(valid_codes)
        top = max(counts.values())
        majority = min(code for code, count in counts.items() if count == top)
        confidence = top / n_valid
        if n_valid == 1:
            consensus = 1.0
        else:
            agreeing = sum(a == b for a, b in combinations(valid_codes, 2))
            consensus = agreeing / math.comb(n_valid, 2)

    return MetaFeatureVector(
        kind=kind,
        codes=codes,
        valid=tuple(int(code != UNKNOWN_CODE) for code in codes),
        majority=majority,
        confidence=confidence,
        consensus=consensus,
    )


def encode(
    predictions: Sequence[PredictionSet],
    kind: MetricKind,
    n_models: Optional[int] = None
) -> MetaFeatureVector:
    """Encode the PredictionSets of one CVE (one per model)."""
    cve_ids = {prediction.cve_id for prediction in predictions}
    if len(cve_ids) > 1:
        raise WrongModelCount(f"Predictions span several CVEs: {sorted(cve_ids)}")
    return encode_labels([prediction[kind] for prediction in predictions], kind, n_models)


def feature_names(kind: MetricKind, models: Sequence[str]) -> List[str]:
    slots = list(METRIC_VALUES[kind]) + [UNKNOWN]
    names = [f"{model}={slot}" for model in models for slot in slots]
    names += [f"majority={slot}" for slot in slots]
    names += ["consensus", "confidence"]
    names += [f"{model}:valid" for model in models]
    return names


def design_row(vector: MetaFeatureVector) -> np.ndarray:
    """
    One-hot model codes and majority class (UNKNOWN in the last slot),
    then consensus, confidence and the validity flags.
    """
    width = len(METRIC_VALUES[vector.kind]) + 1
    parts = []
    for code in (*vector.codes, vector.majority):
        slot = np.zeros(width)
        slot[code if code != UNKNOWN_CODE else width - 1] = 1.0
        parts.append(slot)
    parts.append(np.array([vector.consensus, vector.confidence]))
    parts.append(np.asarray(vector.valid, dtype=float))
    return np.concatenate(parts)


def design_matrix(vectors: Sequence[MetaFeatureVector]) -> np.ndarray:
    if not vectors:
        raise EmptyInput("No feature vectors")
    return np.vstack([design_row(vector) for vector in vectors])


def stratified_split(
    labels: Sequence[Any],
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    seed: int = 42
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stratified train/test indices.

    Each class sends round(count * train_fraction) samples to the training
    side, kept between 1 and count - 1, so both sides stay within one sample
    of the class's target share.

    Returns:
        (train indices, test indices), each sorted

    Raises:
        TooFewPerClass: If a class has fewer than two samples
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyInput("No samples to split")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie strictly between 0 and 1")

    counts = Counter(labels.tolist())
    small = sorted(str(label) for label, count in counts.items() if count < 2)
    if small:
        raise TooFewPerClass(f"Classes with fewer than 2 samples: {', '.join(small)}")

    rng = np.random.default_rng(seed)
    train: List[int] = []
    test: List[int] = []
    for label in sorted(counts, key=str):
        members = rng.permutation(np.flatnonzero(labels == label))
        n_train = min(max(int(round(members.size * train_fraction)), 1), members.size - 1)
        train.extend(members[:n_train].tolist())
        test.extend(members[n_train:].tolist())
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(test, dtype=np.int64))


def stratified_kfold(
    labels: Sequence[Any],
    k: int = DEFAULT_FOLDS,
    seed: int = 42,
    logger: Any = None
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    k stratified (train, validation) index pairs whose validation sides
    partition the samples.

    Classes with fewer than k samples are spread over as many folds as they
    can fill; a warning is logged.
    """
    labels = np.asarray(labels)
    if labels.size < k:
        raise TooFewPerClass(f"{labels.size} samples cannot fill {k} folds")

    counts = Counter(labels.tolist())
    small = sorted(str(label) for label, count in counts.items() if count < k)
    if small and logger is not None:
        logger.warning("Classes smaller than the fold count", classes=small, folds=k)

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            return [
                (np.sort(train), np.sort(validation))
                for train, validation in splitter.split(np.zeros(labels.size), labels)
            ]
        except ValueError as e:
            raise TooFewPerClass(str(e))


@dataclass
class CvResult:
    """Cross-validation scores of one meta-model kind."""

    kind: MetaModelKind
    fold_accuracy: List[float]
    fold_f1: List[float]
    selected: bool = False

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracy))

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.fold_f1))


@dataclass
class TrainedMetaModel:
    """A trained learner plus what is needed to apply it to new predictions."""

    metric: MetricKind
    kind: MetaModelKind
    classes: Tuple[str, ...]
    models: Tuple[str, ...]
    seed: int
    learner: MetaLearner

    @property
    def feature_names(self) -> List[str]:
        return feature_names(self.metric, self.models)

    def to_dict(self) -> Dict[str, Any]:
        params = self.learner.to_params()
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "metric": self.metric.value,
            "kind": self.kind.value,
            "seed": self.seed,
            "classes": list(self.classes),
            "models": list(self.models),
            "feature_names": self.feature_names,
            "hyperparameters": params["hyperparameters"],
            "parameters": params,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainedMetaModel":
        try:
            if data["format_version"] != MODEL_FORMAT_VERSION:
                raise SchemaMismatch(f"Unsupported model format {data['format_version']}")
            return cls(
                metric=MetricKind(data["metric"]),
                kind=MetaModelKind(data["kind"]),
                classes=tuple(data["classes"]),
                models=tuple(data["models"]),
                seed=int(data["seed"]),
                learner=learner_from_params(data["parameters"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaMismatch(f"Invalid meta model document: {e}")


def train(
    kind: MetaModelKind,
    features: np.ndarray,
    labels: Sequence[str],
    metric: MetricKind,
    models: Sequence[str],
    classes: Optional[Sequence[str]] = None,
    hyperparameters: Optional[Dict[str, Any]] = None,
    seed: int = 42
) -> TrainedMetaModel:
    """
    Fit one meta-model kind on encoded features and true labels.

    Raises:
        SingleClass: If fewer than two classes are present
        NonFiniteFeature: If features hold NaN or infinite values
    """
    metric = MetricKind(metric)
    if classes is None:
        present = set(labels)
        classes = [value for value in METRIC_VALUES[metric] if value in present]
    classes = tuple(classes)
    index = {label: i for i, label in enumerate(classes)}
    y = np.array([index[label] for label in labels], dtype=np.int64)

    learner = make_learner(kind, len(classes), seed, hyperparameters).fit(features, y)
    return TrainedMetaModel(
        metric=metric,
        kind=MetaModelKind(kind),
        classes=classes,
        models=tuple(models),
        seed=seed,
        learner=learner,
    )


def predict(model: TrainedMetaModel, features: np.ndarray) -> Tuple[List[str], np.ndarray]:
    """
    Labels and class-probability rows for encoded features.

    Raises:
        DimensionMismatch: If the feature width differs from training
    """
    probabilities = model.learner.predict_proba(features)
    indices = model.learner.predict(features)
    return [model.classes[i] for i in indices], probabilities


@dataclass
class MetaTask:
    """Encoded features and truth for one metric."""

    metric: MetricKind
    models: Tuple[str, ...]
    cve_ids: List[str]
    vectors: List[MetaFeatureVector]
    features: np.ndarray
    truth: List[str]
    labels_by_model: Dict[str, List[str]]


@dataclass
class MetaReport:
    """Selection, hold-out accuracies and the refitted winner for one metric."""

    metric: MetricKind
    classes: Tuple[str, ...]
    n_train: int
    n_test: int
    cv_results: List[CvResult]
    selected: MetaModelKind
    meta_accuracy: float
    model_accuracy: Dict[str, float]
    baseline: float
    model: TrainedMetaModel
    dropped_classes: List[str] = field(default_factory=list)

    @property
    def best_individual(self) -> float:
        return max(self.model_accuracy.values())

    @property
    def change(self) -> float:
        return self.meta_accuracy - self.best_individual


def _score(truth: Sequence[str], pred: Sequence[str], metric: MetricKind) -> Tuple[float, float]:
    cm = confusion_matrix(truth, pred, metric)
    return accuracy(cm), weighted_f1(cm)


class MetaClassifierService(LoggerMixin):
    """Runs the meta-classification experiment per CVSS metric."""

    def __init__(
        self,
        seed: int = 42,
        n_folds: int = DEFAULT_FOLDS,
        train_fraction: float = DEFAULT_TRAIN_FRACTION,
        rf_trees: int = 100,
        hyperparameters: Optional[Dict[str, Dict[str, Any]]] = None,
        kinds: Sequence[MetaModelKind] = tuple(MetaModelKind)
    ):
        self.seed = seed
        self.n_folds = n_folds
        self.train_fraction = train_fraction
        self.hyperparameters: Dict[str, Dict[str, Any]] = {
            MetaModelKind.RANDOM_FOREST.value: {"n_trees": rf_trees},
        }
        for name, values in (hyperparameters or {}).items():
            self.hyperparameters[name] = {**self.hyperparameters.get(name, {}), **values}
        self.kinds = tuple(MetaModelKind(kind) for kind in kinds)

    def _hyperparameters(self, kind: MetaModelKind) -> Dict[str, Any]:
        if kind is MetaModelKind.VOTING:
            return {"member_hyperparameters": {
                member.value: self.hyperparameters.get(member.value, {}) for member in VOTING_MEMBERS
            }}
        return dict(self.hyperparameters.get(kind.value, {}))

    def build_task(
        self,
        dataset: Sequence[CveEntry],
        predictions: Sequence[PredictionSet],
        metric: MetricKind
    ) -> MetaTask:
        """
        Encode every CVE for one metric.

        Raises:
            EmptyInput: If the dataset is empty
            CoverageMismatch: If some model does not cover the dataset
        """
        if not dataset:
            raise EmptyInput("Dataset is empty")
        metric = MetricKind(metric)
        grouped = group_predictions(dataset, predictions)
        models = tuple(grouped)
        entries = sorted(dataset, key=lambda entry: cve_sort_key(entry.cve_id))

        labels_by_model = {
            model: [grouped[model][entry.cve_id][metric] for entry in entries] for model in models
        }
        vectors = [
            encode_labels([labels_by_model[model][i] for model in models], metric, len(models))
            for i in range(len(entries))
        ]
        return MetaTask(
            metric=metric,
            models=models,
            cve_ids=[entry.cve_id for entry in entries],
            vectors=vectors,
            features=design_matrix(vectors),
            truth=[entry.truth[metric] for entry in entries],
            labels_by_model=labels_by_model,
        )

    def cross_validate(
        self,
        features: np.ndarray,
        truth: Sequence[str],
        metric: MetricKind,
        classes: Sequence[str]
    ) -> List[CvResult]:
        """
        Stratified k-fold scores per kind. Voting averages the members
        trained for the same fold.
        """
        truth = list(truth)
        index = {label: i for i, label in enumerate(classes)}
        y = np.array([index[label] for label in truth], dtype=np.int64)
        folds = stratified_kfold(y, self.n_folds, self.seed, self.logger)

        results = {kind: CvResult(kind=kind, fold_accuracy=[], fold_f1=[]) for kind in self.kinds}
        for fold, (fit_idx, val_idx) in enumerate(folds):
            fitted: Dict[MetaModelKind, MetaLearner] = {}
            needed = set(self.kinds)
            if MetaModelKind.VOTING in needed:
                needed.update(VOTING_MEMBERS)
            for kind in MetaModelKind:
                if kind is MetaModelKind.VOTING or kind not in needed:
                    continue
                fitted[kind] = make_learner(
                    kind, len(classes), self.seed, self._hyperparameters(kind)
                ).fit(features[fit_idx], y[fit_idx])
            if MetaModelKind.VOTING in needed:
                fitted[MetaModelKind.VOTING] = VotingLearner.from_members(
                    [fitted[member] for member in VOTING_MEMBERS], seed=self.seed
                )

            val_truth = [truth[i] for i in val_idx]
            for kind in self.kinds:
                pred = [classes[i] for i in fitted[kind].predict(features[val_idx])]
                acc, f1 = _score(val_truth, pred, metric)
                results[kind].fold_accuracy.append(acc)
                results[kind].fold_f1.append(f1)

            self.logger.debug("Fold finished", metric=metric.value, fold=fold, size=len(val_idx))

        return [results[kind] for kind in self.kinds]

    @staticmethod
    def select(cv_results: Sequence[CvResult]) -> CvResult:
        """Highest mean weighted F1; ties go to the earlier kind."""
        best = cv_results[0]
        for result in cv_results[1:]:
            if result.mean_f1 > best.mean_f1 + 1e-12:
                best = result
        best.selected = True
        if any(result.mean_f1 > best.mean_f1 + 1e-12 for result in cv_results):
            raise InvariantViolation("Selected meta model does not have the best CV F1")
        return best

    def run_meta(
        self,
        dataset: Sequence[CveEntry],
        predictions: Sequence[PredictionSet],
        metric: MetricKind
    ) -> MetaReport:
        """
        Cross-validate every kind on the training split, refit the winner on
        the whole split and score it on the held-out side.

        Classes with a single sample are dropped with a warning.

        Raises:
            SingleClass: If fewer than two classes remain
            TooFewPerClass: If the split cannot be stratified
            CoverageMismatch: If predictions do not cover the dataset
        """
        metric = MetricKind(metric)
        task = self.build_task(dataset, predictions, metric)

        counts = Counter(task.truth)
        dropped = [value for value in METRIC_VALUES[metric] if 0 < counts.get(value, 0) < 2]
        if dropped:
            self.logger.warning("Dropping classes with a single sample", metric=metric.value, classes=dropped)
        keep = [i for i, label in enumerate(task.truth) if label not in dropped]
        classes = tuple(value for value in METRIC_VALUES[metric] if counts.get(value, 0) >= 2)
        if len(classes) < 2:
            raise SingleClass(f"{metric.value} has fewer than two classes with enough samples")

        features = task.features[keep]
        truth = [task.truth[i] for i in keep]
        train_idx, test_idx = stratified_split(truth, self.train_fraction, self.seed)

        train_truth = [truth[i] for i in train_idx]
        test_truth = [truth[i] for i in test_idx]

        cv_results = self.cross_validate(features[train_idx], train_truth, metric, classes)
        winner = self.select(cv_results)

        model = train(
            winner.kind,
            features[train_idx],
            train_truth,
            metric,
            task.models,
            classes=classes,
            hyperparameters=self._hyperparameters(winner.kind),
            seed=self.seed,
        )
        meta_pred, _ = predict(model, features[test_idx])
        meta_accuracy, _ = _score(test_truth, meta_pred, metric)

        model_accuracy = {}
        for name in task.models:
            labels = [task.labels_by_model[name][keep[i]] for i in test_idx]
            model_accuracy[name], _ = _score(test_truth, labels, metric)

        report = MetaReport(
            metric=metric,
            classes=classes,
            n_train=len(train_idx),
            n_test=len(test_idx),
            cv_results=cv_results,
            selected=winner.kind,
            meta_accuracy=meta_accuracy,
            model_accuracy=model_accuracy,
            baseline=majority_baseline(test_truth),
            model=model,
            dropped_classes=dropped,
        )
        self.logger.info(
            "Meta classification finished",
            metric=metric.value,
            selected=winner.kind.value,
            cv_f1=round(winner.mean_f1, 6),
            meta_accuracy=round(meta_accuracy, 6),
            change=round(report.change, 6)
        )
        return report

    def run_all(
        self,
        dataset: Sequence[CveEntry],
        predictions: Sequence[PredictionSet],
        metrics: Sequence[MetricKind] = REPORT_ORDER
    ) -> Tuple[Dict[MetricKind, MetaReport], List[MetricKind]]:
        """
        run_meta for every metric in report order.

        Returns:
            (reports by metric, metrics skipped for lack of classes)
        """
        group_predictions(dataset, predictions)

        reports: Dict[MetricKind, MetaReport] = {}
        skipped: List[MetricKind] = []
        for metric in metrics:
            try:
                reports[MetricKind(metric)] = self.run_meta(dataset, predictions, metric)
            except (SingleClass, TooFewPerClass) as e:
                self.logger.warning("Metric skipped", metric=MetricKind(metric).value, reason=str(e))
                skipped.append(MetricKind(metric))
        return reports, skipped
