"""
Tests for the meta-classification service.
"""

from collections import Counter

import numpy as np
import pytest

from src.models.cvss import METRIC_VALUES, UNKNOWN, MetricKind
from src.models.data_models import PredictionSet
from src.models.errors import CoverageMismatch, InvariantViolation, SchemaMismatch, TooFewPerClass, WrongModelCount
from src.services.learners import MetaModelKind
from src.services.meta_classifier_service import (
    UNKNOWN_CODE,
    CvResult,
    MetaClassifierService,
    TrainedMetaModel,
    design_matrix,
    design_row,
    encode,
    encode_labels,
    feature_names,
    predict,
    stratified_kfold,
    stratified_split,
    train,
)
from tests.conftest import make_entry, make_prediction

FAST = {
    "LogisticRegression": {"max_iter": 500},
    "RandomForest": {"n_trees": 10},
    "NeuralNetwork": {"hidden_layers": [16], "max_epochs": 30},
}

MODELS = ("m1", "m2", "m3", "m4", "m5", "m6")


def fast_service(**kwargs):
    return MetaClassifierService(seed=42, hyperparameters=FAST, **kwargs)


def majority_fixture(n=150, seed=11):
    """
    One 70%-accurate and five 55%-accurate simulated models on AV; the truth
    is the majority vote of the six.
    """
    rng = np.random.default_rng(seed)
    values = ["N", "L"]
    accuracies = [0.70, 0.55, 0.55, 0.55, 0.55, 0.55]
    entries, predictions = [], []
    for i in range(n):
        latent = values[rng.integers(2)]
        labels = [latent if rng.random() < p else values[1 - values.index(latent)] for p in accuracies]
        truth = encode_labels(labels, MetricKind.AV).majority_label
        entry = make_entry(i + 1, vector_text=f"AV:{truth}/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H")
        entries.append(entry)
        for model, label in zip(MODELS, labels):
            predictions.append(make_prediction(entry.cve_id, model, {MetricKind.AV: label}, entry.truth))
    return entries, predictions


def random_labels(rng, min_count):
    """Shuffled labels of 2-4 classes, each with min_count to 39 samples."""
    n_classes = int(rng.integers(2, 5))
    counts = rng.integers(min_count, 40, size=n_classes)
    return rng.permutation(np.repeat(np.arange(n_classes), counts))


class TestEncode:
    """Test cases for feature encoding."""

    def test_unanimity(self):
        """Test six identical labels."""
        vector = encode_labels(["N"] * 6, MetricKind.AV)

        assert (vector.consensus, vector.confidence, vector.majority_label) == (1.0, 1.0, "N")
        assert vector.valid == (1,) * 6

    def test_mixed_labels(self):
        """Test [N,N,N,L,L,H] on confidentiality."""
        vector = encode_labels(["N", "N", "N", "L", "L", "H"], MetricKind.C)

        assert vector.majority_label == "N"
        assert vector.confidence == 0.5
        assert vector.consensus == pytest.approx(4 / 15)
        assert vector.codes == (2, 2, 2, 1, 1, 0)

    def test_unknown_is_excluded(self):
        """Test one UNKNOWN among six."""
        vector = encode_labels(["N", "N", UNKNOWN, "L", "N", "N"], MetricKind.AV)

        assert vector.codes[2] == UNKNOWN_CODE
        assert vector.valid == (1, 1, 0, 1, 1, 1)
        assert vector.confidence == pytest.approx(4 / 5)
        assert vector.consensus == pytest.approx(6 / 10)

    def test_majority_tie_uses_canonical_order(self):
        """Test a 3-3 split."""
        assert encode_labels(["L", "L", "L", "N", "N", "N"], MetricKind.AV).majority_label == "N"

    def test_all_unknown_and_single_valid(self):
        """Test the degenerate validity counts."""
        silent = encode_labels([UNKNOWN] * 3, MetricKind.S)
        single = encode_labels([UNKNOWN, "C", UNKNOWN], MetricKind.S)

        assert (silent.majority, silent.confidence, silent.consensus) == (UNKNOWN_CODE, 0.0, 0.0)
        assert silent.majority_label == UNKNOWN
        assert (single.majority_label, single.confidence, single.consensus) == ("C", 1.0, 1.0)

    def test_consensus_one_iff_identical(self):
        """Test the consensus property and the integer confidence count on random labels."""
        rng = np.random.default_rng(0)
        pool = list(METRIC_VALUES[MetricKind.PR]) + [UNKNOWN]
        for _ in range(300):
            labels = [pool[i] for i in rng.integers(0, len(pool), size=6)]
            vector = encode_labels(labels, MetricKind.PR)
            valid = [label for label in labels if label != UNKNOWN]
            if valid:
                assert (vector.consensus == 1.0) == (len(set(valid)) == 1)
                assert vector.confidence * len(valid) == pytest.approx(round(vector.confidence * len(valid)))

    def test_wrong_model_count(self):
        """Test label lists of the wrong size."""
        with pytest.raises(WrongModelCount):
            encode_labels(["N"] * 5, MetricKind.AV, n_models=6)
        with pytest.raises(WrongModelCount):
            encode_labels([], MetricKind.AV)

    def test_encode_prediction_sets(self):
        """Test encoding PredictionSets of one CVE and of several."""
        entry, other = make_entry(1), make_entry(2)
        same = [make_prediction(entry.cve_id, m, {}, entry.truth) for m in MODELS[:3]]

        assert encode(same, MetricKind.AV, 3).majority_label == "N"
        with pytest.raises(WrongModelCount):
            encode(same + [PredictionSet(other.cve_id, "m4", other.truth)], MetricKind.AV)

    def test_design_row_width(self):
        """Test that feature names describe every column."""
        vector = encode_labels(["N", UNKNOWN, "L"], MetricKind.AV)

        row = design_row(vector)

        names = feature_names(MetricKind.AV, ["a", "b", "c"])
        assert row.shape == (len(names),)
        assert row[names.index("b=UNKNOWN")] == 1.0
        assert row[names.index("majority=N")] == 1.0
        assert row[names.index("b:valid")] == 0.0


class TestSplits:
    """Test cases for stratified splits and folds."""

    def test_split_proportions(self):
        """Test 100 samples with classes 80/20."""
        labels = ["a"] * 80 + ["b"] * 20

        train_idx, test_idx = stratified_split(labels, 0.8, seed=1)

        assert Counter(labels[i] for i in train_idx) == {"a": 64, "b": 16}
        assert Counter(labels[i] for i in test_idx) == {"a": 16, "b": 4}
        assert sorted(np.concatenate([train_idx, test_idx]).tolist()) == list(range(100))

    def test_split_proportions_on_random_labels(self):
        """Test that both sides stay within one sample of each class's target over 200 label sets."""
        rng = np.random.default_rng(8)
        for _ in range(200):
            labels = random_labels(rng, min_count=2)
            fraction = float(rng.choice([0.5, 0.7, 0.8]))

            train_idx, test_idx = stratified_split(labels, fraction, seed=int(rng.integers(1000)))

            assert sorted(np.concatenate([train_idx, test_idx]).tolist()) == list(range(labels.size))
            for label, count in Counter(labels.tolist()).items():
                n_train = int((labels[train_idx] == label).sum())
                assert abs(n_train - fraction * count) <= 1
                assert abs((count - n_train) - (1 - fraction) * count) <= 1
                assert 1 <= n_train < count

    def test_split_deterministic(self):
        """Test that the same seed gives the same split."""
        labels = ["a", "b", "c"] * 20

        first = stratified_split(labels, seed=3)
        second = stratified_split(labels, seed=3)

        assert all(np.array_equal(x, y) for x, y in zip(first, second))

    def test_split_singleton_class(self):
        """Test a class with one sample."""
        with pytest.raises(TooFewPerClass):
            stratified_split(["a"] * 10 + ["b"])

    def test_kfold_balanced(self):
        """Test 50 balanced samples in five folds."""
        labels = np.array([0, 1] * 25)

        folds = stratified_kfold(labels, k=5, seed=0)

        validation = np.concatenate([val for _, val in folds])
        assert sorted(validation.tolist()) == list(range(50))
        for fit_idx, val_idx in folds:
            assert Counter(labels[val_idx].tolist()) == {0: 5, 1: 5}
            assert not set(fit_idx) & set(val_idx)

    def test_kfold_stratified_on_random_labels(self):
        """Test partition and per-class fold counts differing by at most one over 200 label sets."""
        rng = np.random.default_rng(4)
        for _ in range(200):
            labels = random_labels(rng, min_count=5)

            folds = stratified_kfold(labels, k=5, seed=int(rng.integers(1000)))

            validation = np.concatenate([val for _, val in folds])
            assert sorted(validation.tolist()) == list(range(labels.size))
            for label in np.unique(labels):
                per_fold = [int((labels[val] == label).sum()) for _, val in folds]
                assert max(per_fold) - min(per_fold) <= 1

    def test_kfold_too_few_samples(self):
        """Test fewer samples than folds."""
        with pytest.raises(TooFewPerClass):
            stratified_kfold([0, 1, 0], k=5)


class TestTrainPredict:
    """Test cases for train and predict."""

    @pytest.mark.parametrize("kind", list(MetaModelKind))
    def test_majority_feature_identity(self, kind):
        """Test that every kind learns truth equal to the majority label on held-out rows."""
        rng = np.random.default_rng(0)
        values = ["N", "A", "L"]
        vectors = [encode_labels([values[i] for i in rng.integers(0, 3, size=6)], MetricKind.AV) for _ in range(240)]
        X = design_matrix(vectors)
        truth = [vector.majority_label for vector in vectors]
        hyperparameters = {
            MetaModelKind.RANDOM_FOREST: {"n_trees": 50},
            MetaModelKind.NEURAL_NETWORK: {"learning_rate": 0.1, "batch_size": 32, "max_epochs": 300},
            MetaModelKind.VOTING: {"member_hyperparameters": {
                "RandomForest": {"n_trees": 50},
                "NeuralNetwork": {"learning_rate": 0.1, "batch_size": 32, "max_epochs": 300},
            }},
        }.get(kind)

        model = train(kind, X[:200], truth[:200], MetricKind.AV, MODELS, hyperparameters=hyperparameters, seed=1)

        labels, probabilities = predict(model, X[200:])
        assert np.mean([a == b for a, b in zip(labels, truth[200:])]) >= 0.95
        assert np.allclose(probabilities.sum(axis=1), 1.0, atol=1e-9)
        assert model.classes == ("N", "A", "L")

    def test_model_document_round_trip(self):
        """Test saving and loading a trained model."""
        vectors = [encode_labels(labels, MetricKind.S) for labels in (["U", "U"], ["C", "C"], ["U", "C"])] * 5
        X = design_matrix(vectors)
        truth = [vector.majority_label for vector in vectors]
        model = train(MetaModelKind.LOGISTIC_REGRESSION, X, truth, MetricKind.S, ["a", "b"], seed=9)

        document = model.to_dict()
        reloaded = TrainedMetaModel.from_dict(document)

        assert document["format_version"] == "1.0"
        assert document["seed"] == 9
        assert reloaded.feature_names == model.feature_names
        assert predict(reloaded, X)[0] == predict(model, X)[0]

    def test_bad_model_document(self):
        """Test an unsupported model document."""
        with pytest.raises(SchemaMismatch):
            TrainedMetaModel.from_dict({"format_version": "9.9"})
        with pytest.raises(SchemaMismatch):
            TrainedMetaModel.from_dict({"kind": "Voting"})


class TestSelection:
    """Test cases for meta-model selection."""

    def test_highest_mean_f1_wins(self):
        """Test selection and the tie rule."""
        results = [
            CvResult(MetaModelKind.VOTING, [0.8], [0.70]),
            CvResult(MetaModelKind.LOGISTIC_REGRESSION, [0.8], [0.75]),
            CvResult(MetaModelKind.RANDOM_FOREST, [0.9], [0.75]),
        ]

        best = MetaClassifierService.select(results)

        assert best.kind is MetaModelKind.LOGISTIC_REGRESSION
        assert best.selected

    def test_selection_invariant(self, mocker):
        """Test that a broken comparison is reported."""
        results = [CvResult(MetaModelKind.VOTING, [0.5], [0.5]), CvResult(MetaModelKind.RANDOM_FOREST, [0.5], [0.9])]
        mocker.patch.object(CvResult, "mean_f1", new_callable=mocker.PropertyMock, side_effect=[0.1, 0.5, 0.5, 0.5, 0.9, 0.5])

        with pytest.raises(InvariantViolation):
            MetaClassifierService.select(results)


class TestMetaClassifierService:
    """Test cases for MetaClassifierService."""

    def test_majority_truth_beats_every_model(self):
        """Test Change >= 0 when the truth is the majority vote."""
        entries, predictions = majority_fixture()

        report = fast_service().run_meta(entries, predictions, MetricKind.AV)

        assert report.n_train + report.n_test == 150
        assert report.n_test == 30
        assert report.change >= 0
        assert all(report.meta_accuracy >= acc for acc in report.model_accuracy.values())
        best_f1 = max(result.mean_f1 for result in report.cv_results)
        selected = next(result for result in report.cv_results if result.selected)
        assert selected.kind is report.selected
        assert selected.mean_f1 == best_f1
        assert len(selected.fold_f1) == 5

    def test_identical_models(self):
        """Test that six copies of one model add no information."""
        rng = np.random.default_rng(5)
        entries, predictions = [], []
        for i in range(100):
            truth = "N" if rng.random() < 0.5 else "L"
            guess = truth if rng.random() < 0.7 else ("L" if truth == "N" else "N")
            entry = make_entry(i + 1, vector_text=f"AV:{truth}/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H")
            entries.append(entry)
            predictions += [make_prediction(entry.cve_id, m, {MetricKind.AV: guess}, entry.truth) for m in MODELS]

        report = fast_service().run_meta(entries, predictions, MetricKind.AV)

        assert len(set(report.model_accuracy.values())) == 1
        assert report.meta_accuracy == pytest.approx(report.best_individual)
        assert report.change == pytest.approx(0.0)

    def test_deterministic(self):
        """Test that two runs with one seed agree."""
        entries, predictions = majority_fixture(80)

        first = fast_service().run_meta(entries, predictions, MetricKind.AV)
        second = fast_service().run_meta(entries, predictions, MetricKind.AV)

        assert first.selected is second.selected
        assert [r.fold_f1 for r in first.cv_results] == [r.fold_f1 for r in second.cv_results]
        assert first.meta_accuracy == second.meta_accuracy

    def test_run_all_skips_single_class_metrics(self):
        """Test that constant metrics are skipped."""
        entries, predictions = majority_fixture(60)

        reports, skipped = fast_service(kinds=[MetaModelKind.LOGISTIC_REGRESSION]).run_all(entries, predictions)

        assert list(reports) == [MetricKind.AV]
        assert MetricKind.AC in skipped and MetricKind.AV not in skipped
        assert len(skipped) == 7

    def test_single_sample_class_is_dropped(self):
        """Test that a class with one sample is dropped with the rest kept."""
        entries, predictions = majority_fixture(60)
        odd = make_entry(999, vector_text="AV:P/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H")
        entries.append(odd)
        predictions += [make_prediction(odd.cve_id, m, {}, odd.truth) for m in MODELS]

        report = fast_service(kinds=[MetaModelKind.LOGISTIC_REGRESSION]).run_meta(entries, predictions, MetricKind.AV)

        assert report.dropped_classes == ["P"]
        assert report.classes == ("N", "L")

    def test_coverage_mismatch(self):
        """Test a model missing one CVE."""
        entries, predictions = majority_fixture(20)

        with pytest.raises(CoverageMismatch):
            fast_service().run_meta(entries, predictions[:-1], MetricKind.AV)


if __name__ == "__main__":
    pytest.main([__file__])
