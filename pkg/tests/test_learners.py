"""
Tests for the meta-model learners.
"""

import numpy as np
import pytest

from src.models.errors import (
    ConfigError,
    DimensionMismatch,
    InvariantViolation,
    LengthMismatch,
    NonFiniteFeature,
    SchemaMismatch,
    SingleClass,
)
from src.services.learners import (
    DecisionTree,
    LogisticRegressionLearner,
    MetaLearner,
    MetaModelKind,
    NeuralNetworkLearner,
    RandomForestLearner,
    VotingLearner,
    argmax_canonical,
    gini,
    learner_from_params,
    logistic_loss_and_grad,
    make_learner,
    mlp_loss_and_grads,
    one_hot,
)

SMALL_NN = {"hidden_layers": [16], "max_epochs": 60}


def relative_error(a, b):
    return np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8)


def numeric_gradient(f, param, eps=1e-6):
    """Central differences of f() with respect to every entry of param, in place."""
    grad = np.zeros_like(param)
    for index in np.ndindex(param.shape):
        original = param[index]
        param[index] = original + eps
        upper = f()
        param[index] = original - eps
        lower = f()
        param[index] = original
        grad[index] = (upper - lower) / (2 * eps)
    return grad


def separable_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    X[:, 0] += np.where(y == 1, 1.0, -1.0)
    return X, y


class StubLearner(MetaLearner):
    """Always returns the same probability row."""

    kind = MetaModelKind.LOGISTIC_REGRESSION

    def __init__(self, probabilities):
        super().__init__(n_classes=len(probabilities))
        self.row = np.asarray(probabilities, dtype=float)
        self.n_features = 1

    def hyperparameters(self):
        return {}

    def _fit(self, X, y):
        pass

    def _predict_proba(self, X):
        return np.tile(self.row, (X.shape[0], 1))

    def _parameters(self):
        return {}

    def _load_parameters(self, params):
        pass


class TestGradients:
    """Analytic gradients against central finite differences."""

    def test_logistic_gradient(self):
        """Test softmax regression gradients on a 5-sample instance."""
        rng = np.random.default_rng(1)
        X = rng.normal(size=(5, 4))
        Y = one_hot(np.array([0, 1, 2, 1, 0]), 3)
        W = rng.normal(scale=0.5, size=(4, 3))
        b = rng.normal(scale=0.5, size=3)

        _, grad_W, grad_b = logistic_loss_and_grad(W, b, X, Y, l2=1.0)

        loss = lambda: logistic_loss_and_grad(W, b, X, Y, 1.0)[0]
        assert relative_error(grad_W, numeric_gradient(loss, W)).max() < 1e-4
        assert relative_error(grad_b, numeric_gradient(loss, b)).max() < 1e-4

    def test_mlp_gradient(self):
        """Test network gradients layer by layer on a 5-sample instance."""
        rng = np.random.default_rng(2)
        X = rng.normal(size=(5, 4))
        Y = one_hot(np.array([0, 1, 2, 2, 1]), 3)
        sizes = [4, 6, 5, 3]
        weights = [rng.normal(scale=0.7, size=(i, o)) for i, o in zip(sizes[:-1], sizes[1:])]
        biases = [rng.normal(scale=0.3, size=o) for o in sizes[1:]]

        _, grad_W, grad_b = mlp_loss_and_grads(weights, biases, X, Y, alpha=1e-2)

        loss = lambda: mlp_loss_and_grads(weights, biases, X, Y, 1e-2)[0]
        for layer in range(len(weights)):
            assert relative_error(grad_W[layer], numeric_gradient(loss, weights[layer])).max() < 1e-4
            assert relative_error(grad_b[layer], numeric_gradient(loss, biases[layer])).max() < 1e-4


class TestArgmax:
    """Test cases for the canonical argmax."""

    def test_ties_go_to_lowest_index(self):
        """Test exact and near ties."""
        probabilities = np.array([
            [0.5, 0.5, 0.0],
            [0.2, 0.4, 0.4],
            [0.1, 0.45, 0.45 + 1e-15],
            [0.1, 0.3, 0.6],
        ])

        assert argmax_canonical(probabilities).tolist() == [0, 1, 1, 2]


class TestLogisticRegression:
    """Test cases for LogisticRegressionLearner."""

    def test_separable_training_accuracy(self):
        """Test that a linearly separable set is fitted exactly."""
        X, y = separable_data()

        learner = LogisticRegressionLearner(n_classes=2).fit(X, y)

        assert (learner.predict(X) == y).all()
        assert learner.coefficients.shape == (3, 2)

    def test_probabilities_are_distributions(self):
        """Test that rows sum to one."""
        X, y = separable_data()

        proba = LogisticRegressionLearner(n_classes=2, max_iter=200).fit(X, y).predict_proba(X)

        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)
        assert (proba >= 0).all()

    def test_deterministic(self):
        """Test that two fits give identical probabilities."""
        X, y = separable_data()

        first = LogisticRegressionLearner(n_classes=2, max_iter=300).fit(X, y).predict_proba(X)
        second = LogisticRegressionLearner(n_classes=2, max_iter=300).fit(X, y).predict_proba(X)

        assert np.array_equal(first, second)


class TestTrees:
    """Test cases for DecisionTree and RandomForestLearner."""

    def test_gini(self):
        """Test impurity of pure, even and empty nodes."""
        assert gini(np.array([4.0, 0.0])) == 0.0
        assert gini(np.array([2.0, 2.0])) == pytest.approx(0.5)
        assert gini(np.array([1.0, 1.0, 1.0])) == pytest.approx(2 / 3)
        assert gini(np.zeros(3)) == 0.0

    def test_pure_leaf(self):
        """Test that a point in a pure region gets the leaf's class."""
        X = np.array([[0.0], [0.1], [0.2], [1.0], [1.1], [1.2]])
        y = np.array([0, 0, 0, 1, 1, 1])

        tree = DecisionTree(n_classes=2, max_features=1, rng=np.random.default_rng(0)).fit(X, y)

        leaves = tree.apply(X)
        assert (tree.feature[leaves] == -1).all()
        assert tree.predict_proba(np.array([[0.05]]))[0].tolist() == [1.0, 0.0]
        assert tree.predict_proba(np.array([[1.15]]))[0].tolist() == [0.0, 1.0]

    def test_forest_fits_deterministic_function(self):
        """Test training accuracy 1.0 when truth is a function of the features."""
        rng = np.random.default_rng(3)
        X = rng.integers(0, 4, size=(80, 4)).astype(float)
        y = (X[:, 0] + X[:, 2]) % 3

        forest = RandomForestLearner(n_classes=3, seed=7, n_trees=50).fit(X, y)

        assert (forest.predict(X) == y).all()
        assert forest.feature_importances.sum() == pytest.approx(1.0)
        assert forest.feature_importances[0] > forest.feature_importances[1]

    def test_forest_probabilities(self):
        """Test forest probability rows."""
        X, y = separable_data()

        proba = RandomForestLearner(n_classes=2, n_trees=10).fit(X, y).predict_proba(X)

        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)

    def test_invalid_tree_count(self):
        """Test a forest without trees."""
        with pytest.raises(ConfigError):
            RandomForestLearner(n_classes=2, n_trees=0)


class TestNeuralNetwork:
    """Test cases for NeuralNetworkLearner."""

    def test_learns_separable_data(self):
        """Test that the network separates an easy set."""
        X, y = separable_data(100)

        learner = NeuralNetworkLearner(n_classes=2, learning_rate=0.1, batch_size=32, max_epochs=300).fit(X, y)

        assert (learner.predict(X) == y).mean() >= 0.95
        assert 1 <= learner.epochs_run <= 300

    def test_default_layers(self):
        """Test the default architecture and training settings."""
        X, y = separable_data(20)

        learner = NeuralNetworkLearner(n_classes=2, max_epochs=2).fit(X, y)

        assert [W.shape for W in learner.weights] == [(3, 100), (100, 50), (50, 2)]
        settings = learner.hyperparameters()
        assert settings["learning_rate"] == 1e-3
        assert settings["alpha"] == 0.0
        assert (settings["validation_fraction"], settings["patience"]) == (0.1, 10)

    def test_one_epoch_is_one_gradient_step(self):
        """Test that a full-batch epoch moves every parameter by -step * gradient."""
        rng = np.random.default_rng(4)
        X = rng.normal(size=(8, 3))
        y = np.array([0, 1] * 4)

        learner = NeuralNetworkLearner(n_classes=2, seed=3, hidden_layers=[5], max_epochs=1).fit(X, y)

        start = NeuralNetworkLearner(n_classes=2, seed=3, hidden_layers=[5])
        start._init_params(3, np.random.default_rng(3))
        Xs = learner.scaler.transform(X)
        _, grad_W, grad_b = mlp_loss_and_grads(start.weights, start.biases, Xs, one_hot(y, 2), 0.0)
        for before, grad, after in zip(start.weights + start.biases, grad_W + grad_b, learner.weights + learner.biases):
            assert np.allclose(after, before - 1e-3 * grad)

    def test_early_stopping(self):
        """Test that patience ends training before the epoch limit."""
        X, y = separable_data(100)

        learner = NeuralNetworkLearner(
            n_classes=2, learning_rate=0.1, batch_size=32, max_epochs=5000, patience=3
        ).fit(X, y)

        assert learner.epochs_run < 5000


class TestVoting:
    """Test cases for VotingLearner."""

    def test_tie_goes_to_canonical_class(self):
        """Test (0.6,0.4), (0.8,0.2), (0.1,0.9) averaging to an exact tie."""
        members = [StubLearner([0.6, 0.4]), StubLearner([0.8, 0.2]), StubLearner([0.1, 0.9])]

        voting = VotingLearner.from_members(members)

        assert voting.predict_proba(np.zeros((1, 1)))[0] == pytest.approx([0.5, 0.5])
        assert voting.predict(np.zeros((1, 1)))[0] == 0

    def test_fit_trains_three_members(self):
        """Test that fitting builds one member per other kind."""
        X, y = separable_data()
        hyperparameters = {"RandomForest": {"n_trees": 5}, "NeuralNetwork": SMALL_NN}

        voting = VotingLearner(n_classes=2, member_hyperparameters=hyperparameters).fit(X, y)

        assert [m.kind for m in voting.members] == [
            MetaModelKind.LOGISTIC_REGRESSION, MetaModelKind.RANDOM_FOREST, MetaModelKind.NEURAL_NETWORK
        ]
        expected = np.mean([m.predict_proba(X) for m in voting.members], axis=0)
        assert np.allclose(voting.predict_proba(X), expected)

    def test_members_must_share_features(self):
        """Test members trained on different feature sets."""
        other = StubLearner([0.5, 0.5])
        other.n_features = 2

        with pytest.raises(DimensionMismatch):
            VotingLearner.from_members([StubLearner([0.5, 0.5]), other])


class TestLearnerContract:
    """Errors and persistence shared by every kind."""

    HYPERPARAMETERS = {
        MetaModelKind.RANDOM_FOREST: {"n_trees": 5},
        MetaModelKind.NEURAL_NETWORK: SMALL_NN,
        MetaModelKind.VOTING: {"member_hyperparameters": {"RandomForest": {"n_trees": 5}, "NeuralNetwork": SMALL_NN}},
    }

    @pytest.mark.parametrize("kind", list(MetaModelKind))
    def test_params_round_trip(self, kind):
        """Test that a reloaded learner predicts identically."""
        X, y = separable_data()
        learner = make_learner(kind, 2, seed=5, hyperparameters=self.HYPERPARAMETERS.get(kind)).fit(X, y)

        reloaded = learner_from_params(learner.to_params())

        assert reloaded.kind is learner.kind
        assert np.allclose(reloaded.predict_proba(X), learner.predict_proba(X))

    @pytest.mark.parametrize("kind", list(MetaModelKind))
    def test_dimension_mismatch(self, kind):
        """Test predicting with the wrong feature width."""
        X, y = separable_data()
        learner = make_learner(kind, 2, hyperparameters=self.HYPERPARAMETERS.get(kind)).fit(X, y)

        with pytest.raises(DimensionMismatch):
            learner.predict(np.zeros((2, 4)))

    def test_non_finite_features(self):
        """Test NaN features."""
        X, y = separable_data()
        X[3, 1] = np.nan

        with pytest.raises(NonFiniteFeature):
            LogisticRegressionLearner(n_classes=2).fit(X, y)

    def test_single_class(self):
        """Test training labels with one class."""
        X, _ = separable_data()

        with pytest.raises(SingleClass):
            LogisticRegressionLearner(n_classes=2).fit(X, np.zeros(len(X), dtype=int))
        with pytest.raises(SingleClass):
            RandomForestLearner(n_classes=1)

    def test_length_mismatch(self):
        """Test features and labels of different length."""
        X, y = separable_data()

        with pytest.raises(LengthMismatch):
            LogisticRegressionLearner(n_classes=2).fit(X, y[:-1])

    def test_untrained(self):
        """Test predicting before fitting."""
        with pytest.raises(InvariantViolation, match="not trained"):
            LogisticRegressionLearner(n_classes=2).predict(np.zeros((1, 3)))

    def test_unknown_kind(self):
        """Test an unregistered kind."""
        with pytest.raises(ConfigError, match="Unknown meta model kind"):
            make_learner("SVM", 2)

    def test_unknown_kind_in_document(self):
        """Test a stored learner document naming an unregistered kind."""
        with pytest.raises(SchemaMismatch, match="Unknown meta model kind"):
            learner_from_params({"kind": "SVM"})

    def test_label_out_of_range(self):
        """Test class indices outside the declared class count."""
        X, y = separable_data()

        with pytest.raises(InvariantViolation, match="Labels must lie in 0..1"):
            LogisticRegressionLearner(n_classes=2).fit(X, y + 1)


if __name__ == "__main__":
    pytest.main([__file__])
