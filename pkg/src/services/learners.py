"""
Meta-model learners.

Numpy implementations of the four meta-model kinds: multinomial logistic
regression, a random forest of Gini trees, a two-hidden-layer ReLU network
and a soft-voting ensemble of the other three. Every learner works on
integer class indices 0..n_classes-1, is deterministic under its seed and
serialises to plain JSON-compatible parameters.
"""

import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type

import numpy as np

from src.models.errors import (
    ConfigError,
    DimensionMismatch,
    InvariantViolation,
    LengthMismatch,
    NonFiniteFeature,
    SchemaMismatch,
    SingleClass,
)

TIE_TOLERANCE = 1e-12


class MetaModelKind(str, Enum):
    """Meta-model kinds, in tie-break order."""

    VOTING = "Voting"
    LOGISTIC_REGRESSION = "LogisticRegression"
    RANDOM_FOREST = "RandomForest"
    NEURAL_NETWORK = "NeuralNetwork"


def argmax_canonical(probabilities: np.ndarray) -> np.ndarray:
    """Row-wise argmax; values within 1e-12 of the max go to the lowest index."""
    best = probabilities.max(axis=1, keepdims=True)
    return np.argmax(probabilities >= best - TIE_TOLERANCE, axis=1)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[y]


def _as_matrix(X: Any) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"Features must be 2-dimensional, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise NonFiniteFeature("Features contain NaN or infinite values")
    return X


class Standardizer:
    """Zero-mean, unit-variance scaling; constant columns keep scale 1."""

    def __init__(self, mean: Optional[np.ndarray] = None, scale: Optional[np.ndarray] = None):
        self.mean = mean
        self.scale = scale

    def fit(self, X: np.ndarray) -> "Standardizer":
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale = np.where(std > 0, std, 1.0)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    def to_params(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "Standardizer":
        return cls(np.asarray(params["mean"], dtype=float), np.asarray(params["scale"], dtype=float))


class MetaLearner(ABC):
    """Common train / predict / probability contract."""

    kind: MetaModelKind

    def __init__(self, n_classes: int, seed: int = 0):
        if n_classes < 2:
            raise SingleClass("A meta model needs at least two classes")
        self.n_classes = n_classes
        self.seed = seed
        self.n_features: Optional[int] = None

    def fit(self, X: Any, y: Any) -> "MetaLearner":
        """
        Train on features X and class indices y.

        Raises:
            NonFiniteFeature: If X has NaN or infinite values
            LengthMismatch: If X and y differ in length
            SingleClass: If y holds fewer than two distinct classes
        """
        X = _as_matrix(X)
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise LengthMismatch(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if y.size == 0:
            raise SingleClass("No training samples")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise InvariantViolation(f"Labels must lie in 0..{self.n_classes - 1}")
        if np.unique(y).size < 2:
            raise SingleClass("Training labels hold a single class")
        self.n_features = X.shape[1]
        self._fit(X, y)
        return self

    def _check_predict_input(self, X: Any) -> np.ndarray:
        if self.n_features is None:
            raise InvariantViolation("Model is not trained")
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"Model expects {self.n_features} features, got {X.shape[1]}")
        return X

    def predict_proba(self, X: Any) -> np.ndarray:
        """Class-probability matrix, rows summing to 1."""
        return self._predict_proba(self._check_predict_input(X))

    def predict(self, X: Any) -> np.ndarray:
        return argmax_canonical(self.predict_proba(X))

    def to_params(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "seed": self.seed,
            "hyperparameters": self.hyperparameters(),
            "parameters": self._parameters(),
        }

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "MetaLearner":
        learner = cls(n_classes=params["n_classes"], seed=params["seed"], **params["hyperparameters"])
        learner.n_features = params["n_features"]
        learner._load_parameters(params["parameters"])
        return learner

    @abstractmethod
    def hyperparameters(self) -> Dict[str, Any]:
        ...

    @abstractmethod
    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        ...

    @abstractmethod
    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _parameters(self) -> Dict[str, Any]:
        ...

    @abstractmethod
    def _load_parameters(self, params: Dict[str, Any]) -> None:
        ...


# Logistic regression

def logistic_loss_and_grad(
    W: np.ndarray,
    b: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    l2: float
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Mean cross-entropy of softmax(XW + b) plus (l2 / 2n)·‖W‖².

    Returns:
        (loss, dW, db); the bias is not penalised
    """
    n = X.shape[0]
    logits = X @ W + b
    log_p = log_softmax(logits)
    loss = -(Y * log_p).sum() / n + l2 / (2 * n) * (W ** 2).sum()
    residual = np.exp(log_p) - Y
    grad_W = X.T @ residual / n + (l2 / n) * W
    grad_b = residual.sum(axis=0) / n
    return float(loss), grad_W, grad_b


class LogisticRegressionLearner(MetaLearner):
    """
    Multinomial logistic regression on standardised features.

    Full-batch gradient descent with step 1/L, L being a Lipschitz bound of
    the gradient, until the gradient norm drops below tol or max_iter steps.
    """

    kind = MetaModelKind.LOGISTIC_REGRESSION

    def __init__(
        self,
        n_classes: int,
        seed: int = 0,
        l2: float = 1.0,
        tol: float = 1e-6,
        max_iter: int = 5000
    ):
        super().__init__(n_classes, seed)
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.scaler = Standardizer()
        self.W: Optional[np.ndarray] = None
        self.b: Optional[np.ndarray] = None
        self.n_iter = 0

    def hyperparameters(self) -> Dict[str, Any]:
        return {"l2": self.l2, "tol": self.tol, "max_iter": self.max_iter}

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        Xs = self.scaler.fit(X).transform(X)
        Y = one_hot(y, self.n_classes)
        n, d = Xs.shape

        augmented = np.hstack([Xs, np.ones((n, 1))])
        curvature = np.linalg.eigvalsh(augmented.T @ augmented / n).max()
        step = 1.0 / (0.5 * curvature + self.l2 / n)

        W = np.zeros((d, self.n_classes))
        b = np.zeros(self.n_classes)
        for iteration in range(self.max_iter):
            _, grad_W, grad_b = logistic_loss_and_grad(W, b, Xs, Y, self.l2)
            if math.sqrt((grad_W ** 2).sum() + (grad_b ** 2).sum()) < self.tol:
                break
            W -= step * grad_W
            b -= step * grad_b
        self.n_iter = iteration + 1 if self.max_iter else 0
        self.W, self.b = W, b

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.scaler.transform(X) @ self.W + self.b)

    @property
    def coefficients(self) -> np.ndarray:
        """Weights on standardised features (features × classes)."""
        return self.W

    def _parameters(self) -> Dict[str, Any]:
        return {"scaler": self.scaler.to_params(), "W": self.W.tolist(), "b": self.b.tolist()}

    def _load_parameters(self, params: Dict[str, Any]) -> None:
        self.scaler = Standardizer.from_params(params["scaler"])
        self.W = np.asarray(params["W"], dtype=float)
        self.b = np.asarray(params["b"], dtype=float)


# Random forest

def gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    shares = counts / total
    return float(1.0 - (shares ** 2).sum())


def _best_split(x: np.ndarray, y: np.ndarray, n_classes: int) -> Optional[Tuple[float, float]]:
    """
    Best threshold on one feature by weighted child Gini.

    Returns:
        (weighted impurity, threshold) or None when the feature is constant
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None

    counts = one_hot(y[order], n_classes)
    left = np.cumsum(counts, axis=0)[:-1]
    total = counts.sum(axis=0)
    right = total - left
    n = len(x)
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left

    gini_left = 1.0 - ((left / n_left[:, None]) ** 2).sum(axis=1)
    gini_right = 1.0 - ((right / n_right[:, None]) ** 2).sum(axis=1)
    impurity = (n_left * gini_left + n_right * gini_right) / n
    impurity[~valid] = np.inf

    position = int(np.argmin(impurity))
    return float(impurity[position]), float((xs[position] + xs[position + 1]) / 2.0)


class DecisionTree:
    """
    Gini tree stored as flat arrays; feature -1 marks a leaf.

    Samples with x[feature] <= threshold go left.
    """

    def __init__(self, n_classes: int, max_features: int, rng: np.random.Generator):
        self.n_classes = n_classes
        self.max_features = max_features
        self.rng = rng
        self.feature = np.zeros(0, dtype=np.int64)
        self.threshold = np.zeros(0)
        self.left = np.zeros(0, dtype=np.int64)
        self.right = np.zeros(0, dtype=np.int64)
        self.value = np.zeros((0, n_classes))
        self.importances: Optional[np.ndarray] = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTree":
        n_features = X.shape[1]
        feature: List[int] = []
        threshold: List[float] = []
        left: List[int] = []
        right: List[int] = []
        value: List[np.ndarray] = []
        importances = np.zeros(n_features)

        def new_node() -> int:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(np.zeros(self.n_classes))
            return len(feature) - 1

        stack = [(new_node(), np.arange(X.shape[0]))]
        while stack:
            node, indices = stack.pop()
            counts = np.bincount(y[indices], minlength=self.n_classes).astype(float)
            value[node] = counts / counts.sum()
            if len(indices) < 2 or counts.max() == len(indices):
                continue

            best: Optional[Tuple[float, int, float]] = None
            for rank, f in enumerate(self.rng.permutation(n_features)):
                # past the feature budget, keep drawing only until a split exists
                if rank >= self.max_features and best is not None:
                    break
                found = _best_split(X[indices, f], y[indices], self.n_classes)
                if found is not None and (best is None or found[0] < best[0]):
                    best = (found[0], int(f), found[1])

            if best is None:
                continue

            impurity, f, cut = best
            goes_left = X[indices, f] <= cut
            importances[f] += len(indices) * (gini(counts) - impurity)

            left_node, right_node = new_node(), new_node()
            feature[node] = f
            threshold[node] = cut
            left[node] = left_node
            right[node] = right_node
            stack.append((right_node, indices[~goes_left]))
            stack.append((left_node, indices[goes_left]))

        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.vstack(value)
        total = importances.sum()
        self.importances = importances / total if total > 0 else importances
        return self

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index per sample."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feature = self.feature[node]
            internal = feature >= 0
            if not internal.any():
                return node
            go_left = X[rows, np.where(internal, feature, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_params(self) -> Dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_params(cls, params: Dict[str, Any], n_classes: int) -> "DecisionTree":
        tree = cls(n_classes, max_features=1, rng=np.random.default_rng(0))
        tree.feature = np.asarray(params["feature"], dtype=np.int64)
        tree.threshold = np.asarray(params["threshold"], dtype=float)
        tree.left = np.asarray(params["left"], dtype=np.int64)
        tree.right = np.asarray(params["right"], dtype=np.int64)
        tree.value = np.asarray(params["value"], dtype=float).reshape(-1, n_classes)
        return tree


class RandomForestLearner(MetaLearner):
    """Bootstrap forest of unpruned Gini trees with sqrt feature sampling."""

    kind = MetaModelKind.RANDOM_FOREST

    def __init__(self, n_classes: int, seed: int = 0, n_trees: int = 100, bootstrap: bool = True):
        super().__init__(n_classes, seed)
        if n_trees < 1:
            raise ConfigError("n_trees must be at least 1")
        self.n_trees = n_trees
        self.bootstrap = bootstrap
        self.trees: List[DecisionTree] = []
        self.feature_importances: Optional[np.ndarray] = None

    def hyperparameters(self) -> Dict[str, Any]:
        return {"n_trees": self.n_trees, "bootstrap": self.bootstrap}

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        rng = np.random.default_rng(self.seed)
        n, d = X.shape
        max_features = max(1, int(math.sqrt(d)))
        self.trees = []
        for _ in range(self.n_trees):
            sample = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.n_classes, max_features, rng)
            self.trees.append(tree.fit(X[sample], y[sample]))
        self.feature_importances = np.mean([tree.importances for tree in self.trees], axis=0)

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.mean([tree.predict_proba(X) for tree in self.trees], axis=0)

    def _parameters(self) -> Dict[str, Any]:
        return {
            "trees": [tree.to_params() for tree in self.trees],
            "feature_importances": self.feature_importances.tolist(),
        }

    def _load_parameters(self, params: Dict[str, Any]) -> None:
        self.trees = [DecisionTree.from_params(tree, self.n_classes) for tree in params["trees"]]
        self.feature_importances = np.asarray(params["feature_importances"], dtype=float)


# Neural network

def mlp_forward(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    X: np.ndarray
) -> Tuple[List[np.ndarray], np.ndarray]:
    """Hidden activations (ReLU) and output logits."""
    activations = [X]
    for W, b in zip(weights[:-1], biases[:-1]):
        activations.append(np.maximum(activations[-1] @ W + b, 0.0))
    logits = activations[-1] @ weights[-1] + biases[-1]
    return activations, logits


def mlp_loss_and_grads(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    X: np.ndarray,
    Y: np.ndarray,
    alpha: float
) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """
    Mean cross-entropy plus (alpha / 2n)·Σ‖W‖² and its gradients.

    Returns:
        (loss, weight gradients, bias gradients)
    """
    n = X.shape[0]
    activations, logits = mlp_forward(weights, biases, X)
    log_p = log_softmax(logits)
    loss = -(Y * log_p).sum() / n + alpha / (2 * n) * sum((W ** 2).sum() for W in weights)

    grad_W: List[np.ndarray] = [np.zeros_like(W) for W in weights]
    grad_b: List[np.ndarray] = [np.zeros_like(b) for b in biases]
    delta = (np.exp(log_p) - Y) / n
    for layer in range(len(weights) - 1, -1, -1):
        grad_W[layer] = activations[layer].T @ delta + (alpha / n) * weights[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (activations[layer] > 0)
    return float(loss), grad_W, grad_b


class NeuralNetworkLearner(MetaLearner):
    """
    ReLU network with softmax output, trained by mini-batch gradient descent.

    Step size 1e-3 by default. alpha adds an L2 term and is off unless set.
    Early stopping watches the loss on a held-back validation slice and
    restores the best parameters.
    """

    kind = MetaModelKind.NEURAL_NETWORK

    def __init__(
        self,
        n_classes: int,
        seed: int = 0,
        hidden_layers: Sequence[int] = (100, 50),
        learning_rate: float = 1e-3,
        alpha: float = 0.0,
        batch_size: int = 200,
        max_epochs: int = 200,
        validation_fraction: float = 0.1,
        patience: int = 10,
        tol: float = 1e-4
    ):
        super().__init__(n_classes, seed)
        self.hidden_layers = tuple(int(size) for size in hidden_layers)
        self.learning_rate = learning_rate
        self.alpha = alpha
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.validation_fraction = validation_fraction
        self.patience = patience
        self.tol = tol
        self.scaler = Standardizer()
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        self.epochs_run = 0

    def hyperparameters(self) -> Dict[str, Any]:
        return {
            "hidden_layers": list(self.hidden_layers),
            "learning_rate": self.learning_rate,
            "alpha": self.alpha,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "validation_fraction": self.validation_fraction,
            "patience": self.patience,
            "tol": self.tol,
        }

    def _init_params(self, n_features: int, rng: np.random.Generator) -> None:
        sizes = [n_features, *self.hidden_layers, self.n_classes]
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-limit, limit, size=fan_out))

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        rng = np.random.default_rng(self.seed)
        Xs = self.scaler.fit(X).transform(X)
        Y = one_hot(y, self.n_classes)
        self._init_params(Xs.shape[1], rng)

        order = rng.permutation(Xs.shape[0])
        n_val = int(round(self.validation_fraction * Xs.shape[0])) if Xs.shape[0] >= 10 else 0
        val_idx, train_idx = order[:n_val], order[n_val:]
        X_train, Y_train = Xs[train_idx], Y[train_idx]
        X_watch, Y_watch = (Xs[val_idx], Y[val_idx]) if n_val else (X_train, Y_train)

        params = self.weights + self.biases
        batch_size = min(self.batch_size, X_train.shape[0])
        best_loss = np.inf
        best_params = [p.copy() for p in params]
        stale = 0

        for epoch in range(self.max_epochs):
            permutation = rng.permutation(X_train.shape[0])
            for start in range(0, X_train.shape[0], batch_size):
                batch = permutation[start:start + batch_size]
                _, grad_W, grad_b = mlp_loss_and_grads(
                    self.weights, self.biases, X_train[batch], Y_train[batch], self.alpha
                )
                for param, grad in zip(params, grad_W + grad_b):
                    param -= self.learning_rate * grad

            _, logits = mlp_forward(self.weights, self.biases, X_watch)
            watch_loss = float(-(Y_watch * log_softmax(logits)).sum() / X_watch.shape[0])
            self.epochs_run = epoch + 1

            if watch_loss < best_loss - self.tol:
                best_loss = watch_loss
                best_params = [p.copy() for p in params]
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break

        n_layers = len(self.weights)
        self.weights = best_params[:n_layers]
        self.biases = best_params[n_layers:]

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        _, logits = mlp_forward(self.weights, self.biases, self.scaler.transform(X))
        return softmax(logits)

    def _parameters(self) -> Dict[str, Any]:
        return {
            "scaler": self.scaler.to_params(),
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    def _load_parameters(self, params: Dict[str, Any]) -> None:
        self.scaler = Standardizer.from_params(params["scaler"])
        self.weights = [np.asarray(W, dtype=float) for W in params["weights"]]
        self.biases = [np.asarray(b, dtype=float) for b in params["biases"]]


# Soft voting

class VotingLearner(MetaLearner):
    """Mean of the class-probability outputs of the member learners."""

    kind = MetaModelKind.VOTING

    def __init__(
        self,
        n_classes: int,
        seed: int = 0,
        members: Optional[Sequence[MetaLearner]] = None,
        member_hyperparameters: Optional[Dict[str, Dict[str, Any]]] = None
    ):
        super().__init__(n_classes, seed)
        self.member_hyperparameters = member_hyperparameters or {}
        self.members: List[MetaLearner] = list(members or [])
        if self.members:
            self.n_features = self.members[0].n_features

    @classmethod
    def from_members(cls, members: Sequence[MetaLearner], seed: int = 0) -> "VotingLearner":
        """Wrap already trained learners."""
        if not members:
            raise InvariantViolation("Voting needs at least one member")
        dims = {member.n_features for member in members}
        if len(dims) != 1:
            raise DimensionMismatch("Voting members were trained on different feature sets")
        return cls(n_classes=members[0].n_classes, seed=seed, members=members)

    def hyperparameters(self) -> Dict[str, Any]:
        return {"member_hyperparameters": self.member_hyperparameters}

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        self.members = [
            make_learner(kind, self.n_classes, self.seed, self.member_hyperparameters.get(kind.value))
            .fit(X, y)
            for kind in VOTING_MEMBERS
        ]

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.mean([member.predict_proba(X) for member in self.members], axis=0)

    def _parameters(self) -> Dict[str, Any]:
        return {"members": [member.to_params() for member in self.members]}

    def _load_parameters(self, params: Dict[str, Any]) -> None:
        self.members = [learner_from_params(member) for member in params["members"]]


VOTING_MEMBERS = (
    MetaModelKind.LOGISTIC_REGRESSION,
    MetaModelKind.RANDOM_FOREST,
    MetaModelKind.NEURAL_NETWORK,
)

# Further kinds (e.g. SVM, gradient boosting) plug in here.
LEARNER_REGISTRY: Dict[str, Type[MetaLearner]] = {
    MetaModelKind.VOTING.value: VotingLearner,
    MetaModelKind.LOGISTIC_REGRESSION.value: LogisticRegressionLearner,
    MetaModelKind.RANDOM_FOREST.value: RandomForestLearner,
    MetaModelKind.NEURAL_NETWORK.value: NeuralNetworkLearner,
}


def make_learner(
    kind: Any,
    n_classes: int,
    seed: int = 0,
    hyperparameters: Optional[Dict[str, Any]] = None
) -> MetaLearner:
    name = kind.value if isinstance(kind, Enum) else str(kind)
    try:
        factory: Callable[..., MetaLearner] = LEARNER_REGISTRY[name]
    except KeyError:
        raise ConfigError(f"Unknown meta model kind: {name}")
    return factory(n_classes=n_classes, seed=seed, **(hyperparameters or {}))


def learner_from_params(params: Dict[str, Any]) -> MetaLearner:
    try:
        cls = LEARNER_REGISTRY[params["kind"]]
    except KeyError:
        raise SchemaMismatch(f"Unknown meta model kind: {params.get('kind')}")
    return cls.from_params(params)
