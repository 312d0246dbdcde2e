"""The inexpensive local students: distance-weighted k-NN and a small MLP.

Both produce a full label distribution plus the two gate signals: entropy of
that distribution (natural log) and the cosine distance between the query and
the weighted centroid of its k nearest cached neighbors.

Voting rule for the k-NN student: each neighbor carries weight w = 1/d^2
(clamped near d=0), per-class scores are the summed weights W_c, and the
distribution is softmax(W_c) over the classes present in the neighborhood
(classes with no neighbor get probability zero). ``entropy_domain="all"``
switches the softmax to run over every class, absent ones entering at W_c=0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .cache import Cache, CacheEntry, Neighbor
from .domain import EmbeddedInstance, Instance, LabelSpace, cosine_distance, shannon_entropy
from .errors import EmptyCacheError, EmptyNeighborhoodError, EmptyTrainingError, IoError
from .validation import check_matching_labels, check_matrix

# Below this norm the weighted centroid has no usable direction (exact or
# near-exact cancellation); report the maximum cosine distance so the gate
# falls back to the teacher.
_CENTROID_NORM_FLOOR = 1e-12
_CENTROID_SENTINEL = 2.0


@dataclass(frozen=True)
class StudentPrediction:
    """Predicted label, class distribution, and the raw gate signals."""

    label: str
    probs: np.ndarray
    entropy: float
    centroid_distance: float
    neighbors_used: int


@dataclass(frozen=True)
class MlpConfig:
    """Hyperparameters of the MLP student (defaults follow the tuned values
    for the 77-class intent setup: 1024 hidden units, dropout 0.22,
    learning rate 1.6e-5, retraining every 100 teacher calls)."""

    hidden_units: int = 1024
    dropout_rate: float = 0.22
    learning_rate: float = 1.6e-5
    epochs: int = 200
    batch_size: int = 32
    retrain_every: int = 100
    seed: int = 0
    patience: int = 20

    def __post_init__(self):
        if self.hidden_units < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("hidden_units, epochs and batch_size must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.retrain_every < 1:
            raise ValueError("retrain_every must be >= 1")


def weighted_centroid(neighbors: Sequence[Neighbor]) -> np.ndarray:
    """Normalized-weight average of the neighbor vectors."""
    if not neighbors:
        raise EmptyNeighborhoodError("weighted centroid of zero neighbors")
    weights = np.array([nb.weight for nb in neighbors], dtype=np.float64)
    weights /= weights.sum()
    vectors = np.stack([nb.vector for nb in neighbors])
    return weights @ vectors


def knn_class_probs(
    neighbors: Sequence[Neighbor], space: LabelSpace, entropy_domain: str = "present"
) -> np.ndarray:
    """Distribution over all labels from the weighted neighbor vote."""
    if not neighbors:
        raise EmptyNeighborhoodError("class probabilities of zero neighbors")
    if entropy_domain not in ("present", "all"):
        raise ValueError(f"unknown entropy_domain {entropy_domain!r}")
    scores = np.zeros(len(space), dtype=np.float64)
    present = np.zeros(len(space), dtype=bool)
    for nb in neighbors:
        idx = space.index(nb.label)
        scores[idx] += nb.weight
        present[idx] = True
    probs = np.zeros(len(space), dtype=np.float64)
    domain = present if entropy_domain == "present" else np.ones(len(space), dtype=bool)
    shifted = np.exp(scores[domain] - scores[domain].max())
    probs[domain] = shifted / shifted.sum()
    return probs


def _centroid_signal(query: np.ndarray, neighbors: Sequence[Neighbor]) -> float:
    centroid = weighted_centroid(neighbors)
    if float(np.linalg.norm(centroid)) < _CENTROID_NORM_FLOOR:
        return _CENTROID_SENTINEL
    return cosine_distance(query, centroid)


def _prediction(
    probs: np.ndarray, space: LabelSpace, centroid_distance: float, neighbors_used: int
) -> StudentPrediction:
    probs = np.asarray(probs, dtype=np.float64)
    probs.setflags(write=False)
    return StudentPrediction(
        label=space.name(int(np.argmax(probs))),
        probs=probs,
        entropy=shannon_entropy(probs),
        centroid_distance=centroid_distance,
        neighbors_used=neighbors_used,
    )


def knn_predict(
    cache: Cache, query, k: int, entropy_domain: str = "present"
) -> StudentPrediction:
    """Full k-NN student prediction against the cache."""
    neighbors = cache.k_nearest(query, k)
    probs = knn_class_probs(neighbors, cache.label_space, entropy_domain)
    return _prediction(
        probs, cache.label_space, _centroid_signal(np.asarray(query, float), neighbors),
        len(neighbors),
    )


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = np.exp(z - z.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


class MlpClassifier(BaseEstimator, ClassifierMixin):
    """One-hidden-layer MLP: linear -> ReLU -> dropout -> linear -> softmax.

    Cross-entropy loss, plain mini-batch SGD, He-style uniform init, inverted
    dropout during training only. Deterministic for a fixed seed: init, batch
    order and dropout masks all derive from one generator.
    """

    def __init__(
        self,
        hidden_units: int = 1024,
        dropout_rate: float = 0.22,
        learning_rate: float = 1.6e-5,
        epochs: int = 200,
        batch_size: int = 32,
        seed: int = 0,
        patience: int = 20,
    ):
        self.hidden_units = hidden_units
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.patience = patience

    def _init_weights(self, rng: np.random.Generator, n_in: int, n_out: int):
        self.w1_ = rng.uniform(-1.0, 1.0, (n_in, self.hidden_units)) * np.sqrt(6.0 / n_in)
        self.b1_ = np.zeros(self.hidden_units)
        self.w2_ = rng.uniform(-1.0, 1.0, (self.hidden_units, n_out)) * np.sqrt(
            6.0 / self.hidden_units
        )
        self.b2_ = np.zeros(n_out)

    def _forward(self, X: np.ndarray, dropout_rng: Optional[np.random.Generator] = None):
        pre_act = X @ self.w1_ + self.b1_
        hidden = _relu(pre_act)
        mask = None
        if dropout_rng is not None and self.dropout_rate > 0.0:
            mask = (
                dropout_rng.random(hidden.shape) >= self.dropout_rate
            ) / (1.0 - self.dropout_rate)
            hidden = hidden * mask
        probs = _softmax(hidden @ self.w2_ + self.b2_)
        return pre_act, hidden, mask, probs

    def _batch_grads(self, X, y_idx, dropout_rng):
        """Mean cross-entropy over the batch and its parameter gradients."""
        n = X.shape[0]
        pre_act, hidden, mask, probs = self._forward(X, dropout_rng)
        loss = -float(np.mean(np.log(probs[np.arange(n), y_idx] + 1e-300)))
        delta_out = probs.copy()
        delta_out[np.arange(n), y_idx] -= 1.0
        delta_out /= n
        grad_w2 = hidden.T @ delta_out
        grad_b2 = delta_out.sum(axis=0)
        delta_hidden = delta_out @ self.w2_.T
        if mask is not None:
            delta_hidden = delta_hidden * mask
        delta_hidden[pre_act <= 0.0] = 0.0
        grad_w1 = X.T @ delta_hidden
        grad_b1 = delta_hidden.sum(axis=0)
        return loss, (grad_w1, grad_b1, grad_w2, grad_b2)

    def loss_and_gradients(self, X, y):
        """Diagnostic hook (dropout off): mean CE loss and gradients for (X, y)."""
        X = check_matrix(X, dim=getattr(self, "n_features_in_", None))
        y_idx = np.asarray(y, dtype=np.int64)
        loss, grads = self._batch_grads(X, y_idx, dropout_rng=None)
        return loss, {"w1": grads[0], "b1": grads[1], "w2": grads[2], "b2": grads[3]}

    def fit(self, X, y, n_classes: Optional[int] = None, dev: Optional[tuple] = None):
        """Train from scratch on integer class indices ``y``.

        ``n_classes`` fixes the output width when ``y`` does not cover every
        class (routine in the few-shot regime). ``dev=(X_dev, y_dev)``
        enables early stopping once dev loss stops improving for
        ``patience`` epochs.
        """
        if len(np.asarray(X)) == 0:
            raise EmptyTrainingError("cannot train on an empty set")
        X = check_matrix(X)
        y_idx = check_matching_labels(X, y).astype(np.int64)
        if y_idx.min() < 0:
            raise ValueError("class indices must be >= 0")
        self.n_classes_ = int(n_classes if n_classes is not None else y_idx.max() + 1)
        if y_idx.max() >= self.n_classes_:
            raise ValueError("class index out of range")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.arange(self.n_classes_)

        rng = np.random.default_rng(self.seed)
        self._init_weights(rng, self.n_features_in_, self.n_classes_)

        best = None
        best_loss = np.inf
        stale = 0
        for _ in range(self.epochs):
            order = rng.permutation(X.shape[0])
            for start in range(0, X.shape[0], self.batch_size):
                batch = order[start : start + self.batch_size]
                _, grads = self._batch_grads(X[batch], y_idx[batch], dropout_rng=rng)
                self.w1_ -= self.learning_rate * grads[0]
                self.b1_ -= self.learning_rate * grads[1]
                self.w2_ -= self.learning_rate * grads[2]
                self.b2_ -= self.learning_rate * grads[3]
            if dev is not None:
                X_dev = check_matrix(dev[0], dim=self.n_features_in_)
                dev_loss, _ = self._batch_grads(
                    X_dev, np.asarray(dev[1], dtype=np.int64), dropout_rng=None
                )
                if dev_loss < best_loss - 1e-12:
                    best_loss = dev_loss
                    best = (self.w1_.copy(), self.b1_.copy(), self.w2_.copy(), self.b2_.copy())
                    stale = 0
                else:
                    stale += 1
                    if stale >= self.patience:
                        break
        if best is not None:
            self.w1_, self.b1_, self.w2_, self.b2_ = best
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = check_matrix(X, dim=self.n_features_in_)
        return self._forward(X, dropout_rng=None)[3]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def save(self, path) -> None:
        """Persist weights + config; load() reproduces predictions exactly."""
        meta = {
            "version": 1,
            "params": self.get_params(),
            "n_classes": self.n_classes_,
            "n_features": self.n_features_in_,
        }
        try:
            np.savez(
                Path(path),
                meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
                w1=self.w1_,
                b1=self.b1_,
                w2=self.w2_,
                b2=self.b2_,
            )
        except OSError as exc:
            raise IoError(f"cannot write model to {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "MlpClassifier":
        try:
            with np.load(Path(path)) as payload:
                meta = json.loads(bytes(payload["meta"]).decode("utf-8"))
                model = cls(**meta["params"])
                model.n_classes_ = int(meta["n_classes"])
                model.n_features_in_ = int(meta["n_features"])
                model.classes_ = np.arange(model.n_classes_)
                model.w1_ = payload["w1"]
                model.b1_ = payload["b1"]
                model.w2_ = payload["w2"]
                model.b2_ = payload["b2"]
        except OSError as exc:
            raise IoError(f"cannot read model from {path}: {exc}") from exc
        return model


class WeightedKnnClassifier(BaseEstimator, ClassifierMixin):
    """Array-facing adapter around the cache-backed k-NN student.

    ``fit`` seeds an in-memory cache with (X, y); ``predict_proba`` applies
    the same clamped 1/d^2 voting the online router uses.
    """

    def __init__(self, k: int = 5, entropy_domain: str = "present"):
        self.k = k
        self.entropy_domain = entropy_domain

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_matching_labels(X, y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        space = LabelSpace([str(c) for c in self.classes_])
        entries = []
        for i, (row, label) in enumerate(zip(X, y)):
            inst = EmbeddedInstance(Instance(id=f"mem-{i}", text=f"mem-{i}"), row)
            entries.append((inst, str(label)))
        self.cache_ = Cache.seeded(entries, space, dim=X.shape[1])
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = check_matrix(X, dim=self.cache_.dim)
        return np.stack(
            [knn_predict(self.cache_, row, self.k, self.entropy_domain).probs for row in X]
        )

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def _training_arrays(entries: Sequence[CacheEntry], space: LabelSpace):
    X = np.stack([e.embedded.embedding for e in entries])
    y = np.array([space.index(e.teacher_label) for e in entries], dtype=np.int64)
    return X, y


def mlp_train(
    entries: Sequence[CacheEntry],
    config: MlpConfig,
    space: LabelSpace,
    dev: Optional[tuple] = None,
) -> MlpClassifier:
    """Train a fresh MLP on cache entries (no warm start; reproducible per seed)."""
    entries = [e for e in entries if not e.invalid]
    if not entries:
        raise EmptyTrainingError("no valid cache entries to train on")
    model = MlpClassifier(
        hidden_units=config.hidden_units,
        dropout_rate=config.dropout_rate,
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
        patience=config.patience,
    )
    X, y = _training_arrays(entries, space)
    return model.fit(X, y, n_classes=len(space), dev=dev)


def mlp_predict(
    model: MlpClassifier, cache: Cache, query, k: int
) -> StudentPrediction:
    """MLP probabilities/entropy; centroid distance from the same k-NN neighborhood."""
    neighbors = cache.k_nearest(query, k)
    probs = model.predict_proba(np.asarray(query, dtype=np.float64).reshape(1, -1))[0]
    return _prediction(
        probs, cache.label_space, _centroid_signal(np.asarray(query, float), neighbors),
        len(neighbors),
    )


class KnnStudent:
    """Cache-is-the-memory student; retraining is a no-op by construction."""

    kind = "knn"

    def __init__(self, k: int = 5, entropy_domain: str = "present"):
        self.k = k
        self.entropy_domain = entropy_domain

    def initialize(self, cache: Cache) -> None:
        pass

    def predict(self, cache: Cache, query) -> StudentPrediction:
        return knn_predict(cache, query, self.k, self.entropy_domain)

    def on_teacher_call(self, cache: Cache) -> bool:
        return False


class MlpStudent:
    """MLP student retrained from the full cache every ``retrain_every`` teacher calls."""

    kind = "mlp"

    def __init__(self, space: LabelSpace, config: MlpConfig, k: int = 5):
        self.space = space
        self.config = config
        self.k = k
        self.model: Optional[MlpClassifier] = None
        self.calls_since_train = 0
        self.retrain_count = 0

    def initialize(self, cache: Cache) -> None:
        if cache.valid_count() > 0:
            self.model = mlp_train(cache.training_entries(), self.config, self.space)
        self.calls_since_train = 0

    def predict(self, cache: Cache, query) -> StudentPrediction:
        if self.model is None:
            self.initialize(cache)
        if self.model is None:
            raise EmptyCacheError("no trained model and no usable cache entries")
        return mlp_predict(self.model, cache, query, self.k)

    def on_teacher_call(self, cache: Cache) -> bool:
        self.calls_since_train += 1
        if self.calls_since_train < self.config.retrain_every:
            return False
        if cache.valid_count() == 0:
            # nothing trainable yet; try again on the next call
            return False
        self.model = mlp_train(cache.training_entries(), self.config, self.space)
        self.calls_since_train = 0
        self.retrain_count += 1
        return True


def maybe_retrain(student, cache: Cache) -> bool:
    """Post-teacher-call hook: retrains MLP students on cadence, no-op for k-NN."""
    return student.on_teacher_call(cache)
