"""Deterministic submodels bound to a restricted feature subset.

Three families, all trained without any stochastic component so retraining
on identical data reproduces identical parameters bit for bit:

* ``multinomial-logistic``: softmax regression fit by full-batch gradient
  descent with a fixed step size and iteration count, zero-initialized.
* ``nearest-centroid``: per-class centroids; the logit for a class is the
  negative Euclidean distance to its centroid, so logits order meaningfully.
* ``linear-least-squares``: ridge-regularized linear regression solved in
  closed form, for real-valued targets.

Columns are standardized using the training columns' mean and standard
deviation; constant columns map to zero.  A trained submodel only ever looks
at its own columns of the full feature vector, so perturbing any other
dimension cannot change its output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InvalidConfigurationError, TrainingError

FAMILY_LOGISTIC = "multinomial-logistic"
FAMILY_CENTROID = "nearest-centroid"
FAMILY_LEAST_SQUARES = "linear-least-squares"

FAMILIES = (FAMILY_LOGISTIC, FAMILY_CENTROID, FAMILY_LEAST_SQUARES)

MODEL_SCHEMA_VERSION = 1

# Finite stand-in logit for classes a submodel never saw during training.
ABSENT_CLASS_LOGIT = -1e18


@dataclass(frozen=True)
class SubmodelSpec:
    """Learner family plus every knob that affects the fitted parameters."""

    family: str
    learning_rate: float = 0.1
    iterations: int = 500
    ridge: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise InvalidConfigurationError(f"unknown learner family {self.family!r}")
        if self.family == FAMILY_LOGISTIC:
            if self.learning_rate <= 0 or self.iterations < 1:
                raise InvalidConfigurationError(
                    "logistic training needs a positive learning rate and iteration count"
                )
        if self.ridge < 0:
            raise InvalidConfigurationError("ridge coefficient must be >= 0")


@dataclass(frozen=True)
class TrainedSubmodel:
    family: str
    feature_subset: tuple[int, ...]  # 1-based feature indices, sorted
    params: dict[str, np.ndarray]
    num_labels: int | None = None  # None for regression
    loss_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def is_classifier(self) -> bool:
        return self.num_labels is not None

    def restrict(self, x: np.ndarray) -> np.ndarray:
        """Slice and standardize a full d-vector down to this submodel's columns."""
        cols = np.array([j - 1 for j in self.feature_subset], dtype=np.intp)
        if x.ndim != 1:
            raise DataError(f"expected a 1-d feature vector, got shape {x.shape}")
        if cols.size and cols.max() >= x.shape[0]:
            raise DataError(
                f"feature vector of length {x.shape[0]} too short for subset "
                f"max index {int(cols.max()) + 1}"
            )
        z = x[cols].astype(np.float64)
        return _standardize(z, self.params["mean"], self.params["scale"])

    def logits(self, x: np.ndarray) -> np.ndarray:
        if not self.is_classifier:
            raise DataError("regression submodel has no logits")
        z = self.restrict(x)
        if self.family == FAMILY_LOGISTIC:
            return self.params["weights"] @ z + self.params["bias"]
        if self.family == FAMILY_CENTROID:
            diffs = self.params["centroids"] - z[None, :]
            out = -np.sqrt(np.sum(diffs * diffs, axis=1))
            seen = self.params["seen"].astype(bool)
            out = np.where(seen, out, ABSENT_CLASS_LOGIT)
            return out
        raise DataError(f"family {self.family!r} is not a classifier")

    def predict_label(self, x: np.ndarray) -> int:
        # np.argmax returns the first maximizer, i.e. the smallest label index.
        return int(np.argmax(self.logits(x)))

    def predict_value(self, x: np.ndarray) -> float:
        if self.family != FAMILY_LEAST_SQUARES:
            raise DataError("predict_value is only defined for regression submodels")
        z = self.restrict(x)
        return float(self.params["weights"] @ z + self.params["bias"])


def train_submodel(
    spec: SubmodelSpec,
    columns: np.ndarray,
    targets: np.ndarray,
    feature_subset: tuple[int, ...],
    num_labels: int | None = None,
) -> TrainedSubmodel:
    """Fit one submodel on its restricted feature matrix.

    ``columns`` must already be sliced down to ``feature_subset`` (same
    column order as the sorted subset).  Classification targets are class
    indices in ``0..num_labels-1``.
    """
    spec.validate()
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2:
        raise DataError(f"expected a 2-d column matrix, got shape {columns.shape}")
    if columns.shape[0] < 1:
        raise TrainingError("empty training set")
    if columns.shape[1] != len(feature_subset):
        raise DataError(
            f"column count {columns.shape[1]} does not match subset size {len(feature_subset)}"
        )
    if not np.isfinite(columns).all():
        raise DataError("non-finite feature values in training columns")

    mean = columns.mean(axis=0)
    scale = columns.std(axis=0)
    z = _standardize(columns, mean, scale)

    if spec.family == FAMILY_LEAST_SQUARES:
        y = np.asarray(targets, dtype=np.float64)
        if not np.isfinite(y).all():
            raise DataError("non-finite regression targets")
        params = _fit_least_squares(z, y, spec.ridge)
        params.update(mean=mean, scale=scale)
        return TrainedSubmodel(spec.family, tuple(feature_subset), params, None)

    if num_labels is None or num_labels < 2:
        raise InvalidConfigurationError("classification requires num_labels >= 2")
    y_idx = np.asarray(targets, dtype=np.int64)
    if y_idx.min() < 0 or y_idx.max() >= num_labels:
        raise DataError("class indices outside 0..num_labels-1")

    if spec.family == FAMILY_CENTROID:
        params = _fit_centroids(z, y_idx, num_labels)
        params.update(mean=mean, scale=scale)
        return TrainedSubmodel(spec.family, tuple(feature_subset), params, num_labels)

    params, losses = _fit_logistic(z, y_idx, num_labels, spec)
    params.update(mean=mean, scale=scale)
    return TrainedSubmodel(
        spec.family, tuple(feature_subset), params, num_labels, tuple(losses)
    )


def submodel_logits(model: TrainedSubmodel, x: np.ndarray) -> np.ndarray:
    """Per-label logits of ``model`` on a full-width feature vector."""
    return model.logits(np.asarray(x, dtype=np.float64))


def _standardize(values: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    safe = np.where(scale > 0, scale, 1.0)
    out = (values - mean) / safe
    return np.where(scale > 0, out, 0.0)


def _fit_least_squares(z: np.ndarray, y: np.ndarray, ridge: float) -> dict:
    n, p = z.shape
    design = np.hstack([z, np.ones((n, 1))])
    gram = design.T @ design
    if ridge > 0:
        reg = ridge * np.eye(p + 1)
        reg[p, p] = 0.0  # intercept is not penalized
        gram = gram + reg
    coef, *_ = np.linalg.lstsq(gram, design.T @ y, rcond=None)
    return {"weights": coef[:p], "bias": np.asarray(coef[p])}


def _fit_centroids(z: np.ndarray, y_idx: np.ndarray, num_labels: int) -> dict:
    p = z.shape[1]
    centroids = np.zeros((num_labels, p))
    seen = np.zeros(num_labels, dtype=np.int8)
    for label in range(num_labels):
        mask = y_idx == label
        if mask.any():
            centroids[label] = z[mask].mean(axis=0)
            seen[label] = 1
    return {"centroids": centroids, "seen": seen}


def _fit_logistic(
    z: np.ndarray, y_idx: np.ndarray, num_labels: int, spec: SubmodelSpec
) -> tuple[dict, list[float]]:
    n, p = z.shape
    weights = np.zeros((num_labels, p))
    bias = np.zeros(num_labels)
    onehot = np.zeros((n, num_labels))
    onehot[np.arange(n), y_idx] = 1.0
    losses: list[float] = []
    for _ in range(spec.iterations):
        scores = z @ weights.T + bias
        scores -= scores.max(axis=1, keepdims=True)
        expo = np.exp(scores)
        probs = expo / expo.sum(axis=1, keepdims=True)
        nll = -np.mean(np.log(probs[np.arange(n), y_idx] + 1e-300))
        losses.append(nll + 0.5 * spec.ridge * float(np.sum(weights * weights)) / n)
        grad = (probs - onehot).T @ z / n + spec.ridge * weights / n
        grad_b = (probs - onehot).mean(axis=0)
        weights -= spec.learning_rate * grad
        bias -= spec.learning_rate * grad_b
    return {"weights": weights, "bias": bias}, losses


# JSON parameter dumps round-trip exactly: Python serializes floats with
# their shortest round-trip representation.

def submodel_to_dict(model: TrainedSubmodel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "family": model.family,
        "feature_subset": [j - 1 for j in model.feature_subset],
        "num_labels": model.num_labels,
        "params": {k: np.asarray(v).tolist() for k, v in model.params.items()},
        "loss_history": list(model.loss_history),
    }


def submodel_from_dict(doc: dict) -> TrainedSubmodel:
    params = {}
    for key, value in doc["params"].items():
        dtype = np.int8 if key == "seen" else np.float64
        params[key] = np.asarray(value, dtype=dtype)
    return TrainedSubmodel(
        family=doc["family"],
        feature_subset=tuple(j + 1 for j in doc["feature_subset"]),
        params=params,
        num_labels=doc.get("num_labels"),
        loss_history=tuple(doc.get("loss_history", ())),
    )


def save_submodel(model: TrainedSubmodel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(submodel_to_dict(model), fh)
        fh.write("\n")


def load_submodel(path) -> TrainedSubmodel:
    with open(path, encoding="utf-8") as fh:
        return submodel_from_dict(json.load(fh))
