"""Classifiers used by the selectors and the evaluation harness.

Logistic regression is full-batch gradient descent on the L2-regularized
log loss over internally standardized columns. The random forest is bagged
CART on Gini impurity with per-split feature subsampling; Gini decrease
is accumulated into feature importances while the trees grow.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Union

import numpy as np

from . import _cart
from .dataset import Dataset
from .errors import DataError
from .seeding import derive_seed

MODEL_VERSION = 1


def gini_impurity(p: float) -> float:
    """Binary node impurity ``2 p (1 - p)`` for class-1 fraction ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return 2.0 * p * (1.0 - p)


@dataclass(frozen=True)
class LogRegConfig:
    learning_rate: float = 0.1
    n_iter: int = 500
    l2: float = 1e-4
    seed: int = 0
    checkpoint_every: int = 50


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    # None -> ceil(sqrt(m)) columns per split
    max_features: int | None = None
    min_samples_split: int = 2
    seed: int = 0


@dataclass(frozen=True, eq=False)
class LogRegModel:
    features: tuple[int, ...]
    weights: np.ndarray
    bias: float
    config: LogRegConfig
    standardized_weights: np.ndarray | None = None
    loss_history: tuple[float, ...] = ()

    def coefficient_of(self) -> dict[int, float]:
        """Feature id -> standardized coefficient (raw weight if unavailable)."""
        w = self.weights if self.standardized_weights is None else self.standardized_weights
        return dict(zip(self.features, w.tolist()))

    def to_dict(self) -> dict:
        return {
            "model_version": MODEL_VERSION,
            "type": "logreg",
            "features": list(self.features),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "standardized_weights": None if self.standardized_weights is None
            else self.standardized_weights.tolist(),
            "config": asdict(self.config),
        }


@dataclass(frozen=True, eq=False)
class ForestModel:
    features: tuple[int, ...]
    config: ForestConfig
    roots: np.ndarray
    feature: np.ndarray  # column index into ``features``, -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importances: np.ndarray = field(repr=False)

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def importance_of(self) -> dict[int, float]:
        return dict(zip(self.features, self.importances.tolist()))

    def to_dict(self) -> dict:
        return {
            "model_version": MODEL_VERSION,
            "type": "forest",
            "features": list(self.features),
            "config": asdict(self.config),
            "roots": self.roots.tolist(),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "importances": self.importances.tolist(),
        }


Model = Union[LogRegModel, ForestModel]


def model_from_dict(doc: dict) -> Model:
    if doc.get("model_version") != MODEL_VERSION:
        raise DataError(f"unsupported model_version {doc.get('model_version')!r}")
    feats = tuple(doc["features"])
    if doc["type"] == "logreg":
        sw = doc.get("standardized_weights")
        return LogRegModel(feats, np.array(doc["weights"], dtype=np.float64),
                           float(doc["bias"]), LogRegConfig(**doc["config"]),
                           None if sw is None else np.array(sw, dtype=np.float64))
    if doc["type"] == "forest":
        return ForestModel(
            feats, ForestConfig(**doc["config"]),
            roots=np.array(doc["roots"], dtype=np.int64),
            feature=np.array(doc["feature"], dtype=np.int64),
            threshold=np.array(doc["threshold"], dtype=np.float64),
            left=np.array(doc["left"], dtype=np.int64),
            right=np.array(doc["right"], dtype=np.int64),
            value=np.array(doc["value"], dtype=np.float64),
            importances=np.array(doc["importances"], dtype=np.float64),
        )
    raise DataError(f"unknown model type {doc['type']!r}")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return asdict(self)


def confusion(truth, predicted) -> ConfusionMatrix:
    """Counts with anomaly (1) as the positive class."""
    truth = np.asarray(truth).astype(np.int64)
    predicted = np.asarray(predicted).astype(np.int64)
    if truth.shape != predicted.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {predicted.shape}")
    tp = int(np.sum((truth == 1) & (predicted == 1)))
    fp = int(np.sum((truth == 0) & (predicted == 1)))
    fn = int(np.sum((truth == 1) & (predicted == 0)))
    tn = int(np.sum((truth == 0) & (predicted == 0)))
    return ConfusionMatrix(tp, fp, fn, tn)


# -- array-level training ------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _logloss(X, y, w, b, l2) -> float:
    z = X @ w + b
    # log(1 + exp(-z)) for y=1 and log(1 + exp(z)) for y=0
    loss = np.logaddexp(0.0, np.where(y == 1, -z, z)).mean()
    return float(loss + 0.5 * l2 * (w @ w))


def fit_logreg(X: np.ndarray, y: np.ndarray, config: LogRegConfig = LogRegConfig()):
    """Gradient descent from zero weights on standardized columns.

    Returns (weights, bias, standardized_weights, losses). ``weights`` and
    ``bias`` act on the raw ``X``; ``standardized_weights`` are the
    optimizer's coefficients on z-scored columns, comparable across
    columns of different spread. ``losses`` are the objective at every
    ``checkpoint_every`` iterations, starting from the zero model.
    """
    n, m = X.shape
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (X - mu) / sd
    w = np.zeros(m)
    b = 0.0
    yf = y.astype(np.float64)
    losses = [_logloss(Z, y, w, b, config.l2)]
    for it in range(1, config.n_iter + 1):
        err = _sigmoid(Z @ w + b) - yf
        w = w - config.learning_rate * (Z.T @ err / n + config.l2 * w)
        b = b - config.learning_rate * float(err.mean())
        if config.checkpoint_every and it % config.checkpoint_every == 0:
            losses.append(_logloss(Z, y, w, b, config.l2))
    raw_w = w / sd
    raw_b = b - float(raw_w @ mu)
    return raw_w, raw_b, w, tuple(losses)


def _tree_job(X, y, presorted, config: ForestConfig, n_sub: int, t: int):
    seed = derive_seed(config.seed, "tree", t)
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    counts = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.int64)
    return _cart.build_tree(X, y, counts, presorted, config.max_depth, n_sub,
                            derive_seed(seed, "split"), config.min_samples_split)


def fit_forest(X: np.ndarray, y: np.ndarray, config: ForestConfig = ForestConfig(), jobs: int = 1):
    """Grow ``config.n_trees`` trees; returns flat tree arrays and importances.

    Tree ``t`` draws its bootstrap and split columns from a seed derived from
    (config.seed, t), so ``jobs`` never changes the result.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    m = X.shape[1]
    n_sub = config.max_features or math.ceil(math.sqrt(m))
    n_sub = max(1, min(n_sub, m))
    presorted = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            trees = list(pool.map(lambda t: _tree_job(X, y, presorted, config, n_sub, t),
                                  range(config.n_trees)))
    else:
        trees = [_tree_job(X, y, presorted, config, n_sub, t) for t in range(config.n_trees)]

    roots, feats, thrs, lefts, rights, vals = [], [], [], [], [], []
    imp = np.zeros(m)
    offset = 0
    for f, thr, lft, rgt, val, ti in trees:
        roots.append(offset)
        feats.append(f)
        thrs.append(thr)
        lefts.append(np.where(lft >= 0, lft + offset, -1))
        rights.append(np.where(rgt >= 0, rgt + offset, -1))
        vals.append(val)
        imp += ti
        offset += len(f)
    total = imp.sum()
    if total > 0:
        imp = imp / total
    return dict(
        roots=np.array(roots, dtype=np.int64),
        feature=np.concatenate(feats), threshold=np.concatenate(thrs),
        left=np.concatenate(lefts), right=np.concatenate(rights),
        value=np.concatenate(vals), importances=imp,
    )


# -- dataset-level API ---------------------------------------------------------

def _check_training(d: Dataset, features) -> tuple[int, ...]:
    feats = tuple(sorted(features))
    if not feats:
        raise DataError("empty feature set")
    for f in feats:
        if not 0 <= f < d.n_features:
            raise DataError(f"feature id {f} not present")
    if len(np.unique(d.labels)) < 2:
        raise DataError("training data must contain both classes")
    return feats


def train_logreg(d: Dataset, features: Iterable[int], config: LogRegConfig = LogRegConfig()) -> LogRegModel:
    feats = _check_training(d, features)
    w, b, sw, losses = fit_logreg(d.matrix(feats), d.labels, config)
    return LogRegModel(feats, w, b, config, sw, losses)


def train_random_forest(d: Dataset, features: Iterable[int], config: ForestConfig = ForestConfig(),
                        jobs: int = 1) -> ForestModel:
    feats = _check_training(d, features)
    arrays = fit_forest(d.matrix(feats), d.labels, config, jobs=jobs)
    return ForestModel(feats, config, **arrays)


def predict_proba_logreg(model: LogRegModel, X: np.ndarray) -> np.ndarray:
    return _sigmoid(X @ model.weights + model.bias)


def predict_arrays(model: Model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, LogRegModel):
        return (predict_proba_logreg(model, X) >= 0.5).astype(np.int8)
    votes = _cart.forest_votes(np.ascontiguousarray(X, dtype=np.float64), model.roots, model.feature,
                               model.threshold, model.left, model.right, model.value)
    return (2 * votes >= model.n_trees).astype(np.int8)


def predict(model: Model, d: Dataset, features: Iterable[int]) -> np.ndarray:
    """Binary labels; probability 0.5 and tied forest votes go to class 1."""
    feats = tuple(sorted(features))
    if feats != model.features:
        raise DataError("feature subset differs from the one the model was trained on")
    return predict_arrays(model, d.matrix(feats))
