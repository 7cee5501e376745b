"""Metrics, learner dispatch, cross-validation and hold-out evaluation."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Union

import numpy as np

from .dataset import Dataset, FoldPlan, stratified_kfold
from .errors import DataError
from .learners import (ConfusionMatrix, ForestConfig, LogRegConfig, LogRegModel, ForestModel,
                       confusion, fit_forest, fit_logreg, predict_arrays)
from .seeding import derive_seed

LearnerConfig = Union[LogRegConfig, ForestConfig]


def learner_name(cfg: LearnerConfig) -> str:
    if isinstance(cfg, LogRegConfig):
        return "LR"
    if isinstance(cfg, ForestConfig):
        return "RF"
    raise TypeError(f"unsupported learner config {type(cfg).__name__}")


def fit_arrays(cfg: LearnerConfig, X: np.ndarray, y: np.ndarray, features: tuple[int, ...], jobs: int = 1):
    if isinstance(cfg, LogRegConfig):
        w, b, sw, losses = fit_logreg(X, y, cfg)
        return LogRegModel(features, w, b, cfg, sw, losses)
    if isinstance(cfg, ForestConfig):
        return ForestModel(features, cfg, **fit_forest(X, y, cfg, jobs=jobs))
    raise TypeError(f"unsupported learner config {type(cfg).__name__}")


# -- metrics -------------------------------------------------------------------

def f1_score(cm: ConfusionMatrix) -> float:
    """``2 tp / (2 tp + fp + fn)``; 0.0 when nothing is positive in either
    truth or prediction (see :func:`is_degenerate`)."""
    denom = 2 * cm.tp + cm.fp + cm.fn
    return 2 * cm.tp / denom if denom else 0.0


def is_degenerate(cm: ConfusionMatrix) -> bool:
    return 2 * cm.tp + cm.fp + cm.fn == 0


def precision(cm: ConfusionMatrix) -> float:
    return cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0


def recall(cm: ConfusionMatrix) -> float:
    return cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0


def accuracy(cm: ConfusionMatrix) -> float:
    return (cm.tp + cm.tn) / cm.total if cm.total else 0.0


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    cm: ConfusionMatrix
    train_seconds: float = 0.0
    test_seconds: float = 0.0
    degenerate: bool = False

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix, train_seconds=0.0, test_seconds=0.0) -> Metrics:
        return cls(accuracy(cm), precision(cm), recall(cm), f1_score(cm), cm,
                   train_seconds, test_seconds, is_degenerate(cm))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cm"] = self.cm.to_dict()
        return d


# -- cross-validation ----------------------------------------------------------

def cross_val_score(d: Dataset, features: Iterable[int], learner: LearnerConfig, folds: int = 5,
                    seed: int = 0, plan: FoldPlan | None = None, jobs: int = 1):
    """Mean and population stdev of F1 over stratified folds of ``d``.

    Returns None for an empty feature set. Fold ``i`` trains with the
    learner seed ``derive_seed(seed, "cv", i)``.
    """
    feats = tuple(sorted(features))
    if not feats:
        return None
    if plan is None:
        plan = stratified_kfold(d, folds, seed)
    X = d.matrix(feats)
    y = d.labels

    def one(item):
        i, (tr, te) = item
        cfg = replace(learner, seed=derive_seed(seed, "cv", i))
        model = fit_arrays(cfg, X[tr], y[tr], feats)
        return f1_score(confusion(y[te], predict_arrays(model, X[te])))

    items = list(enumerate(plan.folds()))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            scores = list(pool.map(one, items))
    else:
        scores = [one(it) for it in items]
    return float(np.mean(scores)), float(np.std(scores))


def evaluate_candidate(train: Dataset, test: Dataset, features: Iterable[int],
                       learner: LearnerConfig, jobs: int = 1) -> Metrics | None:
    """Fit on all of ``train`` restricted to ``features``, score on ``test``.

    Returns None for an empty feature set.
    """
    feats = tuple(sorted(features))
    if not feats:
        return None
    if train.names != test.names:
        raise DataError("train and test column layouts differ")
    if len(np.unique(train.labels)) < 2:
        raise DataError("training data must contain both classes")
    X = train.matrix(feats)
    t0 = time.perf_counter()
    model = fit_arrays(learner, X, train.labels, feats, jobs=jobs)
    t1 = time.perf_counter()
    pred = predict_arrays(model, test.matrix(feats))
    t2 = time.perf_counter()
    return Metrics.from_confusion(confusion(test.labels, pred), t1 - t0, t2 - t1)
