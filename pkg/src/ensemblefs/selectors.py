"""Correlation pre-filter and the four one-at-a-time elimination selectors.

Every selector runs all the way down to a single surviving feature and
records the order in which features were dropped. Ties always break
toward the lower feature id.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Dataset, stratified_kfold
from .errors import DataError
from .learners import ForestConfig, LogRegConfig, fit_forest, fit_logreg
from .scoring import cross_val_score
from .seeding import derive_seed

logger = logging.getLogger(__name__)

RFE = "RFE"
SBS = "SBS"
UNIVARIATE = "UNIVARIATE"
IMPORTANCE = "IMPORTANCE"
SELECTORS = (RFE, SBS, UNIVARIATE, IMPORTANCE)


@dataclass(frozen=True)
class EliminationTrace:
    selector: str
    start_set: tuple[int, ...]
    order: tuple[int, ...]
    scores: tuple[float, ...] = ()
    seed: int = 0
    config: Mapping = field(default_factory=dict)

    def __post_init__(self):
        start = tuple(sorted(self.start_set))
        object.__setattr__(self, "start_set", start)
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if not start:
            raise DataError("trace needs a nonempty start set")
        if len(set(self.order)) != len(self.order):
            raise DataError("elimination order repeats a feature")
        if not set(self.order) <= set(start):
            raise DataError("elimination order leaves the start set")
        if len(self.order) != len(start) - 1:
            raise DataError(f"trace must eliminate {len(start) - 1} features, got {len(self.order)}")

    @property
    def m(self) -> int:
        return len(self.start_set)

    def surviving(self, t: int) -> frozenset[int]:
        """Features left after ``t`` eliminations, ``0 <= t <= m - 1``."""
        if not 0 <= t < self.m:
            raise IndexError(f"iteration {t} outside 0..{self.m - 1}")
        return frozenset(self.start_set) - frozenset(self.order[:t])

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        d = {
            "selector": self.selector,
            "start_set": list(self.start_set),
            "order": list(self.order),
            "scores": list(self.scores),
            "seed": self.seed,
            "config": dict(self.config),
        }
        if names is not None:
            d["order_names"] = [names[i] for i in self.order]
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> EliminationTrace:
        return cls(doc["selector"], tuple(doc["start_set"]), tuple(doc["order"]),
                   tuple(doc.get("scores", ())), int(doc.get("seed", 0)), dict(doc.get("config", {})))


@dataclass(frozen=True)
class CorrelationReport:
    kept: frozenset[int]
    dropped: tuple[tuple[int, int, float], ...]
    threshold: float

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        d = {
            "threshold": self.threshold,
            "kept": sorted(self.kept),
            "dropped": [{"id": a, "partner": b, "abs_corr": c} for a, b, c in self.dropped],
        }
        if names is not None:
            d["kept_names"] = [names[i] for i in sorted(self.kept)]
            for entry in d["dropped"]:
                entry["name"] = names[entry["id"]]
                entry["partner_name"] = names[entry["partner"]]
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> CorrelationReport:
        return cls(frozenset(doc["kept"]),
                   tuple((e["id"], e["partner"], e["abs_corr"]) for e in doc["dropped"]),
                   float(doc["threshold"]))


# -- round 1 -------------------------------------------------------------------

def pearson_corr(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("need two equal-length columns of at least 2 values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0 or syy == 0:
        raise ValueError("correlation undefined for a constant column")
    r = (dx @ dy) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def correlation_prefilter(d: Dataset, threshold: float = 0.9,
                          features: Iterable[int] | None = None) -> CorrelationReport:
    """Greedy redundancy removal over the numeric columns of ``d``.

    Pairs (i, j), i < j, are visited in ascending order among features
    still kept; when ``|corr| > threshold`` the higher-indexed ``j`` goes.
    """
    if not 0.0 < threshold <= 1.0:
        raise DataError(f"threshold must lie in (0, 1], got {threshold}")
    ids = sorted(d.numeric_ids() if features is None else features)
    X = d.matrix(ids)
    spread = X.max(axis=0) - X.min(axis=0) if len(X) else np.zeros(len(ids))
    if np.any(spread == 0):
        bad = [d.names[ids[k]] for k in np.flatnonzero(spread == 0)]
        raise DataError(f"constant columns reach the pre-filter: {bad}")
    corr = np.corrcoef(X, rowvar=False) if len(ids) > 1 else np.ones((1, 1))
    corr = np.atleast_2d(corr)
    alive = [True] * len(ids)
    dropped = []
    for a in range(len(ids)):
        if not alive[a]:
            continue
        for b in range(a + 1, len(ids)):
            if alive[b] and abs(corr[a, b]) > threshold:
                alive[b] = False
                dropped.append((ids[b], ids[a], float(min(1.0, abs(corr[a, b])))))
    for fid, partner, c in dropped:
        logger.info("pre-filter drops %s (|corr| %.4f with %s)", d.names[fid], c, d.names[partner])
    kept = frozenset(i for i, ok in zip(ids, alive) if ok)
    return CorrelationReport(kept, tuple(dropped), float(threshold))


# -- univariate ----------------------------------------------------------------

def chi_square_score(x, labels) -> float:
    """Chi-square statistic of a nonnegative column against binary labels.

    The column's value mass is treated as frequency: per class the observed
    mass is the sum of ``x`` over that class and the expected mass is the
    total times the class prior.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if x.shape != labels.shape:
        raise ValueError("x and labels differ in length")
    if np.any(x < 0):
        raise ValueError("chi-square scoring needs nonnegative values")
    total = x.sum()
    if total == 0:
        raise ValueError("chi-square undefined for an all-zero column")
    score = 0.0
    for c in (0, 1):
        mask = labels == c
        expected = total * mask.mean()
        if expected > 0:
            observed = x[mask].sum()
            score += (observed - expected) ** 2 / expected
    return float(score)


def _check_start(d: Dataset, features) -> tuple[int, ...]:
    feats = tuple(sorted(set(features)))
    if not feats:
        raise DataError("empty start set")
    numeric = d.numeric_ids()
    for f in feats:
        if f not in numeric:
            raise DataError(f"feature {f} is not a numeric column")
    return feats


def univariate_trace(d: Dataset, features: Iterable[int], seed: int = 0) -> EliminationTrace:
    """Static ranking: drop features in ascending chi-square score."""
    feats = _check_start(d, features)
    scores = {f: chi_square_score(d.column(f), d.labels) for f in feats}
    ranked = sorted(feats, key=lambda f: (scores[f], f))
    order = ranked[:-1]
    return EliminationTrace(UNIVARIATE, feats, tuple(order), tuple(scores[f] for f in order), seed,
                            {"score": "chi2"})


# -- RFE -----------------------------------------------------------------------

def rfe_trace(d: Dataset, features: Iterable[int], seed: int = 0,
              config: LogRegConfig = LogRegConfig()) -> EliminationTrace:
    """Refit logistic regression each round and drop the smallest |coefficient|.

    Coefficients are compared on standardized columns.
    """
    feats = _check_start(d, features)
    surviving = list(feats)
    order, scores = [], []
    for it in range(len(feats) - 1):
        cfg = replace(config, seed=derive_seed(seed, RFE, it))
        _, _, coef, _ = fit_logreg(d.matrix(surviving), d.labels, cfg)
        mags = np.abs(coef)
        k = min(range(len(surviving)), key=lambda i: (mags[i], surviving[i]))
        order.append(surviving.pop(k))
        scores.append(float(mags[k]))
    return EliminationTrace(RFE, feats, tuple(order), tuple(scores), seed,
                            {"learner": "LR", **asdict(config)})


# -- importance ----------------------------------------------------------------

def importance_trace(d: Dataset, features: Iterable[int], seed: int = 0,
                     config: ForestConfig = ForestConfig(), jobs: int = 1) -> EliminationTrace:
    """Refit a forest each round and drop the lowest Gini importance."""
    feats = _check_start(d, features)
    surviving = list(feats)
    order, scores = [], []
    for it in range(len(feats) - 1):
        cfg = replace(config, seed=derive_seed(seed, IMPORTANCE, it))
        imp = fit_forest(d.matrix(surviving), d.labels, cfg, jobs=jobs)["importances"]
        k = min(range(len(surviving)), key=lambda i: (imp[i], surviving[i]))
        order.append(surviving.pop(k))
        scores.append(float(imp[k]))
    return EliminationTrace(IMPORTANCE, feats, tuple(order), tuple(scores), seed,
                            {"learner": "RF", **asdict(config)})


# -- SBS -----------------------------------------------------------------------

@dataclass(frozen=True)
class SBSCriterion:
    folds: int = 3
    learner: ForestConfig | LogRegConfig = ForestConfig(n_trees=25)


def sbs_trace(d: Dataset, features: Iterable[int], seed: int = 0,
              criterion: SBSCriterion = SBSCriterion(), jobs: int = 1) -> EliminationTrace:
    """Sequential backward selection down to one feature.

    Each round scores every candidate removal by mean cross-validated F1 of
    the criterion learner on the remaining features and drops the feature
    whose removal scores highest. The fold plan is fixed for the whole
    trace; learner seeds derive from (seed, iteration, candidate).
    """
    feats = _check_start(d, features)
    plan = stratified_kfold(d, criterion.folds, derive_seed(seed, SBS, "folds"))
    surviving = list(feats)
    order, scores = [], []
    for it in range(len(feats) - 1):
        def crit(f, it=it):
            rest = [g for g in surviving if g != f]
            mean, _ = cross_val_score(d, rest, criterion.learner, criterion.folds,
                                      seed=derive_seed(seed, SBS, it, f), plan=plan)
            return mean
        if jobs > 1:
            with ThreadPoolExecutor(jobs) as pool:
                vals = list(pool.map(crit, surviving))
        else:
            vals = [crit(f) for f in surviving]
        # highest criterion wins; ties go to the lower id
        k = min(range(len(surviving)), key=lambda i: (-vals[i], surviving[i]))
        order.append(surviving.pop(k))
        scores.append(float(vals[k]))
    return EliminationTrace(SBS, feats, tuple(order), tuple(scores), seed,
                            {"folds": criterion.folds, "metric": "f1",
                             "learner": type(criterion.learner).__name__,
                             **asdict(criterion.learner)})


# -- orchestration -------------------------------------------------------------

@dataclass(frozen=True)
class SelectorConfig:
    rfe: LogRegConfig = LogRegConfig()
    importance: ForestConfig = ForestConfig()
    sbs: SBSCriterion = SBSCriterion()


def run_selector(name: str, d: Dataset, features: Iterable[int], seed: int,
                 config: SelectorConfig = SelectorConfig(), jobs: int = 1) -> EliminationTrace:
    s = derive_seed(seed, "selector", name)
    if name == RFE:
        return rfe_trace(d, features, s, config.rfe)
    if name == SBS:
        return sbs_trace(d, features, s, config.sbs, jobs=jobs)
    if name == UNIVARIATE:
        return univariate_trace(d, features, s)
    if name == IMPORTANCE:
        return importance_trace(d, features, s, config.importance, jobs=jobs)
    raise DataError(f"unknown selector {name!r}; expected one of {SELECTORS}")


def run_selectors(names: Sequence[str], d: Dataset, features: Iterable[int], seed: int,
                  config: SelectorConfig = SelectorConfig(), jobs: int = 1) -> dict[str, EliminationTrace]:
    """Run selectors independently, concurrently when ``jobs > 1``."""
    feats = tuple(sorted(features))
    if jobs > 1:
        with ThreadPoolExecutor(min(jobs, len(names))) as pool:
            futures = {n: pool.submit(run_selector, n, d, feats, seed, config, 1) for n in names}
            return {n: futures[n].result() for n in names}
    return {n: run_selector(n, d, feats, seed, config) for n in names}
