"""End-to-end experiment: data preparation, both selection rounds, ensemble
trajectories, cross-validation curves, hold-out evaluation and reports.

Each stage is a separate function so the CLI can run them one at a time
from saved JSON artifacts and still reproduce a monolithic run.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .config import RunConfig
from .dataset import (Dataset, dropped_constant_columns, encode_all, load_csv, normalize_minmax,
                      read_schema, stratified_kfold, synth_generate)
from .ensemble import EnsembleTrajectory, augment_with_onehot, build_trajectory, trajectories_csv
from .errors import DataError, StageError
from .scoring import (Metrics, accuracy, cross_val_score, evaluate_candidate, f1_score,
                      learner_name, precision, recall)
from .selectors import CorrelationReport, EliminationTrace, correlation_prefilter, run_selectors
from .seeding import derive_seed

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
__all__ = [
    "Metrics", "f1_score", "accuracy", "precision", "recall", "cross_val_score", "evaluate_candidate",
    "PreparedData", "prepare_data", "run_prefilter", "run_traces", "build_trajectories",
    "compute_cv_curves", "evaluate_trajectories", "EvaluationReport", "run_experiment",
    "timing_curve", "timing_trend", "write_report", "strip_timing",
]


class _stage:
    """Re-raise any failure inside the block as a StageError tagged ``name``."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


@dataclass(frozen=True)
class PreparedData:
    train: Dataset
    test: Dataset
    dropped_constant: tuple[str, ...] = ()

    @property
    def numeric_ids(self) -> frozenset[int]:
        return self.train.numeric_ids()

    @property
    def onehot_ids(self) -> frozenset[int]:
        return self.train.onehot_ids()


def _sample(d: Dataset, n: int | None, seed: int, part: str) -> Dataset:
    if n is None or n >= d.n_rows:
        return d
    rng = np.random.default_rng(derive_seed(seed, "sample", part))
    rows = np.sort(rng.choice(d.n_rows, size=n, replace=False))
    out = d.subset_rows(rows)
    return replace(out, provenance=f"{d.provenance}#sample{n}")


def prepare_data(cfg: RunConfig) -> PreparedData:
    """Load or generate, one-hot encode, then min-max scale by training stats."""
    with _stage("load"):
        dropped: list[str] = []
        if cfg.synth is not None:
            s = cfg.synth
            seed = s.seed if s.seed is not None else derive_seed(cfg.seed, "synth")
            train, test = synth_generate(s.n_rows, s.n_informative, s.n_noise, s.n_redundant,
                                         s.flip_prob, seed)
        else:
            schema = read_schema(cfg.data.schema)
            train = _sample(load_csv(cfg.data.train, schema, cfg.data.label),
                            cfg.data.sample_rows, cfg.seed, "train")
            test = _sample(load_csv(cfg.data.test, schema, cfg.data.label, drop_constant=False),
                           cfg.data.sample_rows, cfg.seed, "test")
            dropped = dropped_constant_columns(cfg.data.train, train, schema)
            if test.names != train.names:
                test = _select_columns(test, train.names)
            if len(np.unique(train.labels)) < 2:
                raise DataError("training data must contain both classes")
    with _stage("encode"):
        train, test = encode_all(train, test)
    with _stage("normalize"):
        test = normalize_minmax(train, test)
        train = normalize_minmax(train, train)
    return PreparedData(train, test, tuple(dropped))


def _select_columns(d: Dataset, names: Sequence[str]) -> Dataset:
    """Reorder/restrict ``d`` to the named numeric columns, renumbering ids."""
    ids = [d.id_of(n) for n in names]
    cols = tuple(replace(d.columns[i], id=j) for j, i in enumerate(ids))
    return replace(d, columns=cols, values=d.values[:, ids])


def run_prefilter(prep: PreparedData, cfg: RunConfig) -> CorrelationReport:
    with _stage("prefilter"):
        return correlation_prefilter(prep.train, cfg.prefilter_threshold, prep.numeric_ids)


def run_traces(prep: PreparedData, kept: Iterable[int], cfg: RunConfig, jobs: int = 1,
               selectors: Sequence[str] | None = None) -> dict[str, EliminationTrace]:
    with _stage("trace"):
        return run_selectors(list(selectors or cfg.selectors), prep.train, kept, cfg.seed,
                             cfg.selector_settings, jobs=jobs)


def build_trajectories(traces: Sequence[EliminationTrace], cfg: RunConfig) -> list[EnsembleTrajectory]:
    with _stage("combine"):
        return [build_trajectory(list(traces), h) for h in cfg.heuristic_objects()]


def _pmap(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def compute_cv_curves(train: Dataset, traces: Sequence[EliminationTrace], cfg: RunConfig,
                      jobs: int = 1) -> list[dict]:
    """Mean/stdev CV F1 of each selector's surviving set at every iteration."""
    with _stage("cv"):
        learner = cfg.learners[cfg.cv_learner]
        seed = derive_seed(cfg.seed, "cv")
        plan = stratified_kfold(train, cfg.cv_folds, seed)
        wanted = []
        for tr in traces:
            for t in range(tr.m):
                s = tr.surviving(t)
                if s not in wanted:
                    wanted.append(s)
        scores = dict(zip(wanted, _pmap(
            lambda s: cross_val_score(train, s, learner, cfg.cv_folds, seed=seed, plan=plan),
            wanted, jobs)))
        rows = []
        for tr in traces:
            for t in range(tr.m):
                mean, sd = scores[tr.surviving(t)]
                rows.append({"selector": tr.selector, "iteration": t, "n_features": tr.m - t,
                             "mean": mean, "stdev": sd})
        return rows


def evaluate_trajectories(prep: PreparedData, trajectories: Sequence[EnsembleTrajectory],
                          kept: Iterable[int], cfg: RunConfig, jobs: int = 1):
    """Hold-out metrics for every (heuristic, iteration, learner) candidate.

    Identical (learner, feature set) pairs are trained once; the shared
    result is reused wherever that candidate recurs. Returns
    (candidates, baselines, baselines_all_numeric, timings).
    """
    with _stage("evaluate"):
        block = prep.onehot_ids if cfg.onehot_augment else frozenset()
        kept = frozenset(kept)
        learners = list(cfg.learners.items())

        def full(c):
            return augment_with_onehot(c, block) if c else frozenset()

        keys = []
        for name, _ in learners:
            for fs in [full(kept), frozenset(prep.numeric_ids) | block]:
                if (name, fs) not in keys:
                    keys.append((name, fs))
            for traj in trajectories:
                for _, cand, _ in traj.per_iteration:
                    k = (name, full(cand))
                    if cand and k not in keys:
                        keys.append(k)

        def one(key):
            name, fs = key
            lc = replace(cfg.learners[name], seed=derive_seed(cfg.seed, "eval", name))
            return evaluate_candidate(prep.train, prep.test, fs, lc)

        results = dict(zip(keys, _pmap(one, keys, jobs)))
        names = prep.train.names
        candidates = []
        for traj in trajectories:
            for t, cand, size in traj.per_iteration:
                for name, _ in learners:
                    row = {"heuristic": traj.heuristic.kind, "iteration": t, "size": size,
                           "learner": name, "features": [names[i] for i in sorted(full(cand))]}
                    if not cand:
                        row["status"] = "skipped"
                        row["metrics"] = None
                    else:
                        row["status"] = "ok"
                        row["metrics"] = results[(name, full(cand))].to_dict()
                    candidates.append(row)
        baselines = {name: results[(name, full(kept))].to_dict() for name, _ in learners}
        all_numeric = {name: results[(name, frozenset(prep.numeric_ids) | block)].to_dict()
                       for name, _ in learners}
        timings = [{"feature_count": len(fs), "learner": name,
                    "train_seconds": results[(name, fs)].train_seconds,
                    "test_seconds": results[(name, fs)].test_seconds} for name, fs in keys]
        return candidates, baselines, all_numeric, timings


@dataclass
class EvaluationReport:
    manifest: dict
    prefilter: dict
    traces: list[dict]
    trajectories: list[dict]
    cv_curves: list[dict]
    candidates: list[dict]
    baselines: dict
    baselines_all_numeric: dict
    timings: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "manifest": self.manifest,
            "prefilter": self.prefilter,
            "traces": self.traces,
            "trajectories": self.trajectories,
            "cv_curves": self.cv_curves,
            "candidates": self.candidates,
            "baselines": self.baselines,
            "baselines_all_numeric": self.baselines_all_numeric,
            "timing": self.timings,
        }


def build_manifest(cfg: RunConfig, prep: PreparedData, stage_inputs: Mapping[str, str]) -> dict:
    return {
        "config": cfg.to_dict(),
        "feature_names": prep.train.names,
        "datasets": {
            "train": prep.train.provenance, "test": prep.test.provenance,
            "train_rows": prep.train.n_rows, "test_rows": prep.test.n_rows,
            "train_anomaly_fraction": prep.train.anomaly_fraction(),
            "test_anomaly_fraction": prep.test.anomaly_fraction(),
            "numeric_features": len(prep.numeric_ids),
            "onehot_features": len(prep.onehot_ids),
            "dropped_zero_variance": list(prep.dropped_constant),
        },
        "stage_inputs": dict(stage_inputs),
        "notes": {
            "sbs_criterion": "mean stratified CV F1 of a small forest (see config.selector_settings.sbs)",
            "cv_metric": "f1",
            "normalization": "min-max by training range, test values not clipped",
        },
    }


def assemble_report(cfg: RunConfig, prep: PreparedData, pre: CorrelationReport,
                    traces: Sequence[EliminationTrace], trajectories: Sequence[EnsembleTrajectory],
                    cv_rows: list[dict], evaluated) -> EvaluationReport:
    names = prep.train.names
    candidates, baselines, all_numeric, timings = evaluated
    stage_inputs = {
        "prefilter": prep.train.provenance,
        "traces": prep.train.provenance,
        "cv": prep.train.provenance,
        "evaluation_fit": prep.train.provenance,
        "evaluation_score": prep.test.provenance,
    }
    return EvaluationReport(
        manifest=build_manifest(cfg, prep, stage_inputs),
        prefilter=pre.to_dict(names),
        traces=[t.to_dict(names) for t in traces],
        trajectories=[t.to_dict(names) for t in trajectories],
        cv_curves=cv_rows,
        candidates=candidates,
        baselines=baselines,
        baselines_all_numeric=all_numeric,
        timings=timings,
    )


def run_experiment(cfg: RunConfig, jobs: int = 1) -> EvaluationReport:
    """load -> encode -> normalize -> prefilter -> traces -> trajectories ->
    CV curves -> hold-out evaluation. Deterministic given ``cfg.seed``."""
    prep = prepare_data(cfg)
    pre = run_prefilter(prep, cfg)
    traces = list(run_traces(prep, pre.kept, cfg, jobs).values())
    trajectories = build_trajectories(traces, cfg)
    cv_rows = compute_cv_curves(prep.train, traces, cfg, jobs)
    evaluated = evaluate_trajectories(prep, trajectories, pre.kept, cfg, jobs)
    return assemble_report(cfg, prep, pre, traces, trajectories, cv_rows, evaluated)


def timing_trend(table) -> float:
    """Spearman rank correlation between feature count and train seconds."""
    from scipy.stats import spearmanr
    if len(table) < 2:
        return float("nan")
    return float(spearmanr([r[0] for r in table], [r[1] for r in table])[0])


def timing_curve(report: EvaluationReport | Mapping) -> list[tuple[int, float, float]]:
    """(feature count, train seconds, test seconds) per timed evaluation,
    sorted by descending feature count."""
    rows = report.timings if isinstance(report, EvaluationReport) else report.get("timing", [])
    table = [(r["feature_count"], r["train_seconds"], r["test_seconds"]) for r in rows]
    return sorted(table, key=lambda r: -r[0])


# -- emission ------------------------------------------------------------------

def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def cv_curves_csv(rows: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["selector", "iteration", "n_features", "mean", "stdev"])
    for r in rows:
        w.writerow([r["selector"], r["iteration"], r["n_features"], _fmt(r["mean"]), _fmt(r["stdev"])])
    return buf.getvalue()


def heuristic_curves_csv(candidates: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["heuristic", "iteration", "size", "learner", "f1", "accuracy", "status"])
    for r in candidates:
        m = r["metrics"]
        w.writerow([r["heuristic"], r["iteration"], r["size"], r["learner"],
                    _fmt(m["f1"]) if m else "", _fmt(m["accuracy"]) if m else "", r["status"]])
    return buf.getvalue()


def timing_csv(timings: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature_count", "learner", "train_seconds", "test_seconds"])
    for r in sorted(timings, key=lambda r: (-r["feature_count"], r["learner"])):
        w.writerow([r["feature_count"], r["learner"], _fmt(r["train_seconds"]), _fmt(r["test_seconds"])])
    return buf.getvalue()


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def strip_timing(doc: Any) -> Any:
    """Copy of a report document without wall-clock fields."""
    if isinstance(doc, dict):
        return {k: strip_timing(v) for k, v in doc.items()
                if not k.endswith("_seconds") and k not in ("timing", "runtime")}
    if isinstance(doc, list):
        return [strip_timing(v) for v in doc]
    return doc


def write_report(report: EvaluationReport, out_dir: str | Path, figures: bool = True) -> list[Path]:
    """Write report.json, manifest.json and the CSV tables (plus figures)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    names = report.manifest["feature_names"]
    put("report.json", dumps(report.to_dict()))
    put("manifest.json", dumps(report.manifest))
    put("cv_curves.csv", cv_curves_csv(report.cv_curves))
    put("heuristic_curves.csv", heuristic_curves_csv(report.candidates))
    put("timing.csv", timing_csv(report.timings))
    if report.trajectories:
        trajs = [EnsembleTrajectory.from_dict(t) for t in report.trajectories]
        put("trajectories.csv", trajectories_csv(trajs, names))
    if figures:
        from .plotting import render_report_figures
        written.extend(render_report_figures(report, out / "figures"))
    return written

