"""Run configuration: a JSON document whose keys mirror :class:`RunConfig`.

Example::

    {
      "seed": 7,
      "synth": {"n_rows": 2000, "n_informative": 3, "n_noise": 12,
                "n_redundant": 2, "flip_prob": 0.05},
      "prefilter_threshold": 0.9,
      "selectors": ["RFE", "SBS", "UNIVARIATE", "IMPORTANCE"],
      "heuristics": ["UNION", "INTERSECTION", "QUORUM"],
      "learners": {"RF": {"n_trees": 100}, "LR": {}}
    }

Use ``"data": {"train": ..., "test": ..., "schema": ...}`` instead of
``synth`` for CSV input; relative paths resolve against the config file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .ensemble import HEURISTICS, Heuristic
from .errors import ConfigError
from .learners import ForestConfig, LogRegConfig
from .selectors import SELECTORS, SBSCriterion, SelectorConfig

LEARNERS = ("RF", "LR")


@dataclass(frozen=True)
class DataSource:
    train: str
    test: str
    schema: str
    label: str | None = None
    sample_rows: int | None = None


@dataclass(frozen=True)
class SynthSource:
    n_rows: int = 2000
    n_informative: int = 3
    n_noise: int = 12
    n_redundant: int = 2
    flip_prob: float = 0.05
    seed: int | None = None  # None -> derived from the master seed


@dataclass(frozen=True)
class RunConfig:
    seed: int
    data: DataSource | None = None
    synth: SynthSource | None = None
    prefilter_threshold: float = 0.9
    selectors: tuple[str, ...] = SELECTORS
    heuristics: tuple[str, ...] = HEURISTICS
    quorum_threshold: int | None = None
    learners: Mapping[str, Any] = field(default_factory=lambda: {"RF": ForestConfig(), "LR": LogRegConfig()})
    selector_settings: SelectorConfig = SelectorConfig()
    cv_folds: int = 5
    cv_learner: str = "RF"
    onehot_augment: bool = False
    repeats: int = 1

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("a master seed (integer) is required")
        if (self.data is None) == (self.synth is None):
            raise ConfigError("configure exactly one of 'data' or 'synth'")
        if not self.selectors:
            raise ConfigError("at least one selector is required")
        if not self.heuristics:
            raise ConfigError("at least one heuristic is required")
        if not self.learners:
            raise ConfigError("at least one learner is required")
        for s in self.selectors:
            if s not in SELECTORS:
                raise ConfigError(f"unknown selector {s!r}")
        if len(set(self.selectors)) != len(self.selectors):
            raise ConfigError("selector roster repeats an entry")
        for h in self.heuristics:
            if h not in HEURISTICS:
                raise ConfigError(f"unknown heuristic {h!r}")
        for name in self.learners:
            if name not in LEARNERS:
                raise ConfigError(f"unknown learner {name!r}; expected one of {LEARNERS}")
        if self.cv_learner not in self.learners:
            raise ConfigError(f"cv_learner {self.cv_learner!r} is not in the learner roster")
        if not 0.0 < self.prefilter_threshold <= 1.0:
            raise ConfigError("prefilter_threshold must lie in (0, 1]")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2")
        if self.quorum_threshold is not None and not 1 <= self.quorum_threshold <= len(self.selectors):
            raise ConfigError("quorum_threshold must lie in 1..number of selectors")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")

    def heuristic_objects(self) -> list[Heuristic]:
        return [Heuristic(h, self.quorum_threshold if h == "QUORUM" else None) for h in self.heuristics]

    def to_dict(self) -> dict:
        """Every setting, defaults included."""
        d = {
            "seed": self.seed,
            "data": asdict(self.data) if self.data else None,
            "synth": asdict(self.synth) if self.synth else None,
            "prefilter_threshold": self.prefilter_threshold,
            "selectors": list(self.selectors),
            "heuristics": list(self.heuristics),
            "quorum_threshold": self.quorum_threshold,
            "learners": {k: asdict(v) for k, v in self.learners.items()},
            "selector_settings": {
                "rfe": asdict(self.selector_settings.rfe),
                "importance": asdict(self.selector_settings.importance),
                "sbs": {"folds": self.selector_settings.sbs.folds,
                        "learner": "RF" if isinstance(self.selector_settings.sbs.learner, ForestConfig) else "LR",
                        **asdict(self.selector_settings.sbs.learner)},
            },
            "cv_folds": self.cv_folds,
            "cv_learner": self.cv_learner,
            "onehot_augment": self.onehot_augment,
            "repeats": self.repeats,
        }
        return d


def _build(cls, doc: Mapping | None, where: str):
    doc = dict(doc or {})
    known = {f.name for f in fields(cls)}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(doc: Mapping, base_dir: str | Path | None = None) -> RunConfig:
    doc = dict(doc)
    known = {f.name for f in fields(RunConfig)}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    if "seed" not in doc:
        raise ConfigError("a master seed (integer) is required")
    kw: dict[str, Any] = {k: doc[k] for k in doc if k not in ("data", "synth", "learners", "selector_settings")}
    for key in ("selectors", "heuristics"):
        if key in kw:
            if not isinstance(kw[key], list):
                raise ConfigError(f"{key} must be a list")
            kw[key] = tuple(str(s).upper() for s in kw[key])
    if doc.get("data") is not None:
        data = _build(DataSource, doc["data"], "data")
        if base_dir is not None:
            base = Path(base_dir)
            data = DataSource(*(str(base / p) if not Path(p).is_absolute() else p
                                for p in (data.train, data.test, data.schema)),
                              data.label, data.sample_rows)
        kw["data"] = data
    if doc.get("synth") is not None:
        kw["synth"] = _build(SynthSource, doc["synth"], "synth")
    if "learners" in doc:
        learners = {}
        if not isinstance(doc["learners"], Mapping):
            raise ConfigError("learners must map a learner name to its settings")
        for name, settings in doc["learners"].items():
            name = name.upper()
            if name == "RF":
                learners[name] = _build(ForestConfig, settings, "learners.RF")
            elif name == "LR":
                learners[name] = _build(LogRegConfig, settings, "learners.LR")
            else:
                raise ConfigError(f"unknown learner {name!r}; expected one of {LEARNERS}")
        kw["learners"] = learners
    if "selector_settings" in doc:
        ss = dict(doc["selector_settings"] or {})
        extra = set(ss) - {"rfe", "importance", "sbs"}
        if extra:
            raise ConfigError(f"selector_settings: unknown keys {sorted(extra)}")
        sbs = dict(ss.get("sbs") or {})
        folds = sbs.pop("folds", 3)
        kind = str(sbs.pop("learner", "RF")).upper()
        if kind == "RF":
            sbs_learner = _build(ForestConfig, {"n_trees": 25, **sbs}, "selector_settings.sbs")
        elif kind == "LR":
            sbs_learner = _build(LogRegConfig, sbs, "selector_settings.sbs")
        else:
            raise ConfigError(f"selector_settings.sbs: unknown learner {kind!r}")
        kw["selector_settings"] = SelectorConfig(
            rfe=_build(LogRegConfig, ss.get("rfe"), "selector_settings.rfe"),
            importance=_build(ForestConfig, ss.get("importance"), "selector_settings.importance"),
            sbs=SBSCriterion(folds=folds, learner=sbs_learner),
        )
    try:
        return RunConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(doc, base_dir=path.parent)
