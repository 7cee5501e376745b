"""Flow-record datasets: CSV ingestion, one-hot encoding, min-max scaling,
stratified folds and a synthetic generator for desk-scale experiments."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .seeding import derive_seed

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
ONEHOT = "onehot"
SCHEMA_KINDS = ("numeric", "categorical", "exclude", "label")


@dataclass(frozen=True)
class FeatureDescriptor:
    id: int
    name: str
    kind: str = NUMERIC
    parent: str | None = None
    category: str | None = None
    train_min: float = 0.0
    train_max: float = 0.0

    def __post_init__(self):
        if self.kind not in (NUMERIC, ONEHOT):
            raise DataError(f"unknown feature kind {self.kind!r}")
        if self.kind == ONEHOT and (self.parent is None or self.category is None):
            raise DataError(f"one-hot feature {self.name!r} needs a parent and a category")
        if self.train_min > self.train_max:
            raise DataError(f"feature {self.name!r}: train_min > train_max")

    def to_dict(self) -> dict:
        d = {"id": self.id, "name": self.name, "kind": self.kind,
             "train_min": self.train_min, "train_max": self.train_max}
        if self.kind == ONEHOT:
            d["parent"] = self.parent
            d["category"] = self.category
        return d


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled feature matrix.

    ``values`` holds numeric and one-hot columns described by ``columns``.
    Categorical columns that have not been encoded yet live in
    ``categoricals`` as raw string arrays. Instances are never mutated;
    the arrays are flagged read-only on construction.
    """

    columns: tuple[FeatureDescriptor, ...]
    values: np.ndarray
    labels: np.ndarray
    provenance: str = ""
    categoricals: Mapping[str, np.ndarray] = field(default_factory=dict)
    normalized: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.int8, copy=True)
        if values.ndim != 2:
            values = values.reshape(len(labels), -1)
        if values.shape[1] != len(self.columns):
            raise DataError(
                f"matrix width {values.shape[1]} != {len(self.columns)} descriptors")
        if values.shape[0] != labels.shape[0]:
            raise DataError(f"{values.shape[0]} rows but {labels.shape[0]} labels")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DataError("labels must be binary (0 = normal, 1 = anomaly)")
        ids = [c.id for c in self.columns]
        if ids != list(range(len(ids))):
            raise DataError("feature ids must be dense 0..S-1 in column order")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate feature names")
        cats = {}
        for name, col in dict(self.categoricals).items():
            col = np.array(col, dtype=str, copy=True)
            if col.shape != (labels.shape[0],):
                raise DataError(f"categorical {name!r} has wrong length")
            col.setflags(write=False)
            cats[name] = col
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "categoricals", cats)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def numeric_ids(self) -> frozenset[int]:
        return frozenset(c.id for c in self.columns if c.kind == NUMERIC)

    def onehot_ids(self) -> frozenset[int]:
        return frozenset(c.id for c in self.columns if c.kind == ONEHOT)

    def id_of(self, name: str) -> int:
        for c in self.columns:
            if c.name == name:
                return c.id
        raise KeyError(name)

    def column(self, fid: int) -> np.ndarray:
        return self.values[:, fid]

    def matrix(self, features: Iterable[int]) -> np.ndarray:
        """Columns for ``features`` in ascending id order."""
        ids = sorted(features)
        for i in ids:
            if not 0 <= i < self.n_features:
                raise DataError(f"feature id {i} not present")
        return np.ascontiguousarray(self.values[:, ids])

    def subset_rows(self, rows: np.ndarray) -> Dataset:
        rows = np.asarray(rows)
        return replace(
            self,
            values=self.values[rows],
            labels=self.labels[rows],
            categoricals={k: v[rows] for k, v in self.categoricals.items()},
        )

    def canonical(self) -> Dataset:
        """Rows sorted lexicographically by (label, feature values)."""
        keys = [self.values[:, j] for j in reversed(range(self.n_features))]
        order = np.lexsort(keys + [self.labels]) if keys else np.argsort(self.labels, kind="stable")
        return self.subset_rows(order)

    def anomaly_fraction(self) -> float:
        return float(self.labels.mean()) if self.n_rows else 0.0


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def folds(self):
        """Yield (train_rows, test_rows) index pairs."""
        for f in range(self.k):
            test = np.flatnonzero(self.assignments == f)
            train = np.flatnonzero(self.assignments != f)
            yield train, test


# -- schema / CSV --------------------------------------------------------------

def read_schema(path: str | Path) -> dict[str, str]:
    """Parse a ``column = kind`` schema file.

    Blank lines and ``#`` comments are ignored. ``*`` sets the kind of every
    column not listed explicitly. ``@normal = VALUE`` declares the label value
    meaning normal traffic; every other value then maps to anomaly.
    """
    schema: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            sep = "=" if "=" in line else ":"
            if sep not in line:
                raise DataError(f"{path}:{lineno}: expected 'column = kind'")
            key, kind = (s.strip() for s in line.split(sep, 1))
            if key.startswith("@"):
                schema[key] = kind
                continue
            kind = kind.lower()
            if kind not in SCHEMA_KINDS:
                raise DataError(f"{path}:{lineno}: unknown kind {kind!r}")
            schema[key] = kind
    return schema


def bundled_schema(name: str) -> Path:
    """Path of a shipped schema: ``unsw_nb15`` or ``ids2017``."""
    from importlib.resources import files
    path = Path(str(files("ensemblefs") / "schemas" / f"{name}.schema"))
    if not path.exists():
        raise DataError(f"no bundled schema named {name!r}")
    return path


def _parse_label(raw: str, normal: str | None, row: int) -> int:
    if normal is not None:
        return 0 if raw == normal else 1
    try:
        v = float(raw)
    except ValueError:
        raise DataError(f"row {row}: non-binary label {raw!r}") from None
    if v not in (0.0, 1.0):
        raise DataError(f"row {row}: non-binary label {raw!r}")
    return int(v)


def load_csv(path: str | Path, schema: Mapping[str, str], label_column: str | None = None,
             drop_constant: bool = True) -> Dataset:
    """Load a headered comma-separated flow file.

    ``schema`` maps column names to numeric/categorical/exclude/label. Row
    numbers in error messages count the header as row 1. Zero-variance
    numeric columns are dropped unless ``drop_constant`` is false (test
    files keep them so their layout can follow the training file).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    schema = dict(schema)
    normal = schema.pop("@normal", None)
    default = schema.pop("*", None)
    if label_column is None:
        labels_declared = [k for k, v in schema.items() if v == "label"]
        if len(labels_declared) != 1:
            raise DataError("schema must declare exactly one label column")
        label_column = labels_declared[0]

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        unknown = [k for k in schema if k not in header]
        if unknown:
            raise DataError(f"schema names columns not in {path.name}: {unknown}")
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in {path.name}")
        kinds = []
        for h in header:
            if h == label_column:
                kinds.append("label")
            elif h in schema:
                kinds.append(schema[h])
            elif default is not None:
                kinds.append(default)
            else:
                raise DataError(f"column {h!r} has no declared kind")

        num_idx = [i for i, k in enumerate(kinds) if k == "numeric"]
        cat_idx = [i for i, k in enumerate(kinds) if k == "categorical"]
        lab_idx = header.index(label_column)
        rows: list[list[float]] = []
        cats: list[list[str]] = []
        labels: list[int] = []
        for rowno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"row {rowno}: expected {len(header)} fields, got {len(rec)}")
            try:
                vals = [float(rec[i]) for i in num_idx]
            except ValueError as exc:
                raise DataError(f"row {rowno}: {exc}") from None
            if any(math.isnan(v) for v in vals) or any(rec[i].strip() == "" for i in cat_idx):
                raise DataError(f"row {rowno}: missing value")
            rows.append(vals)
            cats.append([rec[i].strip() for i in cat_idx])
            labels.append(_parse_label(rec[lab_idx].strip(), normal, rowno))

    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(num_idx))
    if not np.isfinite(values).all():
        bad = int(np.argwhere(~np.isfinite(values))[0, 0]) + 2
        raise DataError(f"row {bad}: non-finite value")
    columns = []
    keep = []
    for j, i in enumerate(num_idx):
        col = values[:, j]
        lo, hi = (float(col.min()), float(col.max())) if len(col) else (0.0, 0.0)
        if lo == hi and drop_constant:
            logger.warning("dropping zero-variance column %r", header[i])
            continue
        keep.append(j)
        columns.append(FeatureDescriptor(len(columns), header[i], NUMERIC, train_min=lo, train_max=hi))
    cat_arr = np.array(cats, dtype=str).reshape(len(rows), len(cat_idx))
    return Dataset(
        columns=tuple(columns),
        values=values[:, keep],
        labels=np.array(labels, dtype=np.int8),
        provenance=str(path),
        categoricals={header[i]: cat_arr[:, j] for j, i in enumerate(cat_idx)},
    )


def dropped_constant_columns(path: str | Path, d: Dataset, schema: Mapping[str, str]) -> list[str]:
    """Numeric columns declared in ``schema`` or by default that ``d`` lacks."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    default = schema.get("*")
    numeric = [h for h in header if schema.get(h, default) == "numeric"]
    present = set(d.names)
    return [h for h in numeric if h not in present]


def write_csv(d: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Serialize ``d`` in the format ``load_csv`` reads."""
    names = d.names + list(d.categoricals) + [label_column]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        cat_cols = list(d.categoricals.values())
        for r in range(d.n_rows):
            w.writerow([repr(float(v)) for v in d.values[r]]
                       + [c[r] for c in cat_cols] + [int(d.labels[r])])


def schema_for(d: Dataset, label_column: str = "label") -> dict[str, str]:
    schema = {n: "numeric" for n in d.names}
    schema.update({n: "categorical" for n in d.categoricals})
    schema[label_column] = "label"
    return schema


def write_schema(schema: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in schema.items():
            fh.write(f"{k} = {v}\n")


# -- transforms ----------------------------------------------------------------

def one_hot_encode(d: Dataset, column: str, categories: Sequence[str] | None = None) -> Dataset:
    """Replace categorical ``column`` with one binary column per category.

    ``categories`` defaults to the sorted distinct values of ``d``; pass the
    training categories when encoding a test set so unseen values become an
    all-zero block.
    """
    if column not in d.categoricals:
        raise DataError(f"{column!r} is not a categorical column")
    raw = d.categoricals[column]
    if categories is None:
        categories = sorted(set(raw.tolist()))
    categories = list(categories)
    if not categories:
        raise DataError(f"{column!r} has no categories")
    block = (raw[:, None] == np.array(categories, dtype=str)[None, :]).astype(np.float64)
    start = d.n_features
    new_cols = [
        FeatureDescriptor(start + i, f"{column}={cat}", ONEHOT, parent=column,
                          category=cat, train_min=0.0, train_max=1.0)
        for i, cat in enumerate(categories)
    ]
    cats = {k: v for k, v in d.categoricals.items() if k != column}
    return replace(
        d,
        columns=d.columns + tuple(new_cols),
        values=np.hstack([d.values, block]),
        categoricals=cats,
    )


def onehot_categories(d: Dataset) -> dict[str, list[str]]:
    """Encoded categories per parent column, in column order."""
    out: dict[str, list[str]] = {}
    for c in d.columns:
        if c.kind == ONEHOT:
            out.setdefault(c.parent, []).append(c.category)
    return out


def encode_all(train: Dataset, test: Dataset | None = None) -> tuple[Dataset, Dataset | None]:
    """One-hot encode every categorical of ``train`` and mirror it onto ``test``."""
    for name in list(train.categoricals):
        cats = sorted(set(train.categoricals[name].tolist()))
        train = one_hot_encode(train, name, cats)
        if test is not None:
            test = one_hot_encode(test, name, cats)
    return train, test


def _same_layout(a: Dataset, b: Dataset) -> bool:
    return [(c.name, c.kind) for c in a.columns] == [(c.name, c.kind) for c in b.columns]


def normalize_minmax(train: Dataset, apply_to: Dataset) -> Dataset:
    """Scale numeric columns of ``apply_to`` by the training min/max.

    Values outside the training range are not clipped. Columns constant in
    training map to 0. One-hot columns pass through unchanged.
    """
    if not _same_layout(train, apply_to):
        raise DataError("column layout of apply_to differs from train")
    values = np.array(apply_to.values, copy=True)
    columns = []
    for c in train.columns:
        if c.kind == NUMERIC:
            col = train.values[:, c.id]
            lo, hi = (float(col.min()), float(col.max())) if train.n_rows else (0.0, 0.0)
            span = hi - lo
            values[:, c.id] = (values[:, c.id] - lo) / span if span > 0 else 0.0
            columns.append(replace(c, train_min=lo, train_max=hi))
        else:
            columns.append(c)
    return replace(apply_to, columns=tuple(columns), values=values, normalized=True)


def stratified_kfold(d: Dataset, k: int, seed: int) -> FoldPlan:
    """Assign rows to ``k`` folds, dealing each class round-robin after a
    seeded shuffle so per-fold class counts differ by at most one."""
    if k < 2:
        raise DataError("k must be at least 2")
    assignments = np.empty(d.n_rows, dtype=np.int64)
    rng = np.random.default_rng(derive_seed(seed, "kfold", k))
    offset = 0
    for cls in (0, 1):
        rows = np.flatnonzero(d.labels == cls)
        if len(rows) < k:
            raise DataError(f"class {cls} has {len(rows)} samples, fewer than k={k}")
        rows = rows[rng.permutation(len(rows))]
        # continue dealing where the previous class stopped to even out fold sizes
        assignments[rows] = (np.arange(len(rows)) + offset) % k
        offset = (offset + len(rows)) % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


# -- synthetic data ------------------------------------------------------------

def synth_generate(n_rows: int, n_informative: int, n_noise: int, n_redundant: int,
                   flip_prob: float, seed: int, *, margin: float = 0.25,
                   jitter: float = 0.05) -> tuple[Dataset, Dataset]:
    """Train/test pair with planted structure.

    Columns are ordered informative (``inf_*``), redundant (``red_*``) then
    noise (``noise_*``). Labels threshold a positive weighted sum of the
    informative columns at the training median; informative rows are pushed
    ``margin`` away from the boundary along the weight direction so the
    noise-free rule is linearly separable with a gap. ``red_j`` is an affine
    copy of ``inf_{j mod n_informative}`` plus Gaussian jitter of relative
    scale ``jitter``. Train and test use the same weights and threshold.
    """
    if n_rows < 2:
        raise DataError("n_rows must be at least 2")
    if n_informative < 1:
        raise DataError("n_informative must be at least 1")
    if n_noise < 0 or n_redundant < 0:
        raise DataError("column counts must be nonnegative")
    if not 0.0 <= flip_prob < 0.5:
        raise DataError("flip_prob must lie in [0, 0.5)")

    structure = np.random.default_rng(derive_seed(seed, "synth", "structure"))
    weights = structure.uniform(0.6, 1.0, size=n_informative)
    red_scale = structure.uniform(0.5, 2.0, size=n_redundant) * structure.choice([-1.0, 1.0], size=n_redundant)
    red_shift = structure.uniform(-1.0, 1.0, size=n_redundant)
    noise_loc = structure.uniform(-1.0, 1.0, size=n_noise)
    noise_scale = structure.uniform(0.5, 2.0, size=n_noise)
    unit = weights / np.linalg.norm(weights)

    def draw(part: str, threshold: float | None):
        rng = np.random.default_rng(derive_seed(seed, "synth", part))
        inf = rng.standard_normal((n_rows, n_informative))
        score = inf @ weights
        if threshold is None:
            threshold = float(np.median(score))
        side = np.where(score > threshold, 1.0, -1.0)
        inf = inf + side[:, None] * margin * unit[None, :]
        labels = (side > 0).astype(np.int8)
        flips = rng.random(n_rows) < flip_prob
        labels = np.where(flips, 1 - labels, labels).astype(np.int8)
        red = np.empty((n_rows, n_redundant))
        for j in range(n_redundant):
            src = inf[:, j % n_informative]
            red[:, j] = red_scale[j] * src + red_shift[j] + jitter * abs(red_scale[j]) * rng.standard_normal(n_rows)
        noise = noise_loc + noise_scale * rng.standard_normal((n_rows, n_noise))
        return np.hstack([inf, red, noise]), labels, threshold

    names = ([f"inf_{i}" for i in range(n_informative)]
             + [f"red_{i}" for i in range(n_redundant)]
             + [f"noise_{i}" for i in range(n_noise)])

    def build(values, labels, part):
        cols = tuple(
            FeatureDescriptor(j, n, NUMERIC, train_min=float(values[:, j].min()),
                              train_max=float(values[:, j].max()))
            for j, n in enumerate(names)
        )
        return Dataset(cols, values, labels, provenance=f"synth:seed={seed}:{part}")

    tr_vals, tr_lab, thr = draw("train", None)
    te_vals, te_lab, _ = draw("test", thr)
    return build(tr_vals, tr_lab, "train"), build(te_vals, te_lab, "test")
