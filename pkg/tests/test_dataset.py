import csv
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensemblefs.dataset import (bundled_schema, encode_all, load_csv, normalize_minmax, one_hot_encode,
                                read_schema, stratified_kfold, synth_generate, write_csv, schema_for)
from ensemblefs.errors import DataError
from ensemblefs.selectors import pearson_corr

from conftest import make_dataset


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


# -- load_csv ------------------------------------------------------------------

def test_constant_column_dropped(tmp_path, caplog):
    p = write_rows(tmp_path / "a.csv", ["x", "const", "y", "label"],
                   [[1, 5, 0.1, 0], [2, 5, 0.4, 1], [3, 5, 0.2, 1]])
    d = load_csv(p, {"x": "numeric", "const": "numeric", "y": "numeric", "label": "label"})
    assert d.names == ["x", "y"]
    assert d.n_features == 2
    assert "const" in caplog.text
    assert d.labels.tolist() == [0, 1, 1]


def test_malformed_row_reports_row_number(tmp_path):
    p = write_rows(tmp_path / "a.csv", ["x", "label"], [[1, 0], [2, 1, 9], [3, 0]])
    with pytest.raises(DataError, match="row 3"):
        load_csv(p, {"x": "numeric", "label": "label"})


def test_unparseable_number(tmp_path):
    p = write_rows(tmp_path / "a.csv", ["x", "label"], [[1, 0], ["abc", 1]])
    with pytest.raises(DataError, match="row 3"):
        load_csv(p, {"x": "numeric", "label": "label"})


def test_missing_cell_is_error(tmp_path):
    p = write_rows(tmp_path / "a.csv", ["x", "c", "label"], [[1, "a", 0], [2, "", 1]])
    with pytest.raises(DataError, match="missing"):
        load_csv(p, {"x": "numeric", "c": "categorical", "label": "label"})


def test_unknown_schema_column(tmp_path):
    p = write_rows(tmp_path / "a.csv", ["x", "label"], [[1, 0], [2, 1]])
    with pytest.raises(DataError, match="nope"):
        load_csv(p, {"x": "numeric", "nope": "numeric", "label": "label"})


@pytest.mark.parametrize("bad", ["2", "attack", "0.5"])
def test_non_binary_label(tmp_path, bad):
    p = write_rows(tmp_path / "a.csv", ["x", "label"], [[1, 0], [2, bad]])
    with pytest.raises(DataError, match="non-binary"):
        load_csv(p, {"x": "numeric", "label": "label"})


def test_normal_label_declaration(tmp_path):
    p = write_rows(tmp_path / "a.csv", ["x", "Label"], [[1, "BENIGN"], [2, "DoS"], [3, "PortScan"]])
    d = load_csv(p, {"Label": "label", "@normal": "BENIGN", "*": "numeric"})
    assert d.labels.tolist() == [0, 1, 1]


def test_missing_file():
    with pytest.raises(DataError):
        load_csv("/nonexistent/file.csv", {"label": "label"})


def test_unsw_schema_gives_39_numeric(tmp_path):
    schema = read_schema(bundled_schema("unsw_nb15"))
    header = list(schema)
    rng = np.random.default_rng(0)
    rows = []
    for r in range(8):
        row = []
        for col in header:
            kind = schema[col]
            if kind == "categorical":
                row.append(["tcp", "udp"][r % 2])
            elif kind == "label":
                row.append(r % 2)
            elif col == "attack_cat":
                row.append("Normal")
            else:
                row.append(float(rng.random()))
        rows.append(row)
    d = load_csv(write_rows(tmp_path / "unsw.csv", header, rows), schema)
    assert d.n_features == 39
    assert set(d.categoricals) == {"proto", "service", "state"}
    assert "id" not in d.names and "attack_cat" not in d.names


def test_ids2017_style_header_gives_79_numeric(tmp_path):
    header = ["Flow ID", "Source IP", "Source Port", "Destination IP", "Destination Port"]
    header += [f"feat_{i}" for i in range(79)] + ["Label"]
    rng = np.random.default_rng(1)
    rows = [["id", "1.2.3.4", 1, "5.6.7.8", 80] + rng.random(79).tolist() + [lab]
            for lab in ["BENIGN", "DDoS", "BENIGN", "PortScan"]]
    schema = {h: "exclude" for h in header[:5]} | {"Label": "label", "@normal": "BENIGN", "*": "numeric"}
    d = load_csv(write_rows(tmp_path / "ids.csv", header, rows), schema)
    assert d.n_features == 79
    assert d.labels.tolist() == [0, 1, 0, 1]


@pytest.mark.skipif(not os.environ.get("ENSEMBLEFS_UNSW_TRAIN"), reason="UNSW-NB15 training CSV not supplied")
def test_unsw_training_file_shape():
    d = load_csv(os.environ["ENSEMBLEFS_UNSW_TRAIN"], read_schema(bundled_schema("unsw_nb15")))
    assert d.n_features == 39
    assert d.n_rows == pytest.approx(82_000, rel=0.01)
    assert d.anomaly_fraction() == pytest.approx(0.55, abs=0.01)


def test_schema_file_parsing(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("# comment\nx = numeric\nproto: categorical\n\nid = exclude  # serial\nlabel = label\n")
    assert read_schema(p) == {"x": "numeric", "proto": "categorical", "id": "exclude", "label": "label"}
    p.write_text("x = strange\n")
    with pytest.raises(DataError, match="unknown kind"):
        read_schema(p)


def test_csv_round_trip(tmp_path):
    train, _ = synth_generate(50, 2, 2, 1, 0.1, seed=3)
    write_csv(train, tmp_path / "t.csv")
    back = load_csv(tmp_path / "t.csv", schema_for(train))
    assert back.names == train.names
    np.testing.assert_array_equal(back.values, train.values)
    np.testing.assert_array_equal(back.labels, train.labels)


# -- one-hot -------------------------------------------------------------------

def _with_categorical(cats, labels=None):
    n = len(cats)
    d = make_dataset(np.arange(n, dtype=float), labels if labels is not None else [i % 2 for i in range(n)])
    from dataclasses import replace
    return replace(d, categoricals={"proto": np.array(cats)})


def test_protocol_two_columns():
    d = one_hot_encode(_with_categorical(["TCP", "UDP", "TCP", "UDP"]), "proto")
    assert d.names == ["f0", "proto=TCP", "proto=UDP"]
    assert d.values[:, 1:].tolist() == [[1, 0], [0, 1], [1, 0], [0, 1]]
    assert d.onehot_ids() == {1, 2}
    assert d.columns[1].parent == "proto" and d.columns[1].category == "TCP"


def test_single_category_all_ones():
    d = one_hot_encode(_with_categorical(["TCP"] * 4), "proto")
    assert d.n_features == 2
    assert d.values[:, 1].tolist() == [1, 1, 1, 1]


def test_unseen_category_all_zero():
    train = _with_categorical(["TCP", "UDP", "TCP", "UDP"])
    test = _with_categorical(["ICMP", "TCP", "UDP", "ICMP"])
    train_e, test_e = encode_all(train, test)
    assert test_e.values[:, 1:].tolist() == [[0, 0], [1, 0], [0, 1], [0, 0]]
    assert train_e.names == test_e.names


def test_one_hot_rejects_numeric():
    with pytest.raises(DataError):
        one_hot_encode(make_dataset([1.0, 2.0], [0, 1]), "f0")


@given(st.lists(st.sampled_from("abcde"), min_size=2, max_size=40))
def test_one_hot_partition(cats):
    d = one_hot_encode(_with_categorical(cats), "proto")
    block = d.values[:, 1:]
    assert np.all(block.sum(axis=1) == 1)
    assert block.shape[1] == len(set(cats))


# -- normalization -------------------------------------------------------------

def test_minmax_endpoint_and_no_clipping():
    train = make_dataset([[0.0, 3.0], [10.0, 3.0], [5.0, 3.0]], [0, 1, 0])
    test = make_dataset([[10.0, 7.0], [12.0, -1.0]], [1, 0])
    out = normalize_minmax(train, test)
    assert out.values[0, 0] == 1.0
    assert out.values[1, 0] == pytest.approx(1.2)
    # constant training column maps to zero everywhere
    assert out.values[:, 1].tolist() == [0.0, 0.0]


def test_minmax_layout_mismatch():
    with pytest.raises(DataError):
        normalize_minmax(make_dataset([[1.0, 2.0]], [0]), make_dataset([[1.0]], [0]))


def test_minmax_is_pure():
    train = make_dataset([[0.0], [4.0]], [0, 1])
    before = train.values.copy()
    normalize_minmax(train, train)
    np.testing.assert_array_equal(train.values, before)
    assert not train.values.flags.writeable


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.integers(5, 60))
def test_encode_then_normalize_in_unit_range(seed, n):
    rng = np.random.default_rng(seed)
    d = _with_categorical(rng.choice(list("xyz"), n).tolist(), rng.integers(0, 2, n).tolist())
    from dataclasses import replace
    d = replace(d, values=rng.normal(size=(n, 1)) * 100)
    enc, _ = encode_all(d)
    out = normalize_minmax(enc, enc)
    assert out.values.min() >= 0.0 and out.values.max() <= 1.0
    assert np.all(out.values[:, 1:].sum(axis=1) == 1)


# -- folds ---------------------------------------------------------------------

def test_five_folds_one_of_each_class():
    d = make_dataset(np.arange(10.0), [0, 1] * 5)
    plan = stratified_kfold(d, 5, seed=0)
    for _, test in plan.folds():
        assert sorted(d.labels[test].tolist()) == [0, 1]


def test_fold_determinism():
    d = make_dataset(np.arange(40.0), [0, 1, 1, 0] * 10)
    a = stratified_kfold(d, 4, seed=9)
    b = stratified_kfold(d, 4, seed=9)
    np.testing.assert_array_equal(a.assignments, b.assignments)


def test_too_few_per_class():
    d = make_dataset(np.arange(10.0), [0, 1] * 5)
    with pytest.raises(DataError):
        stratified_kfold(d, 6, seed=0)
    # leave-one-out needs every class to reach k, which balanced data cannot
    with pytest.raises(DataError):
        stratified_kfold(d, 10, seed=0)


@settings(max_examples=60)
@given(st.integers(0, 1000), st.integers(2, 7), st.integers(20, 120), st.floats(0.15, 0.85))
def test_stratification_property(seed, k, n, frac):
    n_pos = max(k, min(n - k, int(round(n * frac))))
    labels = [1] * n_pos + [0] * (n - n_pos)
    d = make_dataset(np.arange(float(n)), labels)
    plan = stratified_kfold(d, k, seed)
    seen = np.zeros(n, dtype=int)
    glob = d.anomaly_fraction()
    for _, test in plan.folds():
        seen[test] += 1
        assert abs(d.labels[test].mean() - glob) <= 1.0 / len(test) + 1e-12
    assert np.all(seen == 1)


# -- synthetic -----------------------------------------------------------------

def test_synth_determinism():
    a = synth_generate(300, 3, 4, 2, 0.1, seed=4)
    b = synth_generate(300, 3, 4, 2, 0.1, seed=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.values, y.values)
        np.testing.assert_array_equal(x.labels, y.labels)
        assert x.names == y.names


def test_synth_redundant_correlation():
    train, test = synth_generate(2000, 3, 5, 2, 0.05, seed=8)
    for d in (train, test):
        for j in range(2):
            r = pearson_corr(d.column(d.id_of(f"red_{j}")), d.column(d.id_of(f"inf_{j}")))
            assert abs(r) > 0.95


def test_synth_balance_and_disjoint_draws():
    train, test = synth_generate(2000, 3, 5, 2, 0.05, seed=8)
    assert abs(train.anomaly_fraction() - 0.5) <= 0.05
    assert abs(test.anomaly_fraction() - 0.5) <= 0.05
    assert not np.array_equal(train.values, test.values)
    assert train.provenance != test.provenance


def test_synth_noise_free_rule_is_separable():
    # brute force: a threshold on some direction of the informative block
    # classifies every training row, which the generator guarantees by its gap
    train, _ = synth_generate(1000, 3, 10, 2, 0.0, seed=2)
    X = train.matrix(range(3))
    y = train.labels
    from ensemblefs.learners import LogRegConfig, fit_logreg
    w, b, _, _ = fit_logreg(X, y, LogRegConfig(n_iter=3000, learning_rate=1.0))
    assert np.all(((X @ w + b) >= 0).astype(int) == y)


@pytest.mark.parametrize("kw", [dict(n_informative=0), dict(flip_prob=0.5), dict(flip_prob=-0.1),
                                dict(n_noise=-1), dict(n_rows=1)])
def test_synth_invalid(kw):
    args = dict(n_rows=100, n_informative=2, n_noise=2, n_redundant=1, flip_prob=0.1, seed=0)
    args.update(kw)
    with pytest.raises(DataError):
        synth_generate(**args)
