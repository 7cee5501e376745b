import csv
import io
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from ensemblefs.ensemble import (INTERSECTION, QUORUM, UNION, EnsembleTrajectory, Heuristic,
                                 augment_with_onehot, build_trajectory, combine, trajectories_csv)
from ensemblefs.errors import DataError
from ensemblefs.selectors import EliminationTrace

A, B, C, D, E = range(5)
START = (A, B, C, D, E)
HEURISTIC_KINDS = (UNION, INTERSECTION, QUORUM)


def trace_with_survivors(survivors, name="RFE"):
    """Trace over START whose surviving set after 2 eliminations is ``survivors``."""
    dropped = [f for f in START if f not in survivors]
    rest = sorted(survivors)
    return EliminationTrace(name, START, tuple(dropped + rest[:-1]))


@pytest.fixture
def four_traces():
    sets = [{A, B, C}, {A, B, D}, {A, C, D}, {A, B, E}]
    return [trace_with_survivors(s, n) for s, n in zip(sets, ["RFE", "SBS", "UNIVARIATE", "IMPORTANCE"])]


def test_worked_example(four_traces):
    assert combine(four_traces, 2, Heuristic(UNION)) == {A, B, C, D, E}
    assert combine(four_traces, 2, Heuristic(INTERSECTION)) == {A}
    assert combine(four_traces, 2, Heuristic(QUORUM, 3)) == {A, B}


def test_default_quorum_is_strict_majority(four_traces):
    assert Heuristic(QUORUM).threshold_for(4) == 3
    assert Heuristic(QUORUM).threshold_for(3) == 2
    assert combine(four_traces, 2, Heuristic(QUORUM)) == {A, B}


def test_single_trace_all_heuristics_agree(four_traces):
    tr = four_traces[:1]
    for h in (Heuristic(UNION), Heuristic(INTERSECTION), Heuristic(QUORUM)):
        assert combine(tr, 2, h) == {A, B, C}


def test_identical_traces():
    tr = trace_with_survivors({B, D})
    for h in (UNION, INTERSECTION, QUORUM):
        assert combine([tr, tr, tr], 3, Heuristic(h)) == tr.surviving(3)


def test_t_zero_is_start_set(four_traces):
    for h in (UNION, INTERSECTION, QUORUM):
        assert combine(four_traces, 0, Heuristic(h)) == set(START)


def test_bad_inputs(four_traces):
    with pytest.raises(DataError):
        combine(four_traces, 5, Heuristic(UNION))
    with pytest.raises(DataError):
        combine([], 0, Heuristic(UNION))
    other = EliminationTrace("RFE", (0, 1, 2), (0, 1))
    with pytest.raises(DataError):
        combine([four_traces[0], other], 0, Heuristic(UNION))
    with pytest.raises(DataError):
        Heuristic("MAJORITY")
    with pytest.raises(DataError):
        Heuristic(QUORUM, 0)


@st.composite
def trace_sets(draw):
    m = draw(st.integers(1, 12))
    k = draw(st.integers(1, 5))
    start = tuple(range(m))
    traces = [EliminationTrace("RFE", start, tuple(draw(st.permutations(start))[:m - 1]))
              for _ in range(k)]
    return traces


@given(trace_sets(), st.data())
def test_nesting_and_bounds(traces, data):
    m, k = traces[0].m, len(traces)
    t = data.draw(st.integers(0, m - 1))
    q = data.draw(st.integers(1, k))
    inter = combine(traces, t, Heuristic(INTERSECTION))
    quorum = combine(traces, t, Heuristic(QUORUM, q))
    union = combine(traces, t, Heuristic(UNION))
    assert inter <= quorum <= union
    assert combine(traces, t, Heuristic(QUORUM, 1)) == union
    assert combine(traces, t, Heuristic(QUORUM, k)) == inter
    # brute force over the surviving sets
    survivors = [tr.surviving(t) for tr in traces]
    assert union == frozenset().union(*survivors)
    assert inter == frozenset.intersection(*survivors)
    assert quorum == {f for f in range(m) if sum(f in s for s in survivors) >= q}


@settings(max_examples=50)
@given(trace_sets(), st.randoms())
def test_permutation_invariance(traces, rnd):
    shuffled = list(traces)
    rnd.shuffle(shuffled)
    for h in (Heuristic(UNION), Heuristic(INTERSECTION), Heuristic(QUORUM)):
        assert build_trajectory(traces, h) == build_trajectory(shuffled, h)


@given(trace_sets())
def test_sizes_non_increasing(traces):
    for kind in HEURISTIC_KINDS:
        sizes = build_trajectory(traces, Heuristic(kind)).sizes()
        assert all(a >= b for a, b in itertools.pairwise(sizes))
        assert sizes[0] == traces[0].m


def test_intersection_can_be_empty():
    t1 = EliminationTrace("RFE", (0, 1), (0,))
    t2 = EliminationTrace("SBS", (0, 1), (1,))
    traj = build_trajectory([t1, t2], Heuristic(INTERSECTION))
    assert traj.sizes() == [2, 0]
    assert traj.candidate(1) == frozenset()


def test_augment():
    assert augment_with_onehot({1, 2}, {5, 6}) == {1, 2, 5, 6}
    assert augment_with_onehot(set(), {5}) == {5}
    with pytest.raises(DataError):
        augment_with_onehot({1, 5}, {5, 6})


def test_trajectory_round_trip_and_csv(four_traces):
    names = list("abcde")
    trajs = [build_trajectory(four_traces, Heuristic(h)) for h in HEURISTIC_KINDS]
    for tr in trajs:
        assert EnsembleTrajectory.from_dict(tr.to_dict(names)) == tr
    rows = list(csv.DictReader(io.StringIO(trajectories_csv(trajs, names))))
    assert len(rows) == 3 * 5
    row = next(r for r in rows if r["heuristic"] == INTERSECTION and r["iteration"] == "2")
    assert row["features"] == "a" and row["size"] == "1"
