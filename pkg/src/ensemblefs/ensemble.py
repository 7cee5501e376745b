"""Set-theoretic combination of per-selector surviving sets."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DataError
from .selectors import EliminationTrace

UNION = "UNION"
INTERSECTION = "INTERSECTION"
QUORUM = "QUORUM"
HEURISTICS = (UNION, INTERSECTION, QUORUM)


@dataclass(frozen=True)
class Heuristic:
    kind: str
    quorum_threshold: int | None = None

    def __post_init__(self):
        if self.kind not in HEURISTICS:
            raise DataError(f"unknown heuristic {self.kind!r}")
        if self.quorum_threshold is not None and self.quorum_threshold < 1:
            raise DataError("quorum threshold must be at least 1")

    def threshold_for(self, k: int) -> int:
        """Votes needed out of ``k``; defaults to a strict majority."""
        if self.kind == UNION:
            return 1
        if self.kind == INTERSECTION:
            return k
        return self.quorum_threshold if self.quorum_threshold is not None else k // 2 + 1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "quorum_threshold": self.quorum_threshold}


def _check_traces(traces: Sequence[EliminationTrace]) -> int:
    if not traces:
        raise DataError("need at least one trace")
    start = traces[0].start_set
    for tr in traces[1:]:
        if tr.start_set != start:
            raise DataError(f"{tr.selector} trace has a different start set than {traces[0].selector}")
    return len(start)


def combine(traces: Sequence[EliminationTrace], t: int, h: Heuristic) -> frozenset[int]:
    m = _check_traces(traces)
    if not 0 <= t < m:
        raise DataError(f"iteration {t} outside 0..{m - 1}")
    votes = Counter()
    for tr in traces:
        votes.update(tr.surviving(t))
    need = h.threshold_for(len(traces))
    return frozenset(f for f, v in votes.items() if v >= need)


@dataclass(frozen=True)
class EnsembleTrajectory:
    heuristic: Heuristic
    per_iteration: tuple[tuple[int, frozenset[int], int], ...]

    def candidate(self, t: int) -> frozenset[int]:
        return self.per_iteration[t][1]

    def sizes(self) -> list[int]:
        return [size for _, _, size in self.per_iteration]

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        rows = []
        for t, cand, size in self.per_iteration:
            row = {"iteration": t, "size": size, "features": sorted(cand)}
            if names is not None:
                row["names"] = [names[i] for i in sorted(cand)]
            rows.append(row)
        return {"heuristic": self.heuristic.to_dict(), "per_iteration": rows}

    @classmethod
    def from_dict(cls, doc: Mapping) -> EnsembleTrajectory:
        h = Heuristic(doc["heuristic"]["kind"], doc["heuristic"].get("quorum_threshold"))
        return cls(h, tuple((r["iteration"], frozenset(r["features"]), r["size"])
                            for r in doc["per_iteration"]))


def build_trajectory(traces: Sequence[EliminationTrace], h: Heuristic) -> EnsembleTrajectory:
    m = _check_traces(traces)
    rows = []
    for t in range(m):
        cand = combine(traces, t, h)
        rows.append((t, cand, len(cand)))
    return EnsembleTrajectory(h, tuple(rows))


def augment_with_onehot(candidate: Iterable[int], onehot_block: Iterable[int]) -> frozenset[int]:
    candidate = frozenset(candidate)
    block = frozenset(onehot_block)
    if candidate & block:
        raise DataError(f"one-hot block overlaps candidate ids {sorted(candidate & block)}")
    return candidate | block


def trajectories_csv(trajectories: Iterable[EnsembleTrajectory], names: Sequence[str]) -> str:
    """Flat table: iteration, heuristic, size, comma-joined feature names."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "heuristic", "size", "features"])
    for traj in trajectories:
        for t, cand, size in traj.per_iteration:
            w.writerow([t, traj.heuristic.kind, size, ",".join(names[i] for i in sorted(cand))])
    return buf.getvalue()
