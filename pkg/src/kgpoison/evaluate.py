"""Filtered entity ranking, link-prediction metrics and target selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graph import Dataset, FilterIndex, Triple
from .models import Model, score_side

SIDES = ("subject", "object")
HITS_AT = (1, 3, 10)


def filtered_rank(scores: np.ndarray, true_idx: int, filtered: Iterable[int]) -> int:
    """1 + number of unfiltered candidates scoring strictly above the true entity."""
    scores = np.array(scores, dtype=float)
    drop = [e for e in filtered if e != true_idx]
    if drop:
        scores[drop] = -np.inf
    return 1 + int(np.count_nonzero(scores > scores[true_idx]))


def rank_triple(model: Model, triple: Triple, filter_index: FilterIndex, side: str) -> int:
    true_idx = triple.o if side == "object" else triple.s
    scores = score_side(model, triple, side)
    return filtered_rank(scores, true_idx, filter_index.known(triple, side))


@dataclass
class RankOutcome:
    triple: Triple
    subject_rank: int
    object_rank: int


@dataclass
class MetricsReport:
    mr: float
    mrr: float
    hits_at: dict[int, float]
    side: str
    n: int
    ranks: list[int] = field(default_factory=list, repr=False)

    @classmethod
    def from_ranks(cls, ranks: Sequence[int], side: str = "both") -> "MetricsReport":
        if len(ranks) == 0:
            raise ValueError("cannot compute metrics over zero ranks")
        arr = np.asarray(ranks, dtype=float)
        hits = {n: float(np.mean(arr <= n)) for n in HITS_AT}
        return cls(float(arr.mean()), float(np.mean(1.0 / arr)), hits, side, len(arr), list(ranks))

    def rows(self):
        yield "mr", self.side, self.mr
        yield "mrr", self.side, self.mrr
        for n, v in self.hits_at.items():
            yield f"hits@{n}", self.side, v

    def summary(self) -> str:
        hits = " ".join(f"H@{n}={v:.4f}" for n, v in self.hits_at.items())
        return f"[{self.side}] n={self.n} MR={self.mr:.3f} MRR={self.mrr:.4f} {hits}"


def rank_outcomes(model: Model, triples: Iterable[Triple], filter_index: FilterIndex) -> list[RankOutcome]:
    return [
        RankOutcome(t, rank_triple(model, t, filter_index, "subject"), rank_triple(model, t, filter_index, "object"))
        for t in triples
    ]


def metrics_from_outcomes(outcomes: Sequence[RankOutcome], side: str = "both") -> MetricsReport:
    if side == "subject":
        ranks = [x.subject_rank for x in outcomes]
    elif side == "object":
        ranks = [x.object_rank for x in outcomes]
    elif side == "both":
        ranks = [r for x in outcomes for r in (x.subject_rank, x.object_rank)]
    else:
        raise ValueError(f"unknown side {side!r}")
    return MetricsReport.from_ranks(ranks, side)


def evaluate(model: Model, triples: Sequence[Triple], filter_index: FilterIndex, side: str = "both") -> MetricsReport:
    """MR, MRR and Hits@{1,3,10}; with side="both" each triple contributes two ranks."""
    if not triples:
        raise ValueError("evaluate() needs at least one triple")
    if side == "both":
        return metrics_from_outcomes(rank_outcomes(model, triples, filter_index), "both")
    return MetricsReport.from_ranks([rank_triple(model, t, filter_index, side) for t in triples], side)


def write_metrics(reports: Iterable[MetricsReport], path) -> None:
    with open(path, "w") as fh:
        fh.write("metric\tside\tvalue\n")
        for rep in reports:
            for metric, side, value in rep.rows():
                fh.write(f"{metric}\t{side}\t{value!r}\n")


@dataclass
class TargetRecord:
    triple: Triple
    subject_rank: int
    object_rank: int


def select_targets(
    model: Model,
    dataset: Dataset,
    filter_index: FilterIndex,
    cutoff: int = 10,
    require_both: bool = True,
) -> list[TargetRecord]:
    """Test triples ranked within ``cutoff`` on both sides (or either, if not require_both)."""
    targets = []
    for out in rank_outcomes(model, dataset.test, filter_index):
        ok = (out.subject_rank <= cutoff, out.object_rank <= cutoff)
        if all(ok) if require_both else any(ok):
            targets.append(TargetRecord(out.triple, out.subject_rank, out.object_rank))
    return targets
