"""Turning targets into adversarial additions, plus the random baselines."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..evaluate import TargetRecord
from ..graph import Dataset, DatasetError, FilterIndex, Triple, Vocabulary, build_filter_index
from ..models import Model
from .decoys import (
    HEURISTICS,
    STEP3_MODES,
    DecoyChoice,
    Unattackable,
    com_body,
    decoy_candidates,
    select_adversarial_entity_com,
    select_decoy_cos,
    select_decoy_rank,
    select_decoy_truth,
)
from .kmeans import kmeans
from .logic import PATTERNS
from .relations import find_composition_pair, find_inverse_relation

log = logging.getLogger(__name__)

SIDES = ("subject", "object")
BASELINES = ("random_n", "random_g1", "random_g2")


@dataclass(frozen=True)
class AttackConfig:
    pattern: str = "sym"
    heuristic: str = "truth"
    clusters: int = 100
    seed: int = 0
    step3_mode: str = "literal"
    exclude_target_pair: bool = False

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}")
        if self.heuristic not in HEURISTICS:
            raise ValueError(f"unknown heuristic {self.heuristic!r}")
        if self.step3_mode not in STEP3_MODES:
            raise ValueError(f"unknown step-3 mode {self.step3_mode!r}")
        if self.clusters < 1:
            raise ValueError("clusters must be >= 1")

    @property
    def name(self) -> str:
        return f"{self.pattern}_{self.heuristic}"


@dataclass
class AdversarialEdit:
    triples: tuple[Triple, ...]
    pattern: str
    heuristic: str
    target: Triple
    side: str
    decoy: DecoyChoice | None = None


@dataclass
class AttackResult:
    name: str
    edits: list[AdversarialEdit] = field(default_factory=list)
    decoys: list[DecoyChoice] = field(default_factory=list)
    skipped: list[tuple[Triple, str, str]] = field(default_factory=list)
    seconds: float = 0.0

    def triples(self) -> list[Triple]:
        return [t for e in self.edits for t in e.triples]

    def __len__(self) -> int:
        return sum(len(e.triples) for e in self.edits)


def _targets(targets: Iterable) -> list[Triple]:
    return [t.triple if isinstance(t, TargetRecord) else Triple(*t) for t in targets]


def entity_centroids(model: Model, k: int, seed: int = 0) -> np.ndarray:
    """k-means centroids of the entity table (k clamped to the entity count)."""
    k = min(k, model.n_entities)
    return kmeans(model.entities, k, seed).centroids


def attack_candidates(target: Triple, side: str, pattern: str, filter_index: FilterIndex, n_entities: int) -> np.ndarray:
    cand = decoy_candidates(target, side, filter_index, n_entities)
    if pattern == "sym":
        # a self-loop decoy would make the symmetric edit equal the decoy itself
        own = target.s if side == "object" else target.o
        cand = cand[cand != own]
    return cand


def _single_edit(target: Triple, side: str, decoy: int, rel: int) -> Triple:
    if side == "object":
        return Triple(decoy, rel, target.s)
    return Triple(target.o, rel, decoy)


def generate_attack(
    model: Model,
    dataset: Dataset,
    targets: Sequence,
    config: AttackConfig,
    filter_index: FilterIndex | None = None,
    centroids: np.ndarray | None = None,
) -> AttackResult:
    """One decoy per target side, then the edits that support it through the pattern.

    Edit triples already present in any split, repeated across targets, or
    equal to any chosen decoy triple are dropped.  ``centroids`` lets the
    caller precompute the clustering for composition with soft truth.
    """
    fi = filter_index if filter_index is not None else build_filter_index(dataset)
    n = dataset.n_entities
    pattern, heuristic = config.pattern, config.heuristic
    tlist = _targets(targets)
    if pattern == "com" and heuristic == "truth" and centroids is None:
        centroids = entity_centroids(model, config.clusters, config.seed)

    result = AttackResult(config.name)
    t0 = time.perf_counter()
    relations = sorted({t.r for t in tlist})
    inverse = {r: find_inverse_relation(model, r) for r in relations} if pattern == "inv" else {}
    pairs = {r: find_composition_pair(model, r, config.exclude_target_pair) for r in relations} if pattern == "com" else {}

    raw: list[AdversarialEdit] = []
    for target in tlist:
        for side in SIDES:
            try:
                cand = attack_candidates(target, side, pattern, fi, n)
                if heuristic == "truth":
                    decoy = select_decoy_truth(
                        model, target, side, pattern, cand,
                        inverse=inverse.get(target.r), pair=pairs.get(target.r), centroids=centroids,
                    )
                elif heuristic == "rank":
                    decoy = select_decoy_rank(model, target, side, cand)
                else:
                    decoy = select_decoy_cos(model, target, side, cand)
                if pattern == "com":
                    pair = pairs[target.r]
                    mid, _ = select_adversarial_entity_com(
                        model, target, side, decoy.entity, pair, config.step3_mode, fi
                    )
                    triples = com_body(target, side, decoy.entity, pair, mid)
                else:
                    rel = target.r if pattern == "sym" else inverse[target.r]
                    triples = (_single_edit(target, side, decoy.entity, rel),)
            except Unattackable as exc:
                log.info("skipping %s side of %s: %s", side, tuple(target), exc)
                result.skipped.append((target, side, str(exc)))
                continue
            result.decoys.append(decoy)
            raw.append(AdversarialEdit(tuple(triples), pattern, heuristic, target, side, decoy))

    decoy_set = {d.triple for d in result.decoys}
    result.edits = _filter_edits(raw, fi, decoy_set)
    result.seconds = time.perf_counter() - t0
    return result


def _filter_edits(raw: list[AdversarialEdit], fi: FilterIndex, forbidden: set[Triple]) -> list[AdversarialEdit]:
    seen: set[Triple] = set()
    kept = []
    for edit in raw:
        triples = []
        for t in edit.triples:
            if t in fi or t in seen or t in forbidden:
                continue
            seen.add(t)
            triples.append(t)
        if triples:
            edit.triples = tuple(triples)
            kept.append(edit)
    return kept


def generate_random_baseline(
    dataset: Dataset,
    targets: Sequence,
    variant: str,
    seed: int = 0,
    filter_index: FilterIndex | None = None,
    max_retries: int = 100,
) -> AttackResult:
    """Random additions with the proposed attacks' budget.

    random_n adds one triple incident to each target entity; random_g1 one
    global triple per target side; random_g2 two global triples per side.
    Existing or repeated triples are resampled up to ``max_retries`` times.
    """
    if variant not in BASELINES:
        raise ValueError(f"unknown baseline {variant!r}")
    fi = filter_index if filter_index is not None else build_filter_index(dataset)
    rng = np.random.default_rng(seed)
    n, nr = dataset.n_entities, dataset.n_relations
    per_side = 2 if variant == "random_g2" else 1
    result = AttackResult(variant)
    seen: set[Triple] = set()
    t0 = time.perf_counter()

    def draw(anchor: int | None) -> Triple:
        if anchor is None:
            return Triple(int(rng.integers(n)), int(rng.integers(nr)), int(rng.integers(n)))
        other, rel = int(rng.integers(n)), int(rng.integers(nr))
        if rng.integers(2) == 0:
            return Triple(anchor, rel, other)
        return Triple(other, rel, anchor)

    for target in _targets(targets):
        for side in SIDES:
            anchor = (target.s if side == "subject" else target.o) if variant == "random_n" else None
            triples = []
            for _ in range(per_side):
                for _ in range(max_retries):
                    t = draw(anchor)
                    if t not in fi and t not in seen:
                        break
                else:
                    log.info("retry budget exhausted for %s side of %s", side, tuple(target))
                    result.skipped.append((target, side, "retry budget exhausted"))
                    continue
                seen.add(t)
                triples.append(t)
            if triples:
                result.edits.append(AdversarialEdit(tuple(triples), variant, "random", target, side))
    result.seconds = time.perf_counter() - t0
    return result


# --- TSV interfaces ----------------------------------------------------------

EDIT_COLUMNS = (
    "subject", "relation", "object", "pattern", "heuristic",
    "target_subject", "target_relation", "target_object", "side",
)


def write_edits(result: AttackResult, vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(EDIT_COLUMNS) + "\n")
        for edit in result.edits:
            tgt = vocab.decode(edit.target)
            for t in edit.triples:
                fh.write("\t".join([*vocab.decode(t), edit.pattern, edit.heuristic, *tgt, edit.side]) + "\n")


def read_edits(path, vocab: Vocabulary) -> list[Triple]:
    """Edit triples from an edits TSV; provenance columns are ignored."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\r\n").split("\t")
            if lineno == 1 and parts[0] == "subject":
                continue
            if len(parts) < 3:
                continue
            t = vocab.encode(*parts[:3])
            if t is None:
                raise DatasetError(f"{path}:{lineno}: edit uses a name outside the vocabulary")
            out.append(t)
    return out


DECOY_COLUMNS = (
    "side", "decoy_subject", "decoy_relation", "decoy_object",
    "target_subject", "target_relation", "target_object", "heuristic", "score",
)


def write_decoys(decoys: Iterable[DecoyChoice], vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(DECOY_COLUMNS) + "\n")
        for d in decoys:
            fh.write("\t".join([d.side, *vocab.decode(d.triple), *vocab.decode(d.target), d.heuristic, repr(d.score)]) + "\n")


def read_decoys(path, vocab: Vocabulary) -> list[DecoyChoice]:
    out = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            return out
        for line in fh:
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) < 9:
                continue
            side = parts[0]
            decoy = vocab.encode(*parts[1:4])
            target = vocab.encode(*parts[4:7])
            if decoy is None or target is None:
                raise ValueError(f"{path}: decoy row uses unknown names: {line!r}")
            entity = decoy.o if side == "object" else decoy.s
            out.append(DecoyChoice(target, side, entity, float(parts[8]), parts[7]))
    return out
