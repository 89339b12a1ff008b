"""Triple datasets: loading, vocabularies, the filter index and poison merging.

Files are UTF-8 TSV with one ``subject<TAB>relation<TAB>object`` line per
triple.  Entity and relation ids are assigned in order of first occurrence in
the train file (subject before object), so identical files always load to
identical integer-coded triples.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")


class Triple(NamedTuple):
    s: int
    r: int
    o: int


class DatasetError(ValueError):
    """Raised for unusable dataset files or out-of-vocabulary edits."""


class ParseError(DatasetError):
    def __init__(self, path, lineno: int, line: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: expected 3 tab-separated fields, got {line!r}")


class Vocabulary:
    """Bijective name <-> id maps for entities and relations, ids contiguous from 0."""

    def __init__(self, entities: Sequence[str] = (), relations: Sequence[str] = ()):
        self.entity_names: list[str] = []
        self.relation_names: list[str] = []
        self.entity_ids: dict[str, int] = {}
        self.relation_ids: dict[str, int] = {}
        for name in entities:
            self.add_entity(name)
        for name in relations:
            self.add_relation(name)

    def add_entity(self, name: str) -> int:
        idx = self.entity_ids.get(name)
        if idx is None:
            idx = self.entity_ids[name] = len(self.entity_names)
            self.entity_names.append(name)
        return idx

    def add_relation(self, name: str) -> int:
        idx = self.relation_ids.get(name)
        if idx is None:
            idx = self.relation_ids[name] = len(self.relation_names)
            self.relation_names.append(name)
        return idx

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    def encode(self, s: str, r: str, o: str) -> Triple | None:
        """Integer triple for the names, or None if any name is unknown."""
        try:
            return Triple(self.entity_ids[s], self.relation_ids[r], self.entity_ids[o])
        except KeyError:
            return None

    def decode(self, t: Triple) -> tuple[str, str, str]:
        return self.entity_names[t.s], self.relation_names[t.r], self.entity_names[t.o]

    def is_valid(self, t: Triple) -> bool:
        return (
            0 <= t.s < self.n_entities
            and 0 <= t.o < self.n_entities
            and 0 <= t.r < self.n_relations
        )


@dataclass
class LoadStats:
    duplicate_train: int = 0
    dropped_valid: int = 0
    dropped_test: int = 0
    added_edits: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(vars(self))


@dataclass
class Dataset:
    vocab: Vocabulary
    train: list[Triple]
    valid: list[Triple]
    test: list[Triple]
    stats: LoadStats = field(default_factory=LoadStats)

    @property
    def n_entities(self) -> int:
        return self.vocab.n_entities

    @property
    def n_relations(self) -> int:
        return self.vocab.n_relations

    def split(self, name: str) -> list[Triple]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def train_array(self) -> np.ndarray:
        return np.asarray(self.train, dtype=np.int64).reshape(-1, 3)


def read_tsv(path) -> list[tuple[str, str, str]]:
    """Parse a triple file; blank lines are skipped."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(path, lineno, line)
            rows.append((parts[0], parts[1], parts[2]))
    return rows


def dataset_from_rows(train_rows, valid_rows=(), test_rows=()) -> Dataset:
    """Build a Dataset from name-level rows, applying the load-time filters."""
    vocab = Vocabulary()
    train: list[Triple] = []
    seen: set[Triple] = set()
    stats = LoadStats()
    for s, r, o in train_rows:
        t = Triple(vocab.add_entity(s), vocab.add_relation(r), vocab.add_entity(o))
        if t in seen:
            stats.duplicate_train += 1
            continue
        seen.add(t)
        train.append(t)
    if not train:
        raise DatasetError("train split is empty")

    def encode_all(rows) -> tuple[list[Triple], int]:
        kept, dropped = [], 0
        for row in rows:
            t = vocab.encode(*row)
            if t is None:
                dropped += 1
            else:
                kept.append(t)
        return kept, dropped

    valid, stats.dropped_valid = encode_all(valid_rows)
    test, stats.dropped_test = encode_all(test_rows)
    if stats.duplicate_train:
        log.info("dropped %d duplicate train triples", stats.duplicate_train)
    if stats.dropped_valid or stats.dropped_test:
        log.info(
            "dropped %d valid / %d test triples with unseen entities or relations",
            stats.dropped_valid,
            stats.dropped_test,
        )
    return Dataset(vocab, train, valid, test, stats)


def load_dataset(train_path, valid_path, test_path) -> Dataset:
    train_rows = read_tsv(train_path)
    if not train_rows:
        raise DatasetError(f"{train_path}: train file is empty")
    return dataset_from_rows(train_rows, read_tsv(valid_path), read_tsv(test_path))


def load_dataset_dir(directory) -> Dataset:
    d = Path(directory)
    return load_dataset(d / "train.txt", d / "valid.txt", d / "test.txt")


def write_triples(path, triples: Iterable[Triple], vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write("\t".join(vocab.decode(t)) + "\n")


def write_dataset(dataset: Dataset, directory) -> Path:
    """Write the three splits plus a ``summary.txt`` sidecar of load/merge counts."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in SPLITS:
        write_triples(d / f"{name}.txt", dataset.split(name), dataset.vocab)
    summary = dict(
        entities=dataset.n_entities,
        relations=dataset.n_relations,
        train=len(dataset.train),
        valid=len(dataset.valid),
        test=len(dataset.test),
        **dataset.stats.as_dict(),
    )
    (d / "summary.txt").write_text("".join(f"{k}={v}\n" for k, v in summary.items()))
    return d


class FilterIndex:
    """Known-true completions over train, valid and test, for filtered ranking."""

    def __init__(self, triples: Iterable[Triple] = ()):
        self.sr_to_o: dict[tuple[int, int], set[int]] = {}
        self.ro_to_s: dict[tuple[int, int], set[int]] = {}
        for t in triples:
            self.add(t)

    def add(self, t: Triple) -> None:
        self.sr_to_o.setdefault((t.s, t.r), set()).add(t.o)
        self.ro_to_s.setdefault((t.r, t.o), set()).add(t.s)

    def __contains__(self, t) -> bool:
        s, r, o = t
        return o in self.sr_to_o.get((s, r), ())

    def objects(self, s: int, r: int) -> set[int]:
        return self.sr_to_o.get((s, r), set())

    def subjects(self, r: int, o: int) -> set[int]:
        return self.ro_to_s.get((r, o), set())

    def known(self, t: Triple, side: str) -> set[int]:
        """Entities completing the query of ``t`` on ``side`` to a known triple."""
        if side == "object":
            return self.objects(t.s, t.r)
        if side == "subject":
            return self.subjects(t.r, t.o)
        raise ValueError(f"side must be 'subject' or 'object', got {side!r}")

    def __len__(self) -> int:
        return sum(len(v) for v in self.sr_to_o.values())


def build_filter_index(dataset: Dataset) -> FilterIndex:
    return FilterIndex([*dataset.train, *dataset.valid, *dataset.test])


def merge_poison(dataset: Dataset, edits: Iterable[Triple]) -> Dataset:
    """Return a copy of ``dataset`` whose train split also holds the new edits.

    Edits are deduplicated and those already in train are skipped; the number
    actually added is recorded in ``stats.added_edits``.
    """
    vocab = dataset.vocab
    existing = set(dataset.train)
    added: list[Triple] = []
    for e in edits:
        e = Triple(*(int(x) for x in e))
        if not vocab.is_valid(e):
            raise DatasetError(f"edit {tuple(e)} references ids outside the vocabulary")
        if e in existing:
            continue
        existing.add(e)
        added.append(e)
    stats = LoadStats(**dataset.stats.as_dict())
    stats.added_edits = len(added)
    return Dataset(vocab, [*dataset.train, *added], list(dataset.valid), list(dataset.test), stats)
