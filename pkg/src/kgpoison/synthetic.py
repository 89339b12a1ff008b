"""Small synthetic knowledge graphs with planted relation patterns."""

from __future__ import annotations

import numpy as np

from .graph import Dataset, dataset_from_rows


def _involution(n_groups: int, rng: np.random.Generator) -> np.ndarray:
    perm = rng.permutation(n_groups)
    out = np.arange(n_groups)
    for a, b in zip(perm[0::2], perm[1::2]):
        out[a], out[b] = b, a
    return out


def symmetric_kg_rows(
    n_entities: int = 200,
    n_train: int = 2000,
    n_symmetric: int = 6,
    n_asymmetric: int = 2,
    n_groups: int = 20,
    holdout: float = 0.1,
    within_group: bool = True,
    seed: int = 0,
):
    """Name-level (train, valid, test) rows for a KG with a symmetric relation family.

    Entities fall into ``n_groups`` groups.  Each relation links one group to a
    partner group.  The symmetric family links entities inside their own group
    (or, with ``within_group=False``, across groups paired by an involution)
    and stores every fact in both directions.  Asymmetric relations follow a
    random permutation of the groups.  Held-out facts of symmetric relations
    always have their reverse in train, so they are predictable through
    symmetry alone.
    """
    rng = np.random.default_rng(seed)
    group = np.arange(n_entities) % n_groups
    rng.shuffle(group)
    members = [np.flatnonzero(group == g) for g in range(n_groups)]
    n_rel = n_symmetric + n_asymmetric
    sym_partner = (lambda: np.arange(n_groups)) if within_group else (lambda: _involution(n_groups, rng))
    partner = [sym_partner() if r < n_symmetric else rng.permutation(n_groups) for r in range(n_rel)]

    facts: set[tuple[int, int, int]] = set()
    held: list[tuple[int, int, int]] = []
    target_total = int(n_train / (1.0 - holdout))
    while len(facts) < target_total:
        r = int(rng.integers(n_rel))
        a = int(rng.integers(n_entities))
        b = int(rng.choice(members[partner[r][group[a]]]))
        if a == b or (a, r, b) in facts:
            continue
        facts.add((a, r, b))
        if r < n_symmetric:
            facts.add((b, r, a))
            if rng.random() < 2 * holdout:
                held.append((a, r, b))
        elif rng.random() < holdout:
            held.append((a, r, b))

    held_set = set(held)
    train = [t for t in sorted(facts) if t not in held_set]
    order = rng.permutation(len(train))
    train = [train[i] for i in order]
    # every entity must occur in train so the vocabulary covers it
    present = {e for s, _, o in train for e in (s, o)}
    for e in range(n_entities):
        if e not in present:
            r = n_symmetric  # first asymmetric relation; partner group is never empty
            b = int(members[partner[r][group[e]]][0])
            train.append((e, r, b))
    rng.shuffle(held)
    half = len(held) // 2

    def names(rows):
        return [(f"e{s}", f"r{r}", f"e{o}") for s, r, o in rows]

    return names(train), names(held[:half]), names(held[half:])


def symmetric_kg(**kwargs) -> Dataset:
    return dataset_from_rows(*symmetric_kg_rows(**kwargs))


def random_kg(n_entities: int, n_relations: int, n_triples: int, seed: int = 0, test_fraction: float = 0.2) -> Dataset:
    """Uniformly random triples split into train/valid/test, for oracle tests."""
    rng = np.random.default_rng(seed)
    rows: set[tuple[int, int, int]] = set()
    cap = n_entities * n_entities * n_relations
    while len(rows) < min(n_triples, cap):
        rows.add((int(rng.integers(n_entities)), int(rng.integers(n_relations)), int(rng.integers(n_entities))))
    rows_l = sorted(rows)
    rng.shuffle(rows_l)
    n_test = max(1, int(len(rows_l) * test_fraction))
    names = [(f"e{s}", f"r{r}", f"e{o}") for s, r, o in rows_l]
    test, valid, train = names[:n_test], names[n_test:2 * n_test], names[2 * n_test:]
    return dataset_from_rows(train, valid, test)
