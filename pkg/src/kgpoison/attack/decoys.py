"""Decoy-entity heuristics and the composition attack's intermediate entity.

A decoy replaces one entity of a target triple (s, r, o): on the object side
the decoy triple is (s, r, o'), on the subject side (s', r, o).  All argmin and
argmax choices break ties toward the lowest entity id.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..graph import FilterIndex, Triple
from ..models import Model, score_all_objects, score_all_subjects, score_emb, score_side
from ..trainer import sigmoid
from .logic import implies

log = logging.getLogger(__name__)

HEURISTICS = ("truth", "rank", "cos")
STEP3_MODES = ("literal", "body")


class Unattackable(Exception):
    """No valid choice exists for this target side; the caller skips it."""


@dataclass(frozen=True)
class DecoyChoice:
    target: Triple
    side: str
    entity: int
    score: float
    heuristic: str = ""

    @property
    def triple(self) -> Triple:
        return decoy_triple(self.target, self.side, self.entity)


def decoy_triple(target: Triple, side: str, entity: int) -> Triple:
    s, r, o = target
    return Triple(s, r, entity) if side == "object" else Triple(entity, r, o)


def replaced_entity(target: Triple, side: str) -> int:
    return target.o if side == "object" else target.s


def decoy_candidates(target: Triple, side: str, filter_index: FilterIndex, n_entities: int) -> np.ndarray:
    """Sorted entities whose decoy triple is unseen in every split."""
    mask = np.ones(n_entities, dtype=bool)
    known = list(filter_index.known(target, side))
    if known:
        mask[known] = False
    mask[replaced_entity(target, side)] = False
    return np.flatnonzero(mask)


def _require(candidates) -> np.ndarray:
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.size == 0:
        raise Unattackable("no valid decoy candidates")
    return cand


def _argmin(values: np.ndarray, cand: np.ndarray) -> tuple[int, float]:
    i = int(np.argmin(values))  # first minimum -> lowest id, since cand is sorted
    return int(cand[i]), float(values[i])


def _argmax(values: np.ndarray, cand: np.ndarray) -> tuple[int, float]:
    i = int(np.argmax(values))
    return int(cand[i]), float(values[i])


def body_truths_single(model: Model, target: Triple, side: str, relation: int) -> np.ndarray:
    """Truth of the single body atom for every possible decoy entity.

    Object side: (o', rel, s) for all o'.  Subject side: (o, rel, s') for all s'.
    ``relation`` is r for symmetry and the inverse relation for inversion.
    """
    s, _, o = target
    if side == "object":
        return sigmoid(score_all_subjects(model, relation, s))
    return sigmoid(score_all_objects(model, o, relation))


def composition_truths(model: Model, target: Triple, side: str, pair, centroids: np.ndarray) -> np.ndarray:
    """Body-conjunction truth B[c, e] with each centroid as the middle entity.

    Object side grounding: (s, r1, z) and (z, r2, o').  Subject side:
    (s', r1, z) and (z, r2, o).
    """
    s, _, o = target
    r1, r2 = pair
    E, R = model.entities, model.relations
    out = np.empty((len(centroids), model.n_entities))
    for c, z in enumerate(centroids):
        if side == "object":
            b1 = sigmoid(score_emb(model, E[s], R[r1], z))
            b2 = sigmoid(score_emb(model, z, R[r2], E))
        else:
            b1 = sigmoid(score_emb(model, E, R[r1], z))
            b2 = sigmoid(score_emb(model, z, R[r2], E[o]))
        out[c] = b1 * b2
    return out


def select_decoy_truth(
    model: Model,
    target: Triple,
    side: str,
    pattern: str,
    candidates,
    *,
    inverse: int | None = None,
    pair: tuple[int, int] | None = None,
    centroids: np.ndarray | None = None,
) -> DecoyChoice:
    """Decoy whose grounding (decoy as head atom) has the lowest soft truth."""
    cand = _require(candidates)
    head = sigmoid(score_side(model, target, side))[cand]
    if pattern in ("sym", "inv"):
        rel = target.r if pattern == "sym" else inverse
        if rel is None:
            raise ValueError("inversion needs the inverse relation")
        body = body_truths_single(model, target, side, rel)[cand]
        ent, val = _argmin(implies(body, head), cand)
    elif pattern == "com":
        if pair is None or centroids is None:
            raise ValueError("composition needs a relation pair and cluster centroids")
        body = composition_truths(model, target, side, pair, centroids)[:, cand]
        ent, val = _argmin(implies(body, head[None, :]).min(axis=0), cand)
    else:
        raise ValueError(f"unknown pattern {pattern!r}")
    return DecoyChoice(target, side, ent, val, "truth")


def select_decoy_rank(model: Model, target: Triple, side: str, candidates) -> DecoyChoice:
    """Negative ranked directly below the target among valid negatives.

    Under the optimistic tie rule a negative with the same score as the
    target sits below it, so this is the best negative scoring <= the target.
    """
    cand = _require(candidates)
    scores = score_side(model, target, side)
    true_score = scores[replaced_entity(target, side)]
    neg = scores[cand]
    below = neg <= true_score
    if not below.any():
        raise Unattackable("target is ranked below every valid negative")
    ent, val = _argmax(np.where(below, neg, -np.inf), cand)
    return DecoyChoice(target, side, ent, val, "rank")


def cosine_distances(model: Model, entity: int, cand: np.ndarray) -> np.ndarray:
    """1 - cos(e_c, e_entity) on stacked real vectors; zero vectors count as orthogonal."""
    E = model.entities
    ref = E[entity]
    X = E[cand]
    norms = np.linalg.norm(X, axis=1) * np.linalg.norm(ref)
    zero = norms == 0
    if zero.any():
        log.warning("zero-norm embedding among cosine candidates; treating as orthogonal")
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(zero, 0.0, (X @ ref) / np.where(zero, 1.0, norms))
    return 1.0 - cos


def select_decoy_cos(model: Model, target: Triple, side: str, candidates) -> DecoyChoice:
    cand = _require(candidates)
    dist = cosine_distances(model, replaced_entity(target, side), cand)
    ent, val = _argmax(dist, cand)
    return DecoyChoice(target, side, ent, val, "cos")


def com_body(target: Triple, side: str, decoy: int, pair, mid: int) -> tuple[Triple, Triple]:
    """The two composition edits through intermediate entity ``mid``."""
    r1, r2 = pair
    if side == "object":
        return Triple(target.s, r1, mid), Triple(mid, r2, decoy)
    return Triple(decoy, r1, mid), Triple(mid, r2, target.o)


def select_adversarial_entity_com(
    model: Model,
    target: Triple,
    side: str,
    decoy: int,
    pair: tuple[int, int],
    mode: str = "literal",
    existing=None,
) -> tuple[int, float]:
    """Intermediate entity o'' for the composition edits, with its criterion value.

    ``literal`` maximises the grounding truth b1*b2*h - b1*b2 + 1; ``body``
    maximises b1*b2.  o'' may not be s, o or the decoy, and neither edit may
    already be in ``existing`` (a FilterIndex).
    """
    if mode not in STEP3_MODES:
        raise ValueError(f"unknown step-3 mode {mode!r}")
    r1, r2 = pair
    s, r, o = target
    if side == "object":
        x, y = s, decoy
    else:
        x, y = decoy, o
    b1 = sigmoid(score_all_objects(model, x, r1))
    b2 = sigmoid(score_all_subjects(model, r2, y))
    h = float(sigmoid(score_emb(model, model.entities[x], model.relations[r], model.entities[y])))

    mask = np.ones(model.n_entities, dtype=bool)
    mask[[s, o, decoy]] = False
    if existing is not None:
        # (x, r1, m) and (m, r2, y) already known
        taken = existing.objects(x, r1) | existing.subjects(r2, y)
        if taken:
            mask[list(taken)] = False
    cand = np.flatnonzero(mask)
    if cand.size == 0:
        raise Unattackable("no intermediate entity available")
    body = (b1 * b2)[cand]
    crit = implies(body, h) if mode == "literal" else body
    return _argmax(crit, cand)
