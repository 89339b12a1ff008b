"""Choosing adversarial relations from the algebra of relation embeddings.

Multiplicative models treat a relation as an elementwise product, so an
inverse r_i satisfies e_r * e_ri ~ 1 and a composition (r1, r2) satisfies
e_r1 * e_r2 ~ e_r.  Additive models use sums instead: e_r + e_ri ~ 0 and
e_r1 + e_r2 ~ e_r.  For ComplEx the products are complex Hadamard products.
"""

from __future__ import annotations

import numpy as np

from ..models import Model, ModelKind, _complex_mul


def inverse_criterion(model: Model, r: int) -> np.ndarray:
    """Per-relation distance from being the inverse of ``r`` (inf at ``r`` itself)."""
    R = model.relations
    er = R[r]
    if model.kind is ModelKind.TRANSE:
        crit = np.linalg.norm(R + er, axis=1)
    elif model.kind is ModelKind.COMPLEX:
        k = model.dim
        # real part of sum_d e_ri[d] * e_r[d] (no conjugation)
        dot = R[:, :k] @ er[:k] - R[:, k:] @ er[k:]
        crit = np.abs(dot - 1.0)
    else:
        crit = np.abs(R @ er - 1.0)
    crit = crit.astype(float)
    crit[r] = np.inf
    return crit


def find_inverse_relation(model: Model, r: int) -> int:
    if model.n_relations < 2:
        raise ValueError("need at least two relations to pick an inverse")
    return int(np.argmin(inverse_criterion(model, r)))


def composition_distances(model: Model, r: int) -> np.ndarray:
    """Matrix D[r1, r2] = ||compose(e_r1, e_r2) - e_r||_2 over all ordered pairs."""
    R = model.relations
    if model.kind is ModelKind.TRANSE:
        composed = R[:, None, :] + R[None, :, :]
    elif model.kind is ModelKind.COMPLEX:
        composed = _complex_mul(R[:, None, :], R[None, :, :], model.dim)
    else:
        composed = R[:, None, :] * R[None, :, :]
    return np.linalg.norm(composed - R[r], axis=-1)


def find_composition_pair(model: Model, r: int, exclude_target: bool = False) -> tuple[int, int]:
    """Ordered pair (r1, r2) whose composition lands closest to ``r``.

    Ties go to the lexicographically smallest pair.  Self-pairs and pairs
    containing ``r`` are allowed unless ``exclude_target`` is set.
    """
    if model.n_relations < 2:
        raise ValueError("need at least two relations to pick a composition pair")
    dist = composition_distances(model, r)
    if exclude_target:
        dist[r, :] = np.inf
        dist[:, r] = np.inf
    flat = int(np.argmin(dist))
    r1, r2 = divmod(flat, dist.shape[1])
    return r1, r2
