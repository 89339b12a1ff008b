"""Product t-norm soft truth values for triples and pattern groundings."""

from __future__ import annotations

import numpy as np

from ..models import Model, score
from ..trainer import sigmoid

PATTERNS = ("sym", "inv", "com")


def soft_truth_atom(model: Model, triple) -> float:
    """Truth value of a single triple: the sigmoid of its score."""
    return float(sigmoid(score(model, triple)))


def t_and(a, b):
    return np.multiply(a, b)


def t_or(a, b):
    return a + b - np.multiply(a, b)


def t_not(a):
    return 1.0 - np.asarray(a)


def implies(body, head):
    """Truth of ``body => head``, i.e. not(body and not head) = body*head - body + 1.

    Grouped as body*head + (1 - body) so that body=1 gives head and body=0
    gives 1 with no rounding.
    """
    return body * head + (1.0 - body)


def ground_score(pattern: str, body_scores, head_score):
    """Soft truth of a grounded pattern from its body atoms and head atom.

    Symmetry and inversion take one body atom, composition takes two whose
    conjunction is their product.  Arguments broadcast, so arrays of
    candidate groundings can be scored at once.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}")
    body = np.asarray(body_scores, dtype=float)
    need = 2 if pattern == "com" else 1
    if body.shape[:1] != (need,):
        raise ValueError(f"pattern {pattern!r} needs {need} body score(s)")
    b = body[0] if need == 1 else body[0] * body[1]
    out = implies(b, np.asarray(head_score, dtype=float))
    return float(out) if np.ndim(out) == 0 else out
