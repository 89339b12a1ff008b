"""DistMult, ComplEx and TransE scoring with analytic gradients.

ComplEx rows are stored as real vectors of width ``2 * dim``: the first half
holds real parts, the second half imaginary parts.  TransE logits are
``margin - ||e_s + e_r - e_o||_2`` so that they can be trained with a logistic
loss; the shift is monotone and leaves every ranking unchanged.

Per-triple and all-entity scoring evaluate the same elementwise expressions
in the same order and reduce with ``np.sum`` over the last axis, so a score
vector agrees bit-for-bit with the corresponding per-triple calls.
"""

from __future__ import annotations

import contextlib
import enum
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"KGEMB\x00\x01\x00"
DEFAULT_MARGIN = 9.0


class ModelKind(str, enum.Enum):
    DISTMULT = "distmult"
    COMPLEX = "complex"
    TRANSE = "transe"

    @property
    def family(self) -> str:
        return "additive" if self is ModelKind.TRANSE else "multiplicative"

    @property
    def multiplicative(self) -> bool:
        return self.family == "multiplicative"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class ScoreCounter:
    """Counts triple evaluations; a vector of n scores counts as n."""

    def __init__(self):
        self.calls = 0

    def add(self, n: int) -> None:
        self.calls += int(n)


_counters: list[ScoreCounter] = []


def _count(n: int) -> None:
    for c in _counters:
        c.add(n)


@contextlib.contextmanager
def count_scores():
    """Context manager yielding a counter of score evaluations made inside it."""
    counter = ScoreCounter()
    _counters.append(counter)
    try:
        yield counter
    finally:
        _counters.remove(counter)


@dataclass
class Model:
    kind: ModelKind
    entities: np.ndarray
    relations: np.ndarray
    dim: int
    margin: float = DEFAULT_MARGIN
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = ModelKind.parse(self.kind)
        width = self.width
        if self.entities.ndim != 2 or self.entities.shape[1] != width:
            raise ValueError(f"entity table must have {width} columns, got {self.entities.shape}")
        if self.relations.ndim != 2 or self.relations.shape[1] != width:
            raise ValueError(f"relation table must have {width} columns, got {self.relations.shape}")
        if self.kind is ModelKind.TRANSE and not self.margin > 0:
            raise ValueError("TransE margin must be positive")

    @property
    def width(self) -> int:
        return 2 * self.dim if self.kind is ModelKind.COMPLEX else self.dim

    @property
    def n_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relations.shape[0]

    def copy(self) -> "Model":
        return Model(self.kind, self.entities.copy(), self.relations.copy(), self.dim, self.margin, dict(self.meta))


def init_model(kind, n_entities: int, n_relations: int, dim: int, seed: int, margin: float = DEFAULT_MARGIN) -> Model:
    """Fresh model with entries drawn from U(-1/sqrt(dim), 1/sqrt(dim))."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    kind = ModelKind.parse(kind)
    width = 2 * dim if kind is ModelKind.COMPLEX else dim
    bound = 1.0 / np.sqrt(dim)
    rng = np.random.default_rng(seed)
    ent = rng.uniform(-bound, bound, size=(n_entities, width))
    rel = rng.uniform(-bound, bound, size=(n_relations, width))
    return Model(kind, ent, rel, dim, margin, {"seed": seed})


# --- embedding-level scoring -------------------------------------------------
# All helpers broadcast over leading axes; the last axis is the embedding.


def _halves(x: np.ndarray, dim: int):
    return x[..., :dim], x[..., dim:]


def score_emb(model: Model, es, er, eo) -> np.ndarray:
    """Score from raw embedding vectors; leading axes broadcast."""
    es, er, eo = np.asarray(es), np.asarray(er), np.asarray(eo)
    kind = model.kind
    if kind is ModelKind.DISTMULT:
        # (s*o)*r keeps the s<->o swap bit-exact
        out = np.sum((es * eo) * er, axis=-1)
    elif kind is ModelKind.COMPLEX:
        sr, si = _halves(es, model.dim)
        rr, ri = _halves(er, model.dim)
        or_, oi = _halves(eo, model.dim)
        a = sr * or_ + si * oi
        b = sr * oi - si * or_
        out = np.sum(rr * a + ri * b, axis=-1)
    else:
        d = (es + er) - eo
        out = model.margin - np.sqrt(np.sum(d * d, axis=-1))
    _count(np.size(out))
    return out


def score(model: Model, triple) -> float:
    s, r, o = triple
    return float(score_emb(model, model.entities[s], model.relations[r], model.entities[o]))


def score_all_objects(model: Model, s: int, r: int) -> np.ndarray:
    """Scores of (s, r, i) for every entity i."""
    return score_emb(model, model.entities[s], model.relations[r], model.entities)


def score_all_subjects(model: Model, r: int, o: int) -> np.ndarray:
    """Scores of (i, r, o) for every entity i."""
    return score_emb(model, model.entities, model.relations[r], model.entities[o])


def score_side(model: Model, triple, side: str) -> np.ndarray:
    """All-entity scores replacing the ``side`` slot of ``triple``."""
    s, r, o = triple
    if side == "object":
        return score_all_objects(model, s, r)
    if side == "subject":
        return score_all_subjects(model, r, o)
    raise ValueError(f"side must be 'subject' or 'object', got {side!r}")


def grad_score_emb(model: Model, es, er, eo):
    """Gradients of the score w.r.t. (e_s, e_r, e_o) for single vectors."""
    es, er, eo = (np.asarray(x, dtype=float) for x in (es, er, eo))
    kind = model.kind
    if kind is ModelKind.DISTMULT:
        return er * eo, es * eo, es * er
    if kind is ModelKind.COMPLEX:
        k = model.dim
        sr, si = es[:k], es[k:]
        rr, ri = er[:k], er[k:]
        or_, oi = eo[:k], eo[k:]
        gs = np.concatenate([rr * or_ + ri * oi, rr * oi - ri * or_])
        gr = np.concatenate([sr * or_ + si * oi, sr * oi - si * or_])
        go = np.concatenate([rr * sr - ri * si, rr * si + ri * sr])
        return gs, gr, go
    d = es + er - eo
    n = np.linalg.norm(d)
    if n == 0.0:
        z = np.zeros_like(d)
        return z, z.copy(), z.copy()
    u = d / n
    return -u, -u, u


def grad_score(model: Model, triple):
    s, r, o = triple
    return grad_score_emb(model, model.entities[s], model.relations[r], model.entities[o])


# --- batched logits for training --------------------------------------------


def _complex_mul(a: np.ndarray, b: np.ndarray, dim: int) -> np.ndarray:
    ar, ai = _halves(a, dim)
    br, bi = _halves(b, dim)
    return np.concatenate([ar * br - ai * bi, ar * bi + ai * br], axis=-1)


def query_vectors(model: Model, ent: np.ndarray, rel: np.ndarray, side: str) -> np.ndarray:
    """Query rows q such that the candidate logits are ``f(q, E)``.

    For multiplicative models logits are ``q @ E.T``; for TransE they are
    ``margin - ||q - E_i||``.
    """
    kind = model.kind
    if kind is ModelKind.DISTMULT:
        return ent * rel
    if kind is ModelKind.COMPLEX:
        if side == "object":
            return _complex_mul(ent, rel, model.dim)
        # (i, r, o): Re(<e_i, r * conj(o)>) = e_i . [Re(r*conj(o)), -Im(r*conj(o))]
        k = model.dim
        rr, ri = rel[:, :k], rel[:, k:]
        or_, oi = ent[:, :k], ent[:, k:]
        return np.concatenate([rr * or_ + ri * oi, rr * oi - ri * or_], axis=1)
    return ent + rel if side == "object" else ent - rel


def query_backward(model: Model, ent: np.ndarray, rel: np.ndarray, gq: np.ndarray, side: str):
    """Chain a gradient on query rows back to the key entity and relation rows."""
    kind = model.kind
    if kind is ModelKind.DISTMULT:
        return gq * rel, gq * ent
    if kind is ModelKind.COMPLEX:
        k = model.dim
        gr_, gi = gq[:, :k], gq[:, k:]
        er_, ei = ent[:, :k], ent[:, k:]
        rr, ri = rel[:, :k], rel[:, k:]
        if side == "object":
            g_ent = np.concatenate([gr_ * rr + gi * ri, gi * rr - gr_ * ri], axis=1)
            g_rel = np.concatenate([gr_ * er_ + gi * ei, gi * er_ - gr_ * ei], axis=1)
        else:
            g_ent = np.concatenate([gr_ * rr - gi * ri, gr_ * ri + gi * rr], axis=1)
            g_rel = np.concatenate([gr_ * er_ + gi * ei, gr_ * ei - gi * er_], axis=1)
        return g_ent, g_rel
    return (gq, gq.copy()) if side == "object" else (gq, -gq)


def batch_logits(model: Model, q: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    """Logits of each query row against every entity; also returns TransE distances."""
    E = model.entities
    if model.kind.multiplicative:
        return q @ E.T, None
    sq = np.sum(q * q, axis=1)[:, None] + np.sum(E * E, axis=1)[None, :] - 2.0 * (q @ E.T)
    dist = np.sqrt(np.maximum(sq, 0.0))
    return model.margin - dist, dist


def batch_logits_backward(model: Model, q: np.ndarray, dist, g_logits: np.ndarray):
    """Gradients of sum(g_logits * logits) w.r.t. the query rows and the entity table."""
    E = model.entities
    if model.kind.multiplicative:
        return g_logits @ E, g_logits.T @ q
    # logit = m - ||q - E_i||;  d/dq = -(q - E_i)/n,  d/dE_i = (q - E_i)/n
    # distances from the expanded square are only accurate to ~1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(dist > 1e-6, g_logits / dist, 0.0)
    row = w.sum(axis=1)
    col = w.sum(axis=0)
    gq = w @ E - row[:, None] * q
    gE = w.T @ q - col[:, None] * E
    return gq, gE


# --- checkpoints -------------------------------------------------------------


def config_hash(config) -> str:
    """Stable short hash of a config object (anything with a canonical ``repr``)."""
    text = config if isinstance(config, str) else repr(config)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _write_table(path: Path, arr: np.ndarray) -> None:
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_table(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic")
    rows, cols = struct.unpack("<QQ", raw[8:24])
    data = np.frombuffer(raw, dtype="<f4", offset=24)
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows}x{cols} floats, found {data.size}")
    return data.reshape(rows, cols).astype(np.float64)


def save_model(model: Model, directory, train_config_hash: str = "") -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "kind": model.kind.value,
        "dim": model.dim,
        "n_entities": model.n_entities,
        "n_relations": model.n_relations,
        "margin": repr(float(model.margin)),
        "seed": model.meta.get("seed", ""),
        "train_config_hash": train_config_hash or model.meta.get("train_config_hash", ""),
    }
    (d / "meta.txt").write_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    _write_table(d / "entities.bin", model.entities)
    _write_table(d / "relations.bin", model.relations)
    return d


def read_meta(directory) -> dict[str, str]:
    meta = {}
    for line in (Path(directory) / "meta.txt").read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    return meta


def load_model(directory) -> Model:
    d = Path(directory)
    meta = read_meta(d)
    kind = ModelKind.parse(meta["kind"])
    dim = int(meta["dim"])
    width = 2 * dim if kind is ModelKind.COMPLEX else dim
    ent = _read_table(d / "entities.bin")
    rel = _read_table(d / "relations.bin")
    if ent.shape != (int(meta["n_entities"]), width):
        raise ValueError(f"entities.bin shape {ent.shape} disagrees with meta.txt")
    if rel.shape != (int(meta["n_relations"]), width):
        raise ValueError(f"relations.bin shape {rel.shape} disagrees with meta.txt")
    extra = {"seed": int(meta["seed"]) if meta.get("seed") else None,
             "train_config_hash": meta.get("train_config_hash", "")}
    return Model(kind, ent, rel, dim, float(meta.get("margin", DEFAULT_MARGIN)), extra)
