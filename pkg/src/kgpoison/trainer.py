"""1-K training with binary cross-entropy on logits.

Every train triple contributes to two groupings: an (s, r) key whose multi-hot
label vector marks all true objects, and an (o, r) key whose label vector marks
all true subjects.  Each step takes one batch of keys from each grouping in
turn and scores the keys against every entity.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import Dataset
from .models import (
    Model,
    ModelKind,
    batch_logits,
    batch_logits_backward,
    config_hash,
    init_model,
    query_backward,
    query_vectors,
    save_model,
)

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 32
    epochs: int = 200
    batch_size: int = 128
    lr: float = 1e-3
    label_smoothing: float = 0.0
    l2: float = 0.0
    input_dropout: float = 0.0
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    margin: float = 9.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.dim < 1:
            raise ValueError("epochs, batch_size and dim must be >= 1")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must lie in [0, 1)")
        if not 0.0 <= self.input_dropout < 1.0:
            raise ValueError("input_dropout must lie in [0, 1)")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def canonical(self) -> str:
        return ";".join(f"{f.name}={getattr(self, f.name)!r}" for f in dataclasses.fields(self))

    @property
    def hash(self) -> str:
        return config_hash(self.canonical())


# desk-scale learning rates found to fit the synthetic benchmark KG in 200 epochs
DESK_LR = {ModelKind.DISTMULT: 1e-2, ModelKind.COMPLEX: 1e-2, ModelKind.TRANSE: 1e-1}


def desk_config(kind, **changes) -> TrainConfig:
    """Default small-scale config (dim 32, 200 epochs, batch 128) for ``kind``."""
    base = TrainConfig(dim=32, epochs=200, batch_size=128, lr=DESK_LR[ModelKind.parse(kind)])
    return base.replace(**changes) if changes else base


def benchmark_config(kind, **changes) -> TrainConfig:
    """Benchmark-scale config: embedding size 200 for every model."""
    return desk_config(kind, dim=200, **changes)


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    seconds: float = 0.0
    checkpoint: Path | None = None
    config_hash: str = ""

    def write_tsv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch\tloss\tseconds\n")
            for i, (loss, sec) in enumerate(zip(self.losses, self.epoch_seconds), 1):
                fh.write(f"{i}\t{loss!r}\t{sec:.4f}\n")


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)


class SGD:
    def __init__(self, lr=1e-2):
        self.lr = lr

    def step(self, params, grads) -> None:
        for k, p in params.items():
            p -= self.lr * grads[k]


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.lr, config.beta1, config.beta2, config.eps)
    return SGD(config.lr)


@dataclass
class Batch:
    """A batch of 1-K keys: entity ids, relation ids and their label matrix."""

    side: str  # which slot the labels range over: "object" for (s, r) keys
    ent: np.ndarray
    rel: np.ndarray
    labels: np.ndarray


def group_keys(triples: np.ndarray, side: str) -> tuple[np.ndarray, list[np.ndarray]]:
    """Unique (entity, relation) keys and the true completions of each."""
    key_col, ans_col = (0, 2) if side == "object" else (2, 0)
    keys = triples[:, [key_col, 1]]
    order = np.lexsort((triples[:, ans_col], keys[:, 1], keys[:, 0]))
    keys, answers = keys[order], triples[order, ans_col]
    uniq, start = np.unique(keys, axis=0, return_index=True)
    bounds = [*start[1:], len(keys)]
    return uniq, [answers[a:b] for a, b in zip(start, bounds)]


def smooth_labels(labels: np.ndarray, smoothing: float) -> np.ndarray:
    n = labels.shape[-1]
    return labels * (1.0 - smoothing) + smoothing / n


def make_batch(keys, answers, idx, side, n_entities, smoothing=0.0) -> Batch:
    labels = np.zeros((len(idx), n_entities))
    for row, i in enumerate(idx):
        labels[row, answers[i]] = 1.0
    return Batch(side, keys[idx, 0], keys[idx, 1], smooth_labels(labels, smoothing))


def bce_with_logits(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Elementwise binary cross-entropy of sigmoid(logits) against labels."""
    return np.maximum(logits, 0.0) - logits * labels + np.log1p(np.exp(-np.abs(logits)))


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-np.logaddexp(0.0, -x))


def loss_and_grads(model: Model, batch: Batch, l2: float = 0.0, dropout_mask=None):
    """Mean BCE over the batch's (key, entity) cells and its parameter gradients.

    Returns ``(loss, {"entities": dE, "relations": dR})`` with dense gradients.
    ``dropout_mask`` (same shape as the key rows, already rescaled) multiplies
    both key embeddings before scoring.
    """
    ent = model.entities[batch.ent]
    rel = model.relations[batch.rel]
    if dropout_mask is not None:
        ent_in, rel_in = ent * dropout_mask[0], rel * dropout_mask[1]
    else:
        ent_in, rel_in = ent, rel
    q = query_vectors(model, ent_in, rel_in, batch.side)
    logits, dist = batch_logits(model, q)
    n_cells = logits.size
    loss = float(np.sum(bce_with_logits(logits, batch.labels)) / n_cells)
    g_logits = (sigmoid(logits) - batch.labels) / n_cells

    gq, gE = batch_logits_backward(model, q, dist, g_logits)
    g_ent, g_rel = query_backward(model, ent_in, rel_in, gq, batch.side)
    if dropout_mask is not None:
        g_ent = g_ent * dropout_mask[0]
        g_rel = g_rel * dropout_mask[1]
    np.add.at(gE, batch.ent, g_ent)
    gR = np.zeros_like(model.relations)
    np.add.at(gR, batch.rel, g_rel)

    if l2 > 0.0:
        # mean squared row norm over every entity and relation row
        n_rows = model.n_entities + model.n_relations
        sq = np.sum(model.entities**2) + np.sum(model.relations**2)
        loss += l2 * float(sq) / n_rows
        gE += (2.0 * l2 / n_rows) * model.entities
        gR += (2.0 * l2 / n_rows) * model.relations
    return loss, {"entities": gE, "relations": gR}


def _batches(n: int, size: int, rng: np.random.Generator) -> list[np.ndarray]:
    perm = rng.permutation(n)
    return [perm[i:i + size] for i in range(0, n, size)]


def train(dataset: Dataset, kind, config: TrainConfig, checkpoint_dir=None) -> tuple[Model, TrainReport]:
    """Train a fresh model; identical dataset, kind and config give identical tables."""
    kind = ModelKind.parse(kind)
    if not dataset.train:
        raise TrainingError("dataset has no train triples")
    n = dataset.n_entities
    triples = dataset.train_array()
    model = init_model(kind, n, dataset.n_relations, config.dim, config.seed, config.margin)
    model.meta["train_config_hash"] = config.hash
    l2 = config.l2 if kind is ModelKind.TRANSE else 0.0
    rng = np.random.default_rng([config.seed, 1])
    opt = make_optimizer(config)
    params = {"entities": model.entities, "relations": model.relations}

    groups = {side: group_keys(triples, side) for side in ("object", "subject")}
    report = TrainReport(config_hash=config.hash)
    t_start = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        plans = {side: _batches(len(groups[side][0]), config.batch_size, rng) for side in groups}
        steps = []
        for i in range(max(len(p) for p in plans.values())):
            for side in ("object", "subject"):
                if i < len(plans[side]):
                    steps.append((side, plans[side][i]))
        total = 0.0
        for bi, (side, idx) in enumerate(steps):
            keys, answers = groups[side]
            batch = make_batch(keys, answers, idx, side, n, config.label_smoothing)
            mask = None
            if config.input_dropout > 0.0:
                keep = 1.0 - config.input_dropout
                shape = (len(idx), model.width)
                mask = ((rng.random(shape) < keep) / keep, (rng.random(shape) < keep) / keep)
            loss, grads = loss_and_grads(model, batch, l2, mask)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            opt.step(params, grads)
            total += loss
        report.losses.append(total / len(steps))
        report.epoch_seconds.append(time.perf_counter() - t0)
        log.debug("epoch %d loss %.6f", epoch, report.losses[-1])
    report.seconds = time.perf_counter() - t_start
    if not np.all(np.isfinite(model.entities)) or not np.all(np.isfinite(model.relations)):
        raise TrainingError("embeddings became non-finite")
    if checkpoint_dir is not None:
        report.checkpoint = save_model(model, checkpoint_dir, config.hash)
    return model, report


def check_config_hash(meta: dict, config: TrainConfig, override: bool = False) -> None:
    """Refuse to retrain with a config that differs from the clean run's."""
    expected = meta.get("train_config_hash", "")
    if expected and expected != config.hash and not override:
        raise TrainingError(
            f"train config hash {config.hash} differs from clean checkpoint's {expected}; "
            "poisoned retraining must reuse the clean hyperparameters"
        )
