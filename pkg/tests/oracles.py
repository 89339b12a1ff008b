"""Slow, loop-based reference implementations used as test oracles.

Each oracle works triple by triple through ``score`` and plain Python,
sharing no vectorised code path with the package under test.
"""

import math

import numpy as np

from kgpoison.graph import Triple
from kgpoison.models import ModelKind, score, score_emb


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def fd_grad(model, triple, h=1e-4):
    """Central differences of the score w.r.t. each slot's embedding vector."""
    s, r, o = triple
    vecs = [model.entities[s].copy(), model.relations[r].copy(), model.entities[o].copy()]
    out = []
    for slot in range(3):
        g = np.zeros(model.width)
        for d in range(model.width):
            up = [v.copy() for v in vecs]
            down = [v.copy() for v in vecs]
            up[slot][d] += h
            down[slot][d] -= h
            g[d] = (score_emb(model, *up) - score_emb(model, *down)) / (2 * h)
        out.append(g)
    return out


def brute_rank(model, triple, known, side):
    """Materialise every corrupted triple, drop known ones, sort, count strictly better."""
    true = score(model, triple)
    scored = []
    for e in range(model.n_entities):
        cand = corrupt(triple, side, e)
        if cand != triple and cand not in known:
            scored.append(score(model, cand))
    scored.sort(reverse=True)
    return 1 + sum(1 for v in scored if v > true)


def corrupt(target, side, e):
    s, r, o = target
    return Triple(s, r, e) if side == "object" else Triple(e, r, o)


def valid_negatives(target, side, known, n_entities, pattern=None):
    out = []
    own = target.o if side == "object" else target.s
    for e in range(n_entities):
        if e == own or corrupt(target, side, e) in known:
            continue
        if pattern == "sym" and e == (target.s if side == "object" else target.o):
            continue
        out.append(e)
    return out


def argmin_lowest(pairs):
    """(entity, value) with the smallest value; ties to the lowest entity."""
    best = None
    for e, v in pairs:
        if best is None or v < best[1] or (v == best[1] and e < best[0]):
            best = (e, v)
    return best


def argmax_lowest(pairs):
    best = argmin_lowest((e, -v) for e, v in pairs)
    return best[0], -best[1]


def truth_single(model, target, side, rel, cands):
    s, _, o = target
    vals = []
    for e in cands:
        head = sig(score(model, corrupt(target, side, e)))
        body_t = Triple(e, rel, s) if side == "object" else Triple(o, rel, e)
        b = sig(score(model, body_t))
        vals.append((e, b * head - b + 1))
    return argmin_lowest(vals)


def truth_com(model, target, side, pair, cands):
    """Scan every real entity as the middle of the composition grounding."""
    s, _, o = target
    r1, r2 = pair
    vals = []
    for e in cands:
        head = sig(score(model, corrupt(target, side, e)))
        best = math.inf
        for z in range(model.n_entities):
            if side == "object":
                b = sig(score(model, (s, r1, z))) * sig(score(model, (z, r2, e)))
            else:
                b = sig(score(model, (e, r1, z))) * sig(score(model, (z, r2, o)))
            best = min(best, b * head - b + 1)
        vals.append((e, best))
    return argmin_lowest(vals)


def rank_decoy(model, target, side, cands):
    """Sort all valid negatives by score, best first, ids ascending within ties."""
    true = score(model, target)
    ordered = sorted(cands, key=lambda e: (-score(model, corrupt(target, side, e)), e))
    for e in ordered:
        v = score(model, corrupt(target, side, e))
        if v <= true:
            return e, v
    return None


def cos_decoy(model, target, side, cands):
    ref = model.entities[target.o if side == "object" else target.s]
    vals = []
    for e in cands:
        x = model.entities[e]
        dot = sum(float(a) * float(b) for a, b in zip(x, ref))
        nx = math.sqrt(sum(float(a) ** 2 for a in x))
        nr = math.sqrt(sum(float(a) ** 2 for a in ref))
        cos = 0.0 if nx * nr == 0 else dot / (nx * nr)
        vals.append((e, 1.0 - cos))
    return argmax_lowest(vals)


def step3_entity(model, target, side, decoy, pair, mode, known):
    s, r, o = target
    r1, r2 = pair
    x, y = (s, decoy) if side == "object" else (decoy, o)
    h = sig(score(model, (x, r, y)))
    vals = []
    for z in range(model.n_entities):
        if z in (s, o, decoy) or Triple(x, r1, z) in known or Triple(z, r2, y) in known:
            continue
        b = sig(score(model, (x, r1, z))) * sig(score(model, (z, r2, y)))
        vals.append((z, b * h - b + 1 if mode == "literal" else b))
    return argmax_lowest(vals)


def inverse_scan(model, r):
    R = model.relations
    vals = []
    for i in range(model.n_relations):
        if i == r:
            continue
        if model.kind is ModelKind.TRANSE:
            v = math.sqrt(sum((float(a) + float(b)) ** 2 for a, b in zip(R[i], R[r])))
        elif model.kind is ModelKind.COMPLEX:
            k = model.dim
            re = sum(float(R[i, d]) * float(R[r, d]) - float(R[i, k + d]) * float(R[r, k + d]) for d in range(k))
            v = abs(re - 1.0)
        else:
            v = abs(sum(float(a) * float(b) for a, b in zip(R[i], R[r])) - 1.0)
        vals.append((i, v))
    return argmin_lowest(vals)[0]


def compose(model, a, b):
    if model.kind is ModelKind.TRANSE:
        return [x + y for x, y in zip(a, b)]
    if model.kind is ModelKind.COMPLEX:
        k = model.dim
        re = [a[d] * b[d] - a[k + d] * b[k + d] for d in range(k)]
        im = [a[d] * b[k + d] + a[k + d] * b[d] for d in range(k)]
        return re + im
    return [x * y for x, y in zip(a, b)]


def composition_scan(model, r):
    R = model.relations.tolist()
    best = None
    for r1 in range(model.n_relations):
        for r2 in range(model.n_relations):
            c = compose(model, R[r1], R[r2])
            d = math.sqrt(sum((x - y) ** 2 for x, y in zip(c, R[r])))
            if best is None or d < best[0]:
                best = (d, (r1, r2))
    return best[1]


def plant_inverse(model, r, ri):
    er = model.relations[r]
    if model.kind is ModelKind.TRANSE:
        model.relations[ri] = -er
    elif model.kind is ModelKind.COMPLEX:
        k = model.dim
        n2 = float(np.sum(er * er))
        model.relations[ri] = np.concatenate([er[:k], -er[k:]]) / n2
    else:
        model.relations[ri] = er / float(er @ er)


def plant_composition(model, r, r1, r2):
    R = model.relations
    model.relations[r] = np.asarray(compose(model, R[r1].tolist(), R[r2].tolist()))


def audit_attack(result, dataset, pattern):
    """Threat-model violations of an AttackResult, as a list of strings."""
    problems = []
    train = set(dataset.train)
    every = train | set(dataset.valid) | set(dataset.test)
    decoy_triples = {d.triple for d in result.decoys}
    per_side = {}
    for d in result.decoys:
        per_side[(d.target, d.side)] = per_side.get((d.target, d.side), 0) + 1
        if d.triple in every:
            problems.append(f"decoy {d.triple} exists in the graph")
        if d.entity == (d.target.o if d.side == "object" else d.target.s):
            problems.append(f"decoy equals the true entity for {d.target}")
    problems += [f"{k} has {v} decoys" for k, v in per_side.items() if v > 1]
    per_target = {}
    limit = 4 if pattern == "com" else 2
    for edit in result.edits:
        per_target[edit.target] = per_target.get(edit.target, 0) + len(edit.triples)
        for t in edit.triples:
            if t in train:
                problems.append(f"edit {t} already in train")
            if t in decoy_triples:
                problems.append(f"edit {t} equals a decoy triple")
            if not (0 <= t.s < dataset.n_entities and 0 <= t.o < dataset.n_entities
                    and 0 <= t.r < dataset.n_relations):
                problems.append(f"edit {t} introduces an unknown id")
            if edit.decoy is not None and not ({t.s, t.o} & set(edit.decoy.triple[::2])):
                problems.append(f"edit {t} does not touch its decoy construction {edit.decoy.triple}")
    problems += [f"{k} received {v} edit triples" for k, v in per_target.items() if v > limit]
    return problems


def score_calls_per_side(model, dataset, targets, config, filter_index, centroids=None):
    """Score evaluations per target side made while generating one attack."""
    from kgpoison.attack import generate_attack
    from kgpoison.models import count_scores

    with count_scores() as counter:
        generate_attack(model, dataset, targets, config, filter_index, centroids)
    return counter.calls / (2 * len(targets))
