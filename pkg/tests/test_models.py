import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fd_grad

from kgpoison.models import (
    MAGIC,
    Model,
    ModelKind,
    count_scores,
    grad_score,
    init_model,
    load_model,
    read_meta,
    save_model,
    score,
    score_all_objects,
    score_all_subjects,
)

KINDS = list(ModelKind)


def _model(kind, ent, rel, dim, margin=9.0):
    return Model(kind, np.asarray(ent, float), np.asarray(rel, float), dim, margin)


class TestScoreExamples:
    def test_distmult(self):
        m = _model("distmult", [[1, 2], [1, 1]], [[1, 1]], 2)
        assert score(m, (0, 0, 1)) == 3.0

    def test_complex_identity(self):
        m = _model("complex", [[1, 0]], [[1, 0]], 1)
        assert score(m, (0, 0, 0)) == 1.0

    def test_complex_uses_conjugate_of_object(self):
        # s = i, r = 1, o = i: Re(i * 1 * conj(i)) = 1
        m = _model("complex", [[0, 1]], [[1, 0]], 1)
        assert score(m, (0, 0, 0)) == 1.0

    def test_transe_zero_distance(self):
        m = _model("transe", [[0, 0], [1, 0]], [[1, 0]], 2)
        assert score(m, (0, 0, 1)) == 9.0

    def test_score_all_objects_identity_table(self):
        m = _model("distmult", np.eye(3), [[2, 3, 4]], 3)
        s = 1
        np.testing.assert_array_equal(score_all_objects(m, s, 0), np.eye(3)[s] * [2, 3, 4])

    def test_transe_maximiser(self):
        rng = np.random.default_rng(0)
        ent = rng.normal(size=(5, 4))
        rel = rng.normal(size=(1, 4))
        ent[2] = ent[0] + rel[0]
        m = _model("transe", ent, rel, 4)
        v = score_all_objects(m, 0, 0)
        assert int(np.argmax(v)) == 2 and v[2] == 9.0


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("seed", range(5))
def test_all_entity_scores_match_loop(kind, seed):
    m = init_model(kind, 17, 3, 6, seed)
    for r in range(3):
        for e in (0, 8, 16):
            objs = score_all_objects(m, e, r)
            subs = score_all_subjects(m, r, e)
            assert [score(m, (e, r, i)) for i in range(17)] == objs.tolist()
            assert [score(m, (i, r, e)) for i in range(17)] == subs.tolist()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_distmult_symmetric(seed):
    m = init_model("distmult", 6, 2, 5, seed)
    rng = np.random.default_rng(seed)
    s, o = rng.integers(6, size=2)
    assert score(m, (s, 1, o)) == score(m, (o, 1, s))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_complex_real_reduces_to_distmult(seed):
    dm = init_model("distmult", 6, 2, 5, seed)
    cx = Model(
        "complex",
        np.concatenate([dm.entities, np.zeros_like(dm.entities)], axis=1),
        np.concatenate([dm.relations, np.zeros_like(dm.relations)], axis=1),
        5,
    )
    for t in [(0, 0, 1), (3, 1, 5), (2, 1, 2)]:
        assert score(cx, t) == score(dm, t)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_transe_bounded_by_margin(seed):
    m = init_model("transe", 6, 2, 5, seed)
    v = score_all_objects(m, 0, 1)
    assert np.all(v <= m.margin)
    m.entities[3] = m.entities[0] + m.relations[1]
    assert score(m, (0, 1, 3)) == m.margin


class TestGradients:
    def test_distmult_example(self):
        m = _model("distmult", [[5, 7], [2, 0]], [[1, 0]], 2)
        gs, _, _ = grad_score(m, (0, 0, 1))
        np.testing.assert_array_equal(gs, [2, 0])

    def test_transe_zero_distance_gives_zero(self):
        m = _model("transe", [[0, 0], [1, 0]], [[1, 0]], 2)
        for g in grad_score(m, (0, 0, 1)):
            np.testing.assert_array_equal(g, 0.0)

    @pytest.mark.parametrize("kind", KINDS)
    def test_matches_finite_differences(self, kind):
        worst = 0.0
        for seed in range(25):
            m = init_model(kind, 5, 3, 4, seed)
            t = tuple(np.random.default_rng(seed).integers([5, 3, 5]))
            for a, n in zip(grad_score(m, t), fd_grad(m, t)):
                worst = max(worst, np.max(np.abs(a - n)) / max(1.0, np.max(np.abs(n))))
        assert worst < 1e-4


class TestInit:
    @pytest.mark.parametrize("kind", KINDS)
    def test_deterministic_and_bounded(self, kind):
        a = init_model(kind, 10, 3, 16, seed=3)
        b = init_model(kind, 10, 3, 16, seed=3)
        assert a.entities.tobytes() == b.entities.tobytes()
        assert a.relations.tobytes() == b.relations.tobytes()
        bound = 1 / np.sqrt(16)
        for t in (a.entities, a.relations):
            assert np.all(np.isfinite(t)) and np.all(np.abs(t) <= bound)

    def test_complex_storage_width(self):
        m = init_model("complex", 4, 2, 3, 0)
        assert m.entities.shape == (4, 6)

    def test_bad_dim(self):
        with pytest.raises(ValueError):
            init_model("distmult", 3, 1, 0, 0)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            Model("complex", np.zeros((2, 3)), np.zeros((1, 3)), 3)

    def test_family(self):
        assert ModelKind.DISTMULT.multiplicative and ModelKind.COMPLEX.multiplicative
        assert not ModelKind.TRANSE.multiplicative


class TestCheckpoint:
    @pytest.mark.parametrize("kind", KINDS)
    def test_round_trip(self, tmp_path, kind):
        m = init_model(kind, 7, 2, 3, seed=1)
        save_model(m, tmp_path, "abc")
        back = load_model(tmp_path)
        np.testing.assert_array_equal(back.entities, m.entities.astype(np.float32))
        assert back.kind is m.kind and back.dim == 3
        meta = read_meta(tmp_path)
        assert meta["train_config_hash"] == "abc" and meta["n_entities"] == "7"

    def test_header_layout(self, tmp_path):
        m = init_model("distmult", 4, 2, 3, 0)
        save_model(m, tmp_path)
        raw = (tmp_path / "entities.bin").read_bytes()
        assert raw[:8] == MAGIC
        assert int.from_bytes(raw[8:16], "little") == 4
        assert int.from_bytes(raw[16:24], "little") == 3
        assert len(raw) == 24 + 4 * 4 * 3

    def test_bad_magic(self, tmp_path):
        save_model(init_model("distmult", 4, 2, 3, 0), tmp_path)
        p = tmp_path / "entities.bin"
        p.write_bytes(b"XXXXXXXX" + p.read_bytes()[8:])
        with pytest.raises(ValueError):
            load_model(tmp_path)

    def test_shape_mismatch(self, tmp_path):
        save_model(init_model("distmult", 4, 2, 3, 0), tmp_path)
        meta = (tmp_path / "meta.txt").read_text().replace("n_entities=4", "n_entities=5")
        (tmp_path / "meta.txt").write_text(meta)
        with pytest.raises(ValueError):
            load_model(tmp_path)


def test_score_counter_counts_vector_entries():
    m = init_model("distmult", 12, 2, 3, 0)
    with count_scores() as c:
        score_all_objects(m, 0, 0)
        score(m, (0, 0, 1))
    assert c.calls == 13
