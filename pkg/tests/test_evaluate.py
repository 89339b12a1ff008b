import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_rank

from kgpoison.evaluate import (
    MetricsReport,
    evaluate,
    filtered_rank,
    rank_triple,
    select_targets,
    write_metrics,
)
from kgpoison.graph import build_filter_index, dataset_from_rows
from kgpoison.models import Model, init_model
from kgpoison.synthetic import random_kg


class TestRankExamples:
    def test_one_strictly_greater(self):
        assert filtered_rank([0.9, 0.8, 0.95], 0, []) == 2

    def test_filtered_out(self):
        assert filtered_rank([0.9, 0.8, 0.95], 0, [2]) == 1

    def test_tie_is_optimistic(self):
        assert filtered_rank([0.9, 0.9, 0.1], 0, []) == 1

    def test_true_entity_never_filtered(self):
        assert filtered_rank([0.1, 0.9], 0, [0, 1]) == 1

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=20), st.data())
    def test_raising_true_score_never_hurts(self, scores, data):
        i = data.draw(st.integers(0, len(scores) - 1))
        bump = data.draw(st.floats(0, 5))
        higher = list(scores)
        higher[i] += bump
        assert filtered_rank(higher, i, []) <= filtered_rank(scores, i, [])


@pytest.mark.parametrize("kind", ["distmult", "complex", "transe"])
def test_rank_matches_brute_force(kind):
    for seed in range(7):
        ds = random_kg(30 + seed, 1 + seed % 5, 150, seed=seed)
        m = init_model(kind, ds.n_entities, ds.n_relations, 4, seed)
        fi = build_filter_index(ds)
        known = set(ds.train) | set(ds.valid) | set(ds.test)
        for t in ds.test:
            for side in ("subject", "object"):
                assert rank_triple(m, t, fi, side) == brute_rank(m, t, known, side)


def test_rank_with_ties_matches_brute_force():
    # quantised embeddings give many exact score ties
    rng = np.random.default_rng(0)
    ds = random_kg(20, 2, 100, seed=9)
    m = Model("distmult", rng.integers(-1, 2, (ds.n_entities, 3)).astype(float),
              rng.integers(-1, 2, (ds.n_relations, 3)).astype(float), 3)
    fi = build_filter_index(ds)
    known = set(ds.train) | set(ds.valid) | set(ds.test)
    for t in ds.test:
        for side in ("subject", "object"):
            assert rank_triple(m, t, fi, side) == brute_rank(m, t, known, side)


class TestMetrics:
    def test_arithmetic(self):
        rep = MetricsReport.from_ranks([1, 2, 4])
        assert rep.mr == pytest.approx(7 / 3, abs=1e-12)
        assert rep.mrr == pytest.approx((1 + 0.5 + 0.25) / 3, abs=1e-12)
        assert rep.hits_at[1] == pytest.approx(1 / 3, abs=1e-12)
        assert rep.hits_at[3] == pytest.approx(2 / 3, abs=1e-12)
        assert rep.hits_at[10] == 1.0

    def test_all_first(self):
        rep = MetricsReport.from_ranks([1, 1, 1])
        assert rep.mrr == 1.0 and all(v == 1.0 for v in rep.hits_at.values())

    def test_empty_is_error(self):
        with pytest.raises(ValueError):
            MetricsReport.from_ranks([])
        ds = random_kg(10, 1, 30, seed=0)
        with pytest.raises(ValueError):
            evaluate(init_model("distmult", 10, 1, 2, 0), [], build_filter_index(ds))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(1, 50), min_size=1, max_size=30))
    def test_hits_monotone(self, ranks):
        rep = MetricsReport.from_ranks(ranks)
        assert rep.hits_at[1] <= rep.hits_at[3] <= rep.hits_at[10]
        assert rep.mr >= 1 and 0 < rep.mrr <= 1

    def test_both_sides_double_count(self):
        ds = random_kg(15, 2, 60, seed=1)
        m = init_model("distmult", ds.n_entities, ds.n_relations, 4, 0)
        fi = build_filter_index(ds)
        both = evaluate(m, ds.test, fi)
        subj = evaluate(m, ds.test, fi, side="subject")
        obj = evaluate(m, ds.test, fi, side="object")
        assert both.n == 2 * len(ds.test)
        assert both.mrr == pytest.approx((subj.mrr + obj.mrr) / 2, abs=1e-12)

    def test_write(self, tmp_path):
        write_metrics([MetricsReport.from_ranks([1, 2], "object")], tmp_path / "m.tsv")
        lines = (tmp_path / "m.tsv").read_text().splitlines()
        assert lines[0] == "metric\tside\tvalue" and lines[2].startswith("mrr\tobject\t0.75")


class TestTargets:
    def _ranked_model(self):
        # entity 0 -r-> {1..}: scores chosen so (0,r,1) ranks 1 on both sides
        ds = dataset_from_rows([("a", "r", "b"), ("c", "r", "d")], [], [("a", "r", "d"), ("c", "r", "b")])
        return ds

    def test_both_vs_either(self):
        ds = random_kg(25, 2, 120, seed=3)
        m = init_model("distmult", ds.n_entities, ds.n_relations, 4, 1)
        fi = build_filter_index(ds)
        both = select_targets(m, ds, fi, cutoff=10)
        either = select_targets(m, ds, fi, cutoff=10, require_both=False)
        assert {t.triple for t in both} <= {t.triple for t in either}
        for t in both:
            assert t.subject_rank <= 10 and t.object_rank <= 10
            assert t.subject_rank == rank_triple(m, t.triple, fi, "subject")
        for t in either:
            assert min(t.subject_rank, t.object_rank) <= 10
        rejected = [t for t in either if max(t.subject_rank, t.object_rank) > 10]
        assert len(both) + len(rejected) == len(either)

    def test_cutoff_boundary(self):
        ds = self._ranked_model()
        m = init_model("distmult", ds.n_entities, ds.n_relations, 2, 0)
        fi = build_filter_index(ds)
        assert len(select_targets(m, ds, fi, cutoff=ds.n_entities)) == len(ds.test)
