import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from ontospace.config import TrainingConfig
from ontospace.data import Dataset, Vocabulary, build_truth_index
from ontospace.errors import DataError
from ontospace.evaluation import (
    ClassificationReport,
    ThresholdTable,
    best_threshold,
    classify,
    decide,
    link_predict,
    transitivity_probe,
    tune_thresholds,
)
from ontospace.extensional import ExtensionalParams
from ontospace.intensional import IntensionalParams
from ontospace.model import ModelState

from conftest import make_split


def line_model(positions, rel_vectors, n_concepts=2, alpha=0.0, d=1):
    """Model whose instances sit at given 1-d positions; scores are exact."""
    n = len(positions)
    ext = ExtensionalParams(
        instances=np.array([[float(p)] for p in positions]),
        relations=np.array([[float(v)] for v in rel_vectors]),
        centers=np.zeros((n_concepts, d)),
        axes=np.ones((n_concepts, d)),
        radii=np.ones(n_concepts),
    )
    intp = IntensionalParams(concept_vecs=np.ones((n_concepts, d)),
                             bridge=None, init_mode="UNP")
    cfg = TrainingConfig(d=d, alpha=alpha).validate()
    return ModelState(extensional=ext, intensional=intp, config=cfg)


class TestBestThreshold:
    def test_separable_midpoint(self):
        scores = np.array([0.1, 0.2, 0.5, 0.6])
        labels = np.array([True, True, False, False])
        cut, acc = best_threshold(scores, labels)
        assert cut == pytest.approx(0.35)
        assert acc == 1.0

    def test_all_scores_equal_majority_class(self):
        scores = np.zeros(10)
        labels = np.array([True] * 7 + [False] * 3)
        cut, acc = best_threshold(scores, labels)
        assert acc == pytest.approx(0.7)

    def test_single_class_gives_inf(self):
        cut, _ = best_threshold(np.array([1.0, 2.0]), np.array([True, True]))
        assert cut == math.inf

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            scores = np.round(rng.normal(size=n), 2)  # rounding forces ties
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                continue
            cut, acc = best_threshold(scores, labels)
            oracle_acc, _ = oracles.best_cut_accuracy(list(scores), list(labels))
            assert acc == pytest.approx(oracle_acc)
            assert oracles.accuracy_at(list(scores), list(labels), cut) == pytest.approx(acc)

    def test_tie_breaks_toward_smallest(self):
        # both extreme cuts achieve 0.5; smallest candidate must win
        scores = np.array([0.3, 0.5])
        labels = np.array([False, True])
        cut, acc = best_threshold(scores, labels)
        assert acc == pytest.approx(0.5)
        assert cut < 0.3


class TestClassify:
    def _dataset(self, rel_rows, rel_labels):
        vocab = Vocabulary(instances=[f"i{k}" for k in range(4)],
                           concepts=["c0", "c1"], relations=["r0"])
        return Dataset(
            vocabulary=vocab,
            relational={"train": make_split([]),
                        "valid": make_split(rel_rows, rel_labels),
                        "test": make_split(rel_rows, rel_labels)},
            instance_of={s: make_split([], width=2) for s in ("train", "valid", "test")},
            sub_class_of={s: make_split([], width=2) for s in ("train", "valid", "test")},
        )

    def test_perfectly_separated(self):
        model = line_model([0.0, 0.1, 5.0, 6.0], [0.0])
        # positives near-zero residual, negatives huge
        rows = [(0, 0, 1), (2, 0, 3), (0, 0, 2), (1, 0, 3)]
        labels = [True, True, False, False]
        ds = self._dataset(rows, labels)
        table = tune_thresholds(model, ds)
        report = classify(model, table, ds)["relational"]
        assert report.accuracy == 1.0
        assert report.f1 == 1.0

    def test_inverted_scores_give_zero_accuracy(self):
        model = line_model([0.0, 0.1, 5.0, 6.0], [0.0])
        rows = [(0, 0, 1), (2, 0, 3), (0, 0, 2), (1, 0, 3)]
        ds = self._dataset(rows, [False, False, True, True])
        # small residuals carry negative labels, large ones positive: the
        # strict below-threshold rule then gets everything wrong
        table = ThresholdTable(relational={0: 5.0})
        report = classify(model, table, ds)["relational"]
        assert report.accuracy == 0.0

    def test_matches_confusion_oracle(self):
        rng = np.random.default_rng(32)
        model = line_model(list(rng.normal(size=8)), [0.3])
        rows = [(int(a), 0, int(b)) for a, b in rng.integers(0, 8, size=(30, 2))]
        rows = list(dict.fromkeys(rows))
        labels = [bool(x) for x in rng.random(len(rows)) < 0.5]
        ds = self._dataset(rows, labels)
        threshold = 1.7
        table = ThresholdTable(relational={0: threshold})
        report = classify(model, table, ds)["relational"]
        scores = [model.score_relational(*row) for row in rows]
        tp, fp, tn, fn = oracles.confusion(scores, labels, threshold)
        assert (report.tp, report.fp, report.tn, report.fn) == (tp, fp, tn, fn)
        assert report.accuracy == pytest.approx((tp + tn) / len(rows))

    def test_missing_threshold_names_relation(self):
        model = line_model([0.0, 1.0], [0.0])
        ds = self._dataset([(0, 0, 1)], [True])
        with pytest.raises(DataError, match="relation 0"):
            classify(model, ThresholdTable(), ds)

    def test_f1_consistency(self):
        report = ClassificationReport.from_counts(tp=30, fp=10, tn=40, fn=20)
        p, r = report.precision, report.recall
        assert report.f1 == pytest.approx(2 * p * r / (p + r))
        assert report.tp + report.fp + report.tn + report.fn == 100

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=20),
           st.floats(-5, 5))
    def test_decision_invariant_under_increasing_transform(self, raw_scores, cut):
        # round to a coarse grid so the transform stays strictly increasing
        # in float arithmetic, not merely in exact arithmetic
        scores = np.round(np.array(raw_scores), 2)
        cut = round(cut, 2)
        base = decide(scores, np.full(len(scores), cut))

        def f(x):
            return 2.0 * x + 1.0

        transformed = decide(f(scores), np.full(len(scores), f(cut)))
        assert np.array_equal(base, transformed)


class TestLinkPredict:
    def _toy(self, seed=33, n_instances=20, n_relations=5, n_test=15):
        rng = np.random.default_rng(seed)
        model = line_model(list(rng.integers(-5, 6, size=n_instances).astype(float)),
                           list(rng.integers(-2, 3, size=n_relations).astype(float)))
        rows = set()
        while len(rows) < 40:
            rows.add((int(rng.integers(n_instances)), int(rng.integers(n_relations)),
                      int(rng.integers(n_instances))))
        rows = sorted(rows)
        train, test = rows[:-n_test], rows[-n_test:]
        vocab = Vocabulary(instances=[f"i{k}" for k in range(n_instances)],
                           concepts=["c0"],
                           relations=[f"r{k}" for k in range(n_relations)])
        ds = Dataset(
            vocabulary=vocab,
            relational={"train": make_split(train), "valid": make_split([]),
                        "test": make_split(test)},
            instance_of={s: make_split([], width=2) for s in ("train", "valid", "test")},
            sub_class_of={s: make_split([], width=2) for s in ("train", "valid", "test")},
        )
        return model, ds

    def test_equals_brute_force_rank_for_rank(self):
        model, ds = self._toy()
        truth = build_truth_index(ds)
        report = link_predict(model, ds.relational["test"], truth,
                              setting="both", collect_ranks=True)
        n_inst = ds.vocabulary.n_instances
        raw_ranks, filt_ranks = [], []
        for h, r, t in ds.relational["test"].positives():
            h, r, t = int(h), int(r), int(t)
            head_scores = [oracles.relational(model.extensional.instances[x],
                                              model.extensional.relations[r],
                                              model.extensional.instances[t])
                           for x in range(n_inst)]
            known = {x for x in range(n_inst)
                     if (x, r, t) in truth.relational and x != h}
            raw_ranks.append(oracles.pessimistic_rank(head_scores, h))
            filt_ranks.append(oracles.pessimistic_rank(head_scores, h, exclude=known))
            tail_scores = [oracles.relational(model.extensional.instances[h],
                                              model.extensional.relations[r],
                                              model.extensional.instances[x])
                           for x in range(n_inst)]
            known = {x for x in range(n_inst)
                     if (h, r, x) in truth.relational and x != t}
            raw_ranks.append(oracles.pessimistic_rank(tail_scores, t))
            filt_ranks.append(oracles.pessimistic_rank(tail_scores, t, exclude=known))

        got_raw = [qr.raw_rank for qr in report.ranks]
        got_filt = [qr.filter_rank for qr in report.ranks]
        assert got_raw == raw_ranks
        assert got_filt == filt_ranks
        assert report.mrr_raw == pytest.approx(np.mean([1 / r for r in raw_ranks]))
        assert report.mrr_filter == pytest.approx(np.mean([1 / r for r in filt_ranks]))
        assert report.hits3 == pytest.approx(np.mean([r <= 3 for r in filt_ranks]))

    def test_filter_never_worse_than_raw(self):
        model, ds = self._toy(seed=34)
        report = link_predict(model, ds.relational["test"], build_truth_index(ds),
                              collect_ranks=True)
        for qr in report.ranks:
            assert qr.filter_rank <= qr.raw_rank
        assert report.mrr_filter >= report.mrr_raw

    def test_hits_monotone(self):
        model, ds = self._toy(seed=35)
        report = link_predict(model, ds.relational["test"], build_truth_index(ds))
        assert report.hits1 <= report.hits3 <= report.hits10

    def test_perfect_model_scores_one(self):
        # single test triple whose entities uniquely minimize the residual
        model = line_model([0.0, 10.0, 20.0, 30.0], [10.0])
        vocab = Vocabulary(instances=["a", "b", "c", "d"], concepts=["c0"],
                           relations=["r0"])
        ds = Dataset(
            vocabulary=vocab,
            relational={"train": make_split([]), "valid": make_split([]),
                        "test": make_split([(0, 0, 1)])},
            instance_of={s: make_split([], width=2) for s in ("train", "valid", "test")},
            sub_class_of={s: make_split([], width=2) for s in ("train", "valid", "test")},
        )
        report = link_predict(model, ds.relational["test"], build_truth_index(ds))
        assert report.mrr_raw == 1.0 and report.mrr_filter == 1.0
        assert report.hits1 == report.hits10 == 1.0

    def test_exact_ties_ranked_pessimistically(self):
        # instances at 0, 2, -2: with r=0 and t at 0, heads 1 and 2 tie exactly
        model = line_model([0.0, 2.0, -2.0], [0.0])
        vocab = Vocabulary(instances=["a", "b", "c"], concepts=["c0"], relations=["r0"])
        ds = Dataset(
            vocabulary=vocab,
            relational={"train": make_split([]), "valid": make_split([]),
                        "test": make_split([(1, 0, 0)])},
            instance_of={s: make_split([], width=2) for s in ("train", "valid", "test")},
            sub_class_of={s: make_split([], width=2) for s in ("train", "valid", "test")},
        )
        report = link_predict(model, ds.relational["test"],
                              build_truth_index(ds), collect_ranks=True)
        head_rank = next(qr for qr in report.ranks if qr.direction == "head")
        # candidate a scores 0 (better); candidate c ties at 4 -> rank 3
        assert head_rank.raw_rank == 3

    def test_raw_setting_skips_filter_fields(self):
        model, ds = self._toy(seed=36)
        report = link_predict(model, ds.relational["test"], build_truth_index(ds),
                              setting="raw")
        assert report.mrr_raw is not None
        assert report.mrr_filter is None and report.hits10 is None


class TestTransitivityProbe:
    def _chain_dataset(self, n_concepts=4, instances_per=2):
        # c0 -> c1 -> c2 -> ... chain; instances typed at c0 only
        n_inst = instances_per
        vocab = Vocabulary(instances=[f"i{k}" for k in range(n_inst)],
                           concepts=[f"c{k}" for k in range(n_concepts)],
                           relations=["r0"])
        sub_rows = [(k, k + 1) for k in range(n_concepts - 1)]
        ins_rows = [(i, 0) for i in range(n_inst)]
        return Dataset(
            vocabulary=vocab,
            relational={s: make_split([]) for s in ("train", "valid", "test")},
            instance_of={"train": make_split(ins_rows, width=2),
                         "valid": make_split([], width=2),
                         "test": make_split([], width=2)},
            sub_class_of={"train": make_split(sub_rows, width=2),
                          "valid": make_split([], width=2),
                          "test": make_split([], width=2)},
        )

    def _nested_model(self, n_concepts, n_instances):
        # concentric regions with growing radii; instances at the origin
        d = 2
        ext = ExtensionalParams(
            instances=np.zeros((n_instances, d)),
            relations=np.zeros((1, d)),
            centers=np.zeros((n_concepts, d)),
            axes=np.ones((n_concepts, d)),
            radii=np.arange(1.0, n_concepts + 1.0),
        )
        intp = IntensionalParams(concept_vecs=np.ones((n_concepts, d)),
                                 bridge=None, init_mode="UNP")
        cfg = TrainingConfig(d=d, alpha=0.0).validate()
        return ModelState(extensional=ext, intensional=intp, config=cfg)

    def test_closure_counts_match_reachability_oracle(self):
        ds = self._chain_dataset(n_concepts=4, instances_per=2)
        model = self._nested_model(4, 2)
        table = ThresholdTable(instance_of=0.5, sub_class_of=0.5)
        report = transitivity_probe(model, table, ds)

        edges = [(int(a), int(b)) for a, b in ds.sub_class_of["train"].positives()]
        closure = oracles.transitive_ancestors(edges, 4)
        derived_sub = closure - set(edges)
        assert report.sub_class_of_total == len(derived_sub)
        # every instance is typed at c0 and picks up all of c0's ancestors
        ancestors_of_c0 = {b for a, b in closure if a == 0}
        assert report.instance_of_total == 2 * len(ancestors_of_c0)

    def test_perfect_nesting_classifies_everything_positive(self):
        ds = self._chain_dataset()
        model = self._nested_model(4, 2)
        table = ThresholdTable(instance_of=0.5, sub_class_of=0.5)
        report = transitivity_probe(model, table, ds)
        assert report.instance_of_fraction == 1.0
        assert report.sub_class_of_fraction == 1.0
        assert report.combined_fraction == 1.0

    def test_no_subclassof_edges_is_undefined(self):
        ds = self._chain_dataset()
        ds.sub_class_of["train"] = make_split([], width=2)
        model = self._nested_model(4, 2)
        table = ThresholdTable(instance_of=0.5, sub_class_of=0.5)
        report = transitivity_probe(model, table, ds)
        assert report.instance_of_fraction is None
        assert report.sub_class_of_fraction is None
        assert report.combined_fraction is None
