"""Triple classification, link prediction, and isA-transitivity probes.

Classification uses relation-specific score thresholds tuned on the
validation split: a triple is predicted positive exactly when its score
is strictly below the threshold.  Link prediction ranks the true entity
against every instance-vocabulary replacement with pessimistic tie
handling; the filtered setting discounts competitors that are themselves
known-true triples.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import (
    INSTANCE_OF,
    RELATIONAL,
    SUB_CLASS_OF,
    Dataset,
    SplitTriples,
    TruthIndex,
)
from .errors import DataError
from .model import ModelState

logger = logging.getLogger(__name__)


@dataclass
class ThresholdTable:
    """Decision thresholds: one per instance relation, one per structural kind."""

    relational: dict[int, float] = field(default_factory=dict)
    instance_of: Optional[float] = None
    sub_class_of: Optional[float] = None


@dataclass
class ClassificationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "ClassificationReport":
        total = tp + fp + tn + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(accuracy=(tp + tn) / total if total else 0.0,
                   precision=precision, recall=recall, f1=f1,
                   tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass
class QueryRank:
    query_id: int
    direction: str  # "head" | "tail"
    raw_rank: int
    filter_rank: int


@dataclass
class RankingReport:
    mrr_raw: Optional[float]
    mrr_filter: Optional[float]
    hits1: Optional[float]
    hits3: Optional[float]
    hits10: Optional[float]
    n_queries: int
    ranks: Optional[list[QueryRank]] = None


def decide(scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """The classification rule: strictly-below-threshold means positive."""
    return scores < thresholds


def best_threshold(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Accuracy-maximizing cut for one relation's validation scores.

    Candidates sit below the minimum, between adjacent distinct scores,
    and above the maximum; ties break toward the smallest threshold.
    Single-class data yields +inf (predict everything positive) with a
    warning.
    """
    if labels.all() or not labels.any():
        logger.warning("single-class validation data; threshold set to +inf")
        return math.inf, float(labels.mean())
    distinct = np.unique(scores)
    candidates = [distinct[0] - 1.0]
    candidates.extend((distinct[:-1] + distinct[1:]) / 2.0)
    candidates.append(distinct[-1] + 1.0)
    best_cut, best_acc = None, -1.0
    for cut in candidates:
        acc = float((decide(scores, cut) == labels).mean())
        if acc > best_acc:
            best_cut, best_acc = float(cut), acc
    return best_cut, best_acc


def tune_thresholds(model: ModelState, dataset: Dataset,
                    split: str = "valid") -> ThresholdTable:
    """Fit the threshold table on a labeled split."""
    table = ThresholdTable()

    rel = dataset.relational[split]
    if len(rel):
        scores = model.score_batch(RELATIONAL, rel.ids)
        for r in np.unique(rel.ids[:, 1]):
            mask = rel.ids[:, 1] == r
            cut, _ = best_threshold(scores[mask], rel.labels[mask])
            table.relational[int(r)] = cut

    ins = dataset.instance_of[split]
    if len(ins):
        cut, _ = best_threshold(model.score_batch(INSTANCE_OF, ins.ids), ins.labels)
        table.instance_of = cut

    sub = dataset.sub_class_of[split]
    if len(sub):
        cut, _ = best_threshold(model.score_batch(SUB_CLASS_OF, sub.ids), sub.labels)
        table.sub_class_of = cut
    return table


def classify_kind(model: ModelState, thresholds: ThresholdTable, kind: str,
                  triples: SplitTriples) -> ClassificationReport:
    """Classify one kind's labeled triples and report confusion metrics."""
    if len(triples) == 0:
        raise DataError(f"no labeled {kind} triples to classify")
    scores = model.score_batch(kind, triples.ids)
    if kind == RELATIONAL:
        cuts = np.empty(len(triples))
        for row, r in enumerate(triples.ids[:, 1]):
            try:
                cuts[row] = thresholds.relational[int(r)]
            except KeyError:
                raise DataError(f"missing threshold for relation {int(r)}") from None
    elif kind == INSTANCE_OF:
        if thresholds.instance_of is None:
            raise DataError("missing threshold for InstanceOf")
        cuts = np.full(len(triples), thresholds.instance_of)
    elif kind == SUB_CLASS_OF:
        if thresholds.sub_class_of is None:
            raise DataError("missing threshold for SubClassOf")
        cuts = np.full(len(triples), thresholds.sub_class_of)
    else:
        raise ValueError(f"unknown triple kind: {kind!r}")

    predicted = decide(scores, cuts)
    labels = triples.labels
    tp = int((predicted & labels).sum())
    fp = int((predicted & ~labels).sum())
    tn = int((~predicted & ~labels).sum())
    fn = int((~predicted & labels).sum())
    return ClassificationReport.from_counts(tp, fp, tn, fn)


def classify(model: ModelState, thresholds: ThresholdTable, dataset: Dataset,
             split: str = "test") -> dict[str, ClassificationReport]:
    """Classify every kind that has labeled triples in the split."""
    reports = {}
    for kind in (INSTANCE_OF, SUB_CLASS_OF, RELATIONAL):
        triples = dataset.splits_of(kind)[split]
        if len(triples):
            reports[kind] = classify_kind(model, thresholds, kind, triples)
    return reports


def _rank_query(scores: np.ndarray, true_idx: int,
                known_competitors: list[int]) -> tuple[int, int]:
    """Pessimistic raw and filtered rank of the true candidate."""
    s_true = scores[true_idx]
    raw = 1 + int((scores < s_true).sum()) + int((scores == s_true).sum()) - 1
    drop = 0
    for k in known_competitors:
        if k != true_idx and scores[k] <= s_true:
            drop += 1
    return raw, raw - drop


def link_predict(model: ModelState, test_triples: SplitTriples, truth: TruthIndex,
                 setting: str = "both", collect_ranks: bool = False,
                 max_queries: Optional[int] = None) -> RankingReport:
    """Rank the true head and tail of each positive test triple against all
    instance replacements.

    MRR averages reciprocal ranks over both directions of every query;
    Hits@N is reported under the filtered setting.  ``setting='raw'``
    skips the filter bookkeeping (the filtered fields come back None).
    """
    if setting not in ("raw", "filter", "both"):
        raise ValueError(f"unknown setting: {setting!r}")
    want_filter = setting in ("filter", "both")

    positives = test_triples.positives()
    if max_queries is not None:
        positives = positives[:max_queries]
    raw_recips: list[float] = []
    filt_recips: list[float] = []
    hits = {1: 0, 3: 0, 10: 0}
    ranks: list[QueryRank] = []
    n = 0
    for qid, (h, r, t) in enumerate(positives):
        h, r, t = int(h), int(r), int(t)
        for direction, scores, true_idx, known in (
            ("head", model.rel_scores_all_heads(r, t), h,
             truth.known_heads(r, t) if want_filter else []),
            ("tail", model.rel_scores_all_tails(h, r), t,
             truth.known_tails(h, r) if want_filter else []),
        ):
            raw, filt = _rank_query(scores, true_idx, known)
            raw_recips.append(1.0 / raw)
            if want_filter:
                filt_recips.append(1.0 / filt)
                for k in hits:
                    hits[k] += filt <= k
            if collect_ranks:
                ranks.append(QueryRank(query_id=qid, direction=direction,
                                       raw_rank=raw, filter_rank=filt))
            n += 1

    if n == 0:
        raise DataError("no positive relational test triples to rank")
    return RankingReport(
        mrr_raw=float(np.mean(raw_recips)),
        mrr_filter=float(np.mean(filt_recips)) if want_filter else None,
        hits1=hits[1] / n if want_filter else None,
        hits3=hits[3] / n if want_filter else None,
        hits10=hits[10] / n if want_filter else None,
        n_queries=n,
        ranks=ranks if collect_ranks else None,
    )


@dataclass
class TransitivityReport:
    """Fractions of rule-derived triples that classify positive.

    A fraction is None (undefined) when the rule derives nothing.
    """

    instance_of_fraction: Optional[float]
    instance_of_total: int
    sub_class_of_fraction: Optional[float]
    sub_class_of_total: int

    @property
    def combined_fraction(self) -> Optional[float]:
        total = self.instance_of_total + self.sub_class_of_total
        if total == 0:
            return None
        positive = 0.0
        if self.instance_of_total:
            positive += self.instance_of_fraction * self.instance_of_total
        if self.sub_class_of_total:
            positive += self.sub_class_of_fraction * self.sub_class_of_total
        return positive / total


def _ancestor_map(edges: np.ndarray, n_concepts: int) -> dict[int, set[int]]:
    parents: dict[int, set[int]] = {}
    for sub, sup in edges:
        parents.setdefault(int(sub), set()).add(int(sup))
    ancestors: dict[int, set[int]] = {}
    for start in range(n_concepts):
        seen: set[int] = set()
        frontier = list(parents.get(start, ()))
        while frontier:
            node = frontier.pop()
            if node in seen:
                continue
            seen.add(node)
            frontier.extend(parents.get(node, ()))
        seen.discard(start)
        if seen:
            ancestors[start] = seen
    return ancestors


def transitivity_probe(model: ModelState, thresholds: ThresholdTable,
                       dataset: Dataset) -> TransitivityReport:
    """Materialize the isA closure of the training triples and classify it.

    Rule 1 chains InstanceOf through SubClassOf ancestors; rule 2 chains
    SubClassOf through SubClassOf.  Triples already asserted in training
    are excluded; each fraction counts derived triples predicted positive.
    """
    sub_train = dataset.sub_class_of["train"].positives()
    ins_train = dataset.instance_of["train"].positives()
    ancestors = _ancestor_map(sub_train, dataset.vocabulary.n_concepts)

    existing_sub = {(int(a), int(b)) for a, b in sub_train}
    derived_sub = sorted(
        (c, anc)
        for c, ancs in ancestors.items()
        for anc in ancs
        if (c, anc) not in existing_sub
    )

    existing_ins = {(int(i), int(c)) for i, c in ins_train}
    derived_ins = sorted(
        (i, anc)
        for i, c in existing_ins
        for anc in ancestors.get(c, ())
        if (i, anc) not in existing_ins
    )

    ins_fraction = None
    if derived_ins:
        if thresholds.instance_of is None:
            raise DataError("missing threshold for InstanceOf")
        scores = model.score_batch(INSTANCE_OF, np.array(derived_ins, dtype=np.int64))
        ins_fraction = float(decide(scores, np.full(len(scores), thresholds.instance_of)).mean())

    sub_fraction = None
    if derived_sub:
        if thresholds.sub_class_of is None:
            raise DataError("missing threshold for SubClassOf")
        scores = model.score_batch(SUB_CLASS_OF, np.array(derived_sub, dtype=np.int64))
        sub_fraction = float(decide(scores, np.full(len(scores), thresholds.sub_class_of)).mean())

    return TransitivityReport(
        instance_of_fraction=ins_fraction,
        instance_of_total=len(derived_ins),
        sub_class_of_fraction=sub_fraction,
        sub_class_of_total=len(derived_sub),
    )


# -- report rendering -----------------------------------------------------------

_KIND_TITLES = {
    INSTANCE_OF: "InstanceOf",
    SUB_CLASS_OF: "SubClassOf",
    RELATIONAL: "Relational",
}


def classification_csv(reports: dict[str, ClassificationReport]) -> str:
    out = io.StringIO()
    out.write("kind,accuracy,precision,recall,f1,tp,fp,tn,fn\n")
    for kind, rep in reports.items():
        out.write(f"{_KIND_TITLES[kind]},{rep.accuracy:.6f},{rep.precision:.6f},"
                  f"{rep.recall:.6f},{rep.f1:.6f},{rep.tp},{rep.fp},{rep.tn},{rep.fn}\n")
    return out.getvalue()


def classification_table(reports: dict[str, ClassificationReport]) -> str:
    header = f"{'Kind':<12}{'Accuracy':>10}{'Precision':>11}{'Recall':>9}{'F1':>8}"
    lines = [header, "-" * len(header)]
    for kind, rep in reports.items():
        lines.append(f"{_KIND_TITLES[kind]:<12}{rep.accuracy:>10.4f}"
                     f"{rep.precision:>11.4f}{rep.recall:>9.4f}{rep.f1:>8.4f}")
    return "\n".join(lines)


def ranking_csv(report: RankingReport) -> str:
    out = io.StringIO()
    out.write("metric,value\n")
    out.write(f"mrr_raw,{_fmt(report.mrr_raw)}\n")
    out.write(f"mrr_filter,{_fmt(report.mrr_filter)}\n")
    out.write(f"hits@1_filter,{_fmt(report.hits1)}\n")
    out.write(f"hits@3_filter,{_fmt(report.hits3)}\n")
    out.write(f"hits@10_filter,{_fmt(report.hits10)}\n")
    out.write(f"queries,{report.n_queries}\n")
    return out.getvalue()


def ranking_table(report: RankingReport) -> str:
    rows = [
        ("MRR (raw)", report.mrr_raw),
        ("MRR (filter)", report.mrr_filter),
        ("Hits@1", report.hits1),
        ("Hits@3", report.hits3),
        ("Hits@10", report.hits10),
    ]
    width = max(len(name) for name, _ in rows) + 2
    lines = [f"{name:<{width}}{_fmt(value):>10}" for name, value in rows]
    lines.append(f"{'queries':<{width}}{report.n_queries:>10}")
    return "\n".join(lines)


def write_rank_dump(path: str, report: RankingReport) -> None:
    if report.ranks is None:
        raise ValueError("report was built without collect_ranks")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("query_id direction raw_rank filter_rank\n")
        for qr in report.ranks:
            fh.write(f"{qr.query_id} {qr.direction} {qr.raw_rank} {qr.filter_rank}\n")


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.6f}"
