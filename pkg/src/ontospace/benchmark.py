"""End-to-end benchmark harness: train, select, classify, rank, probe.

Drives a full evaluation run against any dataset directory and emits the
standard report files.  A subsample fraction scales every split down for
smoke-level runs of large datasets.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import evaluation as ev
from .config import TrainingConfig
from .data import KINDS, Dataset, SplitTriples, build_truth_index, with_generated_negatives
from .model import ModelState
from .training import train

logger = logging.getLogger(__name__)


def validation_accuracy(state: ModelState, dataset: Dataset) -> float:
    """Mean classification accuracy over the kinds present in the valid split."""
    table = ev.tune_thresholds(state, dataset, split="valid")
    reports = ev.classify(state, table, dataset, split="valid")
    if not reports:
        return 0.0
    return float(np.mean([r.accuracy for r in reports.values()]))


def validation_hits10(state: ModelState, dataset: Dataset,
                      max_queries: int = 500) -> float:
    """Filtered Hits@10 on (a capped prefix of) the relational valid split."""
    valid = dataset.relational["valid"]
    if len(valid) == 0:
        return 0.0
    truth = build_truth_index(dataset)
    report = ev.link_predict(state, valid, truth, setting="both",
                             max_queries=max_queries)
    return float(report.hits10)


def make_valid_metric(config: TrainingConfig, dataset: Dataset):
    """Metric callable matching the configured checkpoint-selection mode."""
    if config.select_by == "accuracy":
        return lambda state: validation_accuracy(state, dataset)
    if config.select_by == "hits10":
        return lambda state: validation_hits10(state, dataset)
    return None


def subsample_dataset(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Uniformly subsample every split of every kind (vocabulary unchanged).

    Nonempty splits keep at least one row; labels travel with their rows.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return dataset
    rng = np.random.default_rng([seed, 0x5AB5])
    out = Dataset(vocabulary=dataset.vocabulary, concept_texts=list(dataset.concept_texts))
    for kind in KINDS:
        src = dataset.splits_of(kind)
        dst = out.splits_of(kind)
        for split, st in src.items():
            if len(st) == 0:
                dst[split] = st
                continue
            keep = max(1, int(round(fraction * len(st))))
            idx = np.sort(rng.choice(len(st), size=keep, replace=False))
            dst[split] = SplitTriples(ids=st.ids[idx], labels=st.labels[idx])
    return out


@dataclass
class BenchmarkResult:
    state: ModelState
    thresholds: ev.ThresholdTable
    classification: dict[str, ev.ClassificationReport]
    ranking: Optional[ev.RankingReport]
    transitivity: ev.TransitivityReport
    train_seconds: float
    eval_seconds: float


def run_benchmark(dataset: Dataset, config: TrainingConfig,
                  concept_vecs: Optional[np.ndarray] = None,
                  subsample: Optional[float] = None,
                  link_max_queries: Optional[int] = None,
                  out_dir: Optional[str] = None,
                  checkpoint_path: Optional[str] = None) -> BenchmarkResult:
    """Train on the dataset and evaluate both tasks, writing reports to out_dir."""
    if subsample is not None:
        dataset = subsample_dataset(dataset, subsample, config.seed)
    dataset = with_generated_negatives(dataset, seed=config.seed)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        if checkpoint_path is None:
            checkpoint_path = os.path.join(out_dir, "model.ckpt")

    t0 = time.perf_counter()
    state, _ = train(
        dataset, config, concept_vecs=concept_vecs,
        checkpoint_path=checkpoint_path,
        log_path=os.path.join(out_dir, "training_log.csv") if out_dir else None,
        valid_metric_fn=make_valid_metric(config, dataset),
    )
    if checkpoint_path and config.select_by != "none" and config.valid_every > 0:
        from .checkpoint import load_checkpoint

        state = load_checkpoint(checkpoint_path)
    train_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    thresholds = ev.tune_thresholds(state, dataset)
    classification = ev.classify(state, thresholds, dataset)
    ranking = None
    if len(dataset.relational["test"]):
        ranking = ev.link_predict(state, dataset.relational["test"],
                                  build_truth_index(dataset), setting="both",
                                  max_queries=link_max_queries)
    transitivity = ev.transitivity_probe(state, thresholds, dataset)
    eval_seconds = time.perf_counter() - t1

    if out_dir:
        with open(os.path.join(out_dir, "classification.csv"), "w", encoding="utf-8") as fh:
            fh.write(ev.classification_csv(classification))
        if ranking is not None:
            with open(os.path.join(out_dir, "ranking.csv"), "w", encoding="utf-8") as fh:
                fh.write(ev.ranking_csv(ranking))
        with open(os.path.join(out_dir, "transitivity.csv"), "w", encoding="utf-8") as fh:
            fh.write(transitivity_csv(transitivity))
    return BenchmarkResult(
        state=state, thresholds=thresholds, classification=classification,
        ranking=ranking, transitivity=transitivity,
        train_seconds=train_seconds, eval_seconds=eval_seconds,
    )


def transitivity_csv(report: ev.TransitivityReport) -> str:
    def cell(x):
        return "undefined" if x is None else f"{x:.6f}"

    return (
        "rule,fraction_positive,derived\n"
        f"instanceof_via_subclassof,{cell(report.instance_of_fraction)},{report.instance_of_total}\n"
        f"subclassof_chain,{cell(report.sub_class_of_fraction)},{report.sub_class_of_total}\n"
        f"combined,{cell(report.combined_fraction)},"
        f"{report.instance_of_total + report.sub_class_of_total}\n"
    )
