"""Margin-ranking training: negative sampling, loss accounting, SGD loop.

Each epoch shuffles every triple kind, slices the shuffles into batches,
and interleaves the batches proportionally to set sizes so all three
objectives advance together.  Every positive draws fresh negatives by
corruption; a pair whose hinge is active contributes its gradient and the
batch is applied as one SGD step followed by constraint projection.

Per-epoch randomness derives from (seed, epoch), so resuming from a
checkpoint at epoch k reproduces an uninterrupted run bit for bit in
single-threaded mode.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import TrainingConfig
from .data import (
    INSTANCE_OF,
    KINDS,
    RELATIONAL,
    SUB_CLASS_OF,
    Dataset,
    TruthIndex,
    Vocabulary,
    build_truth_index,
)
from .errors import DataError, NumericError
from .extensional import init_extensional
from .gradients import GradientBuffer, pair_loss_and_grad
from .intensional import init_intensional
from .model import ModelState

logger = logging.getLogger(__name__)

# rng stream tags keep per-purpose generators independent
_STREAM_EPOCH = 0xE9
_STREAM_WORKER = 0x3D


@dataclass
class BernStats:
    """Per-relation corruption statistics: mean tails per head and heads per tail."""

    tph: np.ndarray
    hpt: np.ndarray

    def head_replace_prob(self, relation: int) -> float:
        t, h = float(self.tph[relation]), float(self.hpt[relation])
        return t / (t + h)


def compute_bern_stats(dataset: Dataset) -> BernStats:
    n_rel = dataset.vocabulary.n_relations
    tph = np.ones(n_rel)
    hpt = np.ones(n_rel)
    triples = dataset.relational["train"].positives()
    for r in range(n_rel):
        rows = triples[triples[:, 1] == r]
        if len(rows) == 0:
            continue
        pairs = {(int(h), int(t)) for h, _, t in rows}
        heads = {h for h, _ in pairs}
        tails = {t for _, t in pairs}
        tph[r] = len(pairs) / len(heads)
        hpt[r] = len(pairs) / len(tails)
    return BernStats(tph=tph, hpt=hpt)


def hinge_rank_loss(pos_score: float, neg_score: float, margin: float) -> float:
    """max(0, margin + positive score - negative score)."""
    return max(0.0, margin + pos_score - neg_score)


def corrupt(triple: tuple, kind: str, mode: str, stats: BernStats,
            truth: TruthIndex, vocab: Vocabulary, rng: np.random.Generator,
            max_tries: int = 100) -> Optional[tuple]:
    """Generate one negative for a training positive.

    Picks the side to replace first (uniform coin, or the per-relation
    Bernoulli head probability for relational triples in bern mode), then
    resamples the replacement until the candidate is absent from the truth
    index.  Returns None when the retry budget is exhausted.
    """
    if kind == RELATIONAL:
        p_head = stats.head_replace_prob(triple[1]) if mode == "bern" else 0.5
        pos = 0 if rng.random() < p_head else 2
        pool = vocab.n_instances
    elif kind == INSTANCE_OF:
        pos = 0 if rng.random() < 0.5 else 1
        pool = vocab.n_instances if pos == 0 else vocab.n_concepts
    elif kind == SUB_CLASS_OF:
        pos = 0 if rng.random() < 0.5 else 1
        pool = vocab.n_concepts
    else:
        raise ValueError(f"unknown triple kind: {kind!r}")

    cand = list(triple)
    for _ in range(max_tries):
        cand[pos] = int(rng.integers(pool))
        cand_t = tuple(cand)
        if cand_t != triple and not truth.contains(kind, cand_t):
            return cand_t
    return None


@dataclass
class LossBreakdown:
    rel: float = 0.0
    ins: float = 0.0
    sub: float = 0.0

    @property
    def total(self) -> float:
        return self.rel + self.ins + self.sub

    def add(self, kind: str, value: float) -> None:
        if kind == RELATIONAL:
            self.rel += value
        elif kind == INSTANCE_OF:
            self.ins += value
        else:
            self.sub += value


@dataclass
class EpochStats:
    epoch: int
    loss: LossBreakdown
    wall_seconds: float
    skipped_negatives: int = 0
    valid_metric: Optional[float] = None


def _margin(config: TrainingConfig, kind: str) -> float:
    if kind == RELATIONAL:
        return config.margin_rel
    if kind == INSTANCE_OF:
        return config.margin_ins
    return config.margin_sub


def epoch_loss(state: ModelState, pairs: list[tuple]) -> LossBreakdown:
    """Loss decomposition of (kind, positive, negative) pairs, no updates."""
    breakdown = LossBreakdown()
    for kind, pos, neg in pairs:
        breakdown.add(kind, pair_loss_and_grad(
            state, kind, pos, neg, _margin(state.config, kind)))
    if not np.isfinite(breakdown.total):
        raise NumericError(_loss_dump(state, breakdown))
    return breakdown


def sgd_step(state: ModelState, pairs: list[tuple],
             buf: Optional[GradientBuffer] = None) -> LossBreakdown:
    """One mini-batch SGD step over (kind, positive, negative) pairs.

    Accumulates the batch gradient, applies it with the configured
    learning rate, projects constraints, and returns the batch's loss
    decomposition (scored before the update).
    """
    if buf is None:
        buf = GradientBuffer(state)
    breakdown = LossBreakdown()
    for kind, pos, neg in pairs:
        breakdown.add(kind, pair_loss_and_grad(
            state, kind, pos, neg, _margin(state.config, kind), buf))
    if not np.isfinite(breakdown.total):
        raise NumericError(_loss_dump(state, breakdown))
    buf.apply(state, state.config.lr)
    return breakdown


def _loss_dump(state: ModelState, breakdown: LossBreakdown) -> str:
    ext = state.extensional
    return (
        "non-finite loss: "
        f"rel={breakdown.rel} ins={breakdown.ins} sub={breakdown.sub}; "
        f"max|instance|={np.abs(ext.instances).max():.3e} "
        f"max|relation|={np.abs(ext.relations).max():.3e} "
        f"max|center|={np.abs(ext.centers).max():.3e} "
        f"max|concept_vec|={np.abs(state.intensional.concept_vecs).max():.3e}"
    )


def _interleave(batch_counts: dict[str, int]) -> list[str]:
    """Proportional round-robin over kinds: at every step emit the kind
    lagging most behind its fair share."""
    total = sum(batch_counts.values())
    emitted = {k: 0 for k in batch_counts}
    order = []
    for _ in range(total):
        kind = min(
            (k for k in batch_counts if emitted[k] < batch_counts[k]),
            key=lambda k: ((emitted[k] + 1) / batch_counts[k], KINDS.index(k)),
        )
        emitted[kind] += 1
        order.append(kind)
    return order


class Trainer:
    """Owns model state and dataset-derived indexes for one training run."""

    def __init__(self, dataset: Dataset, config: TrainingConfig,
                 concept_vecs: Optional[np.ndarray] = None,
                 initial_state: Optional[ModelState] = None):
        config.validate()
        self.dataset = dataset
        self.config = config
        self.truth = build_truth_index(dataset)
        self.bern = compute_bern_stats(dataset)
        self.skipped_negatives = 0
        vocab = dataset.vocabulary
        if initial_state is not None:
            if initial_state.config.d != config.d:
                raise DataError("resume dimension differs from config")
            self.state = initial_state
        else:
            self.state = ModelState(
                extensional=init_extensional(
                    vocab.n_instances, vocab.n_relations, vocab.n_concepts,
                    config.d, config.seed),
                intensional=init_intensional(
                    vocab.n_concepts, config.d, config.seed,
                    bridge_mode=config.bridge, init_mode=config.init,
                    concept_vecs=concept_vecs),
                config=config,
                epoch=0,
            )
        self._buf = GradientBuffer(self.state)
        self._train_ids = {
            kind: dataset.splits_of(kind)["train"].positives() for kind in KINDS
        }

    def epoch_rng(self, epoch: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, _STREAM_EPOCH, epoch])

    def _make_pairs(self, kind: str, positives: np.ndarray,
                    rng: np.random.Generator) -> list[tuple]:
        pairs = []
        for row in positives:
            pos = tuple(int(x) for x in row)
            for _ in range(self.config.negatives_per_positive):
                neg = corrupt(pos, kind, self.config.sampling, self.bern,
                              self.truth, self.dataset.vocabulary, rng)
                if neg is None:
                    self.skipped_negatives += 1
                    continue
                pairs.append((kind, pos, neg))
        return pairs

    def run_epoch(self, epoch: int) -> EpochStats:
        start = time.perf_counter()
        rng = self.epoch_rng(epoch)
        cfg = self.config
        batches: dict[str, list[np.ndarray]] = {}
        for kind in KINDS:
            ids = self._train_ids[kind]
            if len(ids) == 0:
                continue
            perm = rng.permutation(len(ids))
            shuffled = ids[perm]
            batches[kind] = [
                shuffled[i:i + cfg.batch_size]
                for i in range(0, len(shuffled), cfg.batch_size)
            ]
        if not batches:
            raise DataError("no training triples of any kind")

        skipped_before = self.skipped_negatives
        breakdown = LossBreakdown()
        cursors = {k: 0 for k in batches}
        for kind in _interleave({k: len(v) for k, v in batches.items()}):
            batch = batches[kind][cursors[kind]]
            cursors[kind] += 1
            if cfg.threads > 1:
                step = self._parallel_step(kind, batch, epoch, cursors[kind])
            else:
                pairs = self._make_pairs(kind, batch, rng)
                step = sgd_step(self.state, pairs, self._buf)
            breakdown.rel += step.rel
            breakdown.ins += step.ins
            breakdown.sub += step.sub

        self.state.epoch = epoch
        return EpochStats(
            epoch=epoch,
            loss=breakdown,
            wall_seconds=time.perf_counter() - start,
            skipped_negatives=self.skipped_negatives - skipped_before,
        )

    def _parallel_step(self, kind: str, batch: np.ndarray, epoch: int,
                       batch_no: int) -> LossBreakdown:
        """Shard negative sampling and gradient accumulation across workers;
        merge into one SGD step.  Distribution-equivalent, not bit-equal,
        to the single-threaded path."""
        n_workers = min(self.config.threads, len(batch))
        shards = np.array_split(batch, n_workers)

        def work(widx: int):
            wrng = np.random.default_rng(
                [self.config.seed, _STREAM_WORKER, epoch, batch_no, widx])
            wbuf = GradientBuffer(self.state)
            local = LossBreakdown()
            for kind_, pos, neg in self._make_pairs(kind, shards[widx], wrng):
                local.add(kind_, pair_loss_and_grad(
                    self.state, kind_, pos, neg, _margin(self.config, kind_), wbuf))
            return local, wbuf

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(work, range(n_workers)))
        breakdown = LossBreakdown()
        for local, wbuf in results:
            breakdown.rel += local.rel
            breakdown.ins += local.ins
            breakdown.sub += local.sub
            self._merge_buffer(wbuf)
        if not np.isfinite(breakdown.total):
            raise NumericError(_loss_dump(self.state, breakdown))
        self._buf.apply(self.state, self.config.lr)
        return breakdown

    def _merge_buffer(self, other: GradientBuffer) -> None:
        buf = self._buf
        for rows, src, dst, touched in (
            (other.touched_instances, other.g_instances, buf.g_instances, buf.touched_instances),
            (other.touched_relations, other.g_relations, buf.g_relations, buf.touched_relations),
            (other.touched_concept_vecs, other.g_concept_vecs, buf.g_concept_vecs,
             buf.touched_concept_vecs),
        ):
            idx = sorted(rows)
            if idx:
                dst[idx] += src[idx]
                touched.update(rows)
        idx = sorted(other.touched_concepts)
        if idx:
            buf.g_centers[idx] += other.g_centers[idx]
            buf.g_axes[idx] += other.g_axes[idx]
            buf.g_radii[idx] += other.g_radii[idx]
            buf.touched_concepts.update(other.touched_concepts)
        if other.bridge_touched:
            buf.g_bridge += other.g_bridge
            buf.bridge_touched = True


def train(dataset: Dataset, config: TrainingConfig,
          concept_vecs: Optional[np.ndarray] = None,
          initial_state: Optional[ModelState] = None,
          log_path: Optional[str] = None,
          checkpoint_path: Optional[str] = None,
          valid_metric_fn: Optional[Callable[[ModelState], float]] = None,
          ) -> tuple[ModelState, list[EpochStats]]:
    """Run the full training loop.

    Epochs resume after ``initial_state.epoch`` when given.  When a
    validation metric function and ``valid_every`` are configured, the
    best-scoring state is checkpointed to ``checkpoint_path`` as training
    goes; otherwise the final state is written there at the end.
    """
    from .checkpoint import save_checkpoint  # local import avoids a cycle

    trainer = Trainer(dataset, config, concept_vecs=concept_vecs,
                      initial_state=initial_state)
    history: list[EpochStats] = []
    start_epoch = trainer.state.epoch + 1
    best_metric = -np.inf
    wrote_checkpoint = False
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        if log_fh:
            log_fh.write("epoch,loss_rel,loss_ins,loss_sub,loss_total,wall_seconds\n")
        for epoch in range(start_epoch, config.epochs + 1):
            stats = trainer.run_epoch(epoch)
            if (valid_metric_fn is not None and config.valid_every > 0
                    and epoch % config.valid_every == 0):
                metric = valid_metric_fn(trainer.state)
                stats.valid_metric = metric
                if metric > best_metric:
                    best_metric = metric
                    if checkpoint_path:
                        save_checkpoint(trainer.state, checkpoint_path)
                        wrote_checkpoint = True
                        logger.info("epoch %d: new best validation metric %.4f, "
                                    "checkpoint saved", epoch, metric)
            history.append(stats)
            if log_fh:
                loss = stats.loss
                log_fh.write(f"{epoch},{loss.rel!r},{loss.ins!r},{loss.sub!r},"
                             f"{loss.total!r},{stats.wall_seconds:.3f}\n")
            logger.debug("epoch %d: L=%.4f (rel %.4f, ins %.4f, sub %.4f)",
                         epoch, stats.loss.total, stats.loss.rel,
                         stats.loss.ins, stats.loss.sub)
    finally:
        if log_fh:
            log_fh.close()
    if checkpoint_path and not wrote_checkpoint:
        save_checkpoint(trainer.state, checkpoint_path)
    return trainer.state, history
