"""Ontology data model, dataset ingestion, and split management.

A dataset directory is line-oriented UTF-8 text:

    instance2id.txt / concept2id.txt / relation2id.txt
        first line: count, then one "name<TAB>id" per line
    triple2id_{train,valid,test}.txt
        relational triples "head tail relation"; valid/test lines may
        append a 0/1 label column
    instanceOf2id_{train,valid,test}.txt
        "instance concept" (+ label on valid/test)
    subClassOf2id_{train,valid,test}.txt
        "sub sup" (+ label on valid/test)
    concept_text.txt (optional)
        "concept_id<TAB>raw_name<TAB>description" (description may be empty)

The relation vocabulary holds instance relations only; InstanceOf and
SubClassOf are structural and never appear in it.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

RELATIONAL = "relational"
INSTANCE_OF = "instance_of"
SUB_CLASS_OF = "sub_class_of"
KINDS = (RELATIONAL, INSTANCE_OF, SUB_CLASS_OF)

SPLITS = ("train", "valid", "test")

_KIND_FILES = {
    RELATIONAL: "triple2id_{split}.txt",
    INSTANCE_OF: "instanceOf2id_{split}.txt",
    SUB_CLASS_OF: "subClassOf2id_{split}.txt",
}


class RelationalTriple(NamedTuple):
    head: int
    relation: int
    tail: int


class InstanceOfTriple(NamedTuple):
    instance: int
    concept: int


class SubClassOfTriple(NamedTuple):
    sub: int
    sup: int


class LabeledTriple(NamedTuple):
    triple: tuple
    label: bool


class ConceptText(NamedTuple):
    concept: int
    name: str
    description: Optional[str]


def preprocess_concept_name(raw: str) -> str:
    """Normalize a raw concept name into encoder-ready text.

    Underscore runs become single spaces, outer angle brackets are
    stripped, surrounding whitespace is trimmed.  Idempotent; raises
    DataError when nothing is left.
    """
    text = raw.strip()
    # Strip matched outer bracket pairs until none remain so a second
    # application is a no-op (single-bracketed names lose exactly one pair).
    while len(text) >= 2 and text.startswith("<") and text.endswith(">"):
        text = text[1:-1].strip()
    text = text.replace("_", " ")
    text = " ".join(text.split())
    if not text:
        raise DataError(f"empty concept text after preprocessing: {raw!r}")
    return text


class Vocabulary:
    """Bidirectional name<->id maps for instances, concepts, and instance relations.

    Ids are dense, contiguous, and zero-based within each map.
    """

    def __init__(self, instances: list[str], concepts: list[str], relations: list[str]):
        self.instances = list(instances)
        self.concepts = list(concepts)
        self.relations = list(relations)
        self._instance_ids = _index_names(self.instances, "instance")
        self._concept_ids = _index_names(self.concepts, "concept")
        self._relation_ids = _index_names(self.relations, "relation")

    @property
    def n_instances(self) -> int:
        return len(self.instances)

    @property
    def n_concepts(self) -> int:
        return len(self.concepts)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def instance_id(self, name: str) -> int:
        return self._instance_ids[name]

    def concept_id(self, name: str) -> int:
        return self._concept_ids[name]

    def relation_id(self, name: str) -> int:
        return self._relation_ids[name]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self.instances == other.instances
            and self.concepts == other.concepts
            and self.relations == other.relations
        )


def _index_names(names: list[str], what: str) -> dict[str, int]:
    index: dict[str, int] = {}
    for i, name in enumerate(names):
        if name in index:
            raise DataError(f"duplicate {what} name: {name!r}")
        index[name] = i
    return index


@dataclass
class SplitTriples:
    """Id triples of one kind within one split, with per-row labels.

    ``ids`` has shape (n, 3) for relational triples ordered
    (head, relation, tail), and (n, 2) for InstanceOf/SubClassOf pairs.
    Train splits are all-positive by construction.
    """

    ids: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def positives(self) -> np.ndarray:
        return self.ids[self.labels]

    def rows(self) -> Iterator[LabeledTriple]:
        for row, lab in zip(self.ids, self.labels):
            yield LabeledTriple(tuple(int(x) for x in row), bool(lab))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SplitTriples)
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.labels, other.labels)
        )


def _empty_split(width: int) -> SplitTriples:
    return SplitTriples(
        ids=np.zeros((0, width), dtype=np.int64),
        labels=np.zeros((0,), dtype=bool),
    )


@dataclass
class DatasetStats:
    """Expected entity and positive-triple counts for a dataset release."""

    instances: Optional[int] = None
    concepts: Optional[int] = None
    relations: Optional[int] = None
    train_relational: Optional[int] = None
    train_instance_of: Optional[int] = None
    train_sub_class_of: Optional[int] = None
    valid_relational: Optional[int] = None
    test_relational: Optional[int] = None
    valid_instance_of: Optional[int] = None
    test_instance_of: Optional[int] = None
    valid_sub_class_of: Optional[int] = None
    test_sub_class_of: Optional[int] = None


KNOWN_STATS = {
    "YAGO39K": DatasetStats(
        instances=39_374, concepts=46_110, relations=39,
        train_relational=354_997, train_instance_of=442_836, train_sub_class_of=30_181,
        valid_relational=9_341, test_relational=9_364,
        valid_instance_of=5_000, test_instance_of=5_000,
        valid_sub_class_of=1_000, test_sub_class_of=1_000,
    ),
    "M-YAGO39K": DatasetStats(
        instances=39_374, concepts=46_110, relations=39,
        train_relational=354_997, train_instance_of=442_836, train_sub_class_of=30_181,
        valid_relational=9_341, test_relational=9_364,
        valid_instance_of=8_650, test_instance_of=8_650,
        valid_sub_class_of=1_187, test_sub_class_of=1_187,
    ),
    "DB99K-242": DatasetStats(
        instances=99_744, concepts=242, relations=298,
        train_relational=592_654, train_instance_of=89_744, train_sub_class_of=111,
        valid_relational=32_925, test_relational=32_925,
        valid_instance_of=4_987, test_instance_of=4_987,
        valid_sub_class_of=13, test_sub_class_of=13,
    ),
}


@dataclass
class Dataset:
    """A loaded ontology: vocabulary, per-kind/per-split triples, concept texts."""

    vocabulary: Vocabulary
    relational: dict[str, SplitTriples] = field(default_factory=dict)
    instance_of: dict[str, SplitTriples] = field(default_factory=dict)
    sub_class_of: dict[str, SplitTriples] = field(default_factory=dict)
    concept_texts: list[ConceptText] = field(default_factory=list)

    def splits_of(self, kind: str) -> dict[str, SplitTriples]:
        if kind == RELATIONAL:
            return self.relational
        if kind == INSTANCE_OF:
            return self.instance_of
        if kind == SUB_CLASS_OF:
            return self.sub_class_of
        raise ValueError(f"unknown triple kind: {kind!r}")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.vocabulary == other.vocabulary
            and self.relational == other.relational
            and self.instance_of == other.instance_of
            and self.sub_class_of == other.sub_class_of
            and self.concept_texts == other.concept_texts
        )


def load_dataset(directory: str, expect_stats: Optional[DatasetStats] = None) -> Dataset:
    """Load and validate a dataset directory.

    All id references are checked against the vocabulary, positives may
    not repeat across splits of the same kind, reflexive SubClassOf
    training pairs are dropped with a warning, exact duplicate rows are
    deduplicated with a warning.  When ``expect_stats`` is given, every
    non-None count must match.
    """
    instances = _read_id_map(os.path.join(directory, "instance2id.txt"))
    concepts = _read_id_map(os.path.join(directory, "concept2id.txt"))
    relations = _read_id_map(os.path.join(directory, "relation2id.txt"))
    vocab = Vocabulary(instances, concepts, relations)

    dataset = Dataset(vocabulary=vocab)
    for kind in KINDS:
        splits = dataset.splits_of(kind)
        for split in SPLITS:
            path = os.path.join(directory, _KIND_FILES[kind].format(split=split))
            splits[split] = _read_triples(path, kind, split, vocab)
        _check_cross_split_positives(kind, splits)

    text_path = os.path.join(directory, "concept_text.txt")
    if os.path.exists(text_path):
        dataset.concept_texts = _read_concept_texts(text_path, vocab)

    if expect_stats is not None:
        _check_stats(dataset, expect_stats)
    return dataset


def save_dataset(dataset: Dataset, directory: str) -> None:
    """Write a dataset directory in the exact on-disk layout load_dataset reads."""
    os.makedirs(directory, exist_ok=True)
    _write_id_map(os.path.join(directory, "instance2id.txt"), dataset.vocabulary.instances)
    _write_id_map(os.path.join(directory, "concept2id.txt"), dataset.vocabulary.concepts)
    _write_id_map(os.path.join(directory, "relation2id.txt"), dataset.vocabulary.relations)

    for kind in KINDS:
        splits = dataset.splits_of(kind)
        for split in SPLITS:
            path = os.path.join(directory, _KIND_FILES[kind].format(split=split))
            _write_triples(path, kind, split, splits[split])

    if dataset.concept_texts:
        with open(os.path.join(directory, "concept_text.txt"), "w", encoding="utf-8") as fh:
            for row in dataset.concept_texts:
                desc = row.description or ""
                fh.write(f"{row.concept}\t{row.name}\t{desc}\n")


def _read_id_map(path: str) -> list[str]:
    if not os.path.exists(path):
        raise DataError(f"missing file: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}:1: missing count line")
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise DataError(f"{path}:1: malformed count line: {lines[0]!r}") from None
    entries = [line for line in lines[1:] if line.strip()]
    if len(entries) != count:
        raise DataError(f"{path}: count line says {count} but found {len(entries)} entries")
    names: list[Optional[str]] = [None] * count
    for lineno, line in enumerate(entries, start=2):
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'name<TAB>id', got {line!r}")
        name, raw_id = parts
        try:
            idx = int(raw_id)
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed id: {raw_id!r}") from None
        if not 0 <= idx < count:
            raise DataError(f"{path}:{lineno}: id {idx} out of range [0, {count})")
        if names[idx] is not None:
            raise DataError(f"{path}:{lineno}: duplicate id {idx}")
        names[idx] = name
    return [n for n in names if n is not None]


def _write_id_map(path: str, names: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(names)}\n")
        for i, name in enumerate(names):
            fh.write(f"{name}\t{i}\n")


def _id_bounds(kind: str, vocab: Vocabulary) -> tuple[int, ...]:
    # Per-column id-space sizes, in internal column order.
    if kind == RELATIONAL:
        return (vocab.n_instances, vocab.n_relations, vocab.n_instances)
    if kind == INSTANCE_OF:
        return (vocab.n_instances, vocab.n_concepts)
    return (vocab.n_concepts, vocab.n_concepts)


def _read_triples(path: str, kind: str, split: str, vocab: Vocabulary) -> SplitTriples:
    if not os.path.exists(path):
        raise DataError(f"missing file: {path}")
    bounds = _id_bounds(kind, vocab)
    width = len(bounds)
    labeled = split != "train"

    rows: list[tuple[int, ...]] = []
    labels: list[bool] = []
    n_fields: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(" ")
            if n_fields is None:
                n_fields = len(parts)
                if split == "train" and n_fields != width:
                    raise DataError(
                        f"{path}:{lineno}: train lines must have {width} ids, got {n_fields}"
                    )
                if labeled and n_fields not in (width, width + 1):
                    raise DataError(
                        f"{path}:{lineno}: expected {width} ids with optional label, "
                        f"got {n_fields} fields"
                    )
            elif len(parts) != n_fields:
                raise DataError(
                    f"{path}:{lineno}: inconsistent field count "
                    f"({len(parts)} vs {n_fields} earlier)"
                )
            try:
                values = [int(p) for p in parts]
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed line: {line!r}") from None
            ids, label = values[:width], True
            if n_fields == width + 1:
                if values[width] not in (0, 1):
                    raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {values[width]}")
                label = bool(values[width])
            if kind == RELATIONAL:
                # File order is "head tail relation"; internally (head, relation, tail).
                ids = [ids[0], ids[2], ids[1]]
            for value, bound, col in zip(ids, bounds, range(width)):
                if not 0 <= value < bound:
                    raise DataError(
                        f"{path}:{lineno}: id {value} in column {col} out of range [0, {bound})"
                    )
            if kind == SUB_CLASS_OF and split == "train" and ids[0] == ids[1]:
                logger.warning("%s:%d: dropping reflexive SubClassOf pair (%d, %d)",
                               path, lineno, ids[0], ids[1])
                continue
            rows.append(tuple(ids))
            labels.append(label)

    deduped: dict[tuple[int, ...], bool] = {}
    dup_count = 0
    for row, label in zip(rows, labels):
        if row in deduped:
            if deduped[row] != label:
                raise DataError(f"{path}: triple {row} appears with conflicting labels")
            dup_count += 1
        else:
            deduped[row] = label
    if dup_count:
        logger.warning("%s: deduplicated %d repeated rows", path, dup_count)
    if not deduped:
        return _empty_split(width)
    ids_arr = np.array(list(deduped.keys()), dtype=np.int64)
    labels_arr = np.array(list(deduped.values()), dtype=bool)
    return SplitTriples(ids=ids_arr, labels=labels_arr)


def _write_triples(path: str, kind: str, split: str, triples: SplitTriples) -> None:
    labeled = split != "train"
    with open(path, "w", encoding="utf-8") as fh:
        for row, label in zip(triples.ids, triples.labels):
            if kind == RELATIONAL:
                fields = [row[0], row[2], row[1]]
            else:
                fields = list(row)
            if labeled:
                fields.append(1 if label else 0)
            fh.write(" ".join(str(int(x)) for x in fields) + "\n")


def _read_concept_texts(path: str, vocab: Vocabulary) -> list[ConceptText]:
    texts: list[ConceptText] = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"{path}:{lineno}: expected 'concept_id<TAB>name<TAB>description', "
                    f"got {line!r}"
                )
            try:
                cid = int(parts[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed concept id: {parts[0]!r}") from None
            if not 0 <= cid < vocab.n_concepts:
                raise DataError(f"{path}:{lineno}: concept id {cid} out of range")
            if cid in seen:
                raise DataError(f"{path}:{lineno}: duplicate concept id {cid}")
            seen.add(cid)
            preprocess_concept_name(parts[1])  # validates non-emptiness
            description = parts[2] if parts[2] else None
            texts.append(ConceptText(concept=cid, name=parts[1], description=description))
    return texts


def _check_cross_split_positives(kind: str, splits: dict[str, SplitTriples]) -> None:
    seen: dict[tuple[int, ...], str] = {}
    for split in SPLITS:
        for row in splits[split].positives():
            key = tuple(int(x) for x in row)
            if key in seen:
                raise DataError(
                    f"{kind} positive {key} appears in both "
                    f"'{seen[key]}' and '{split}' splits"
                )
            seen[key] = split


def _check_stats(dataset: Dataset, stats: DatasetStats) -> None:
    vocab = dataset.vocabulary
    checks = [
        ("instances", stats.instances, vocab.n_instances),
        ("concepts", stats.concepts, vocab.n_concepts),
        ("relations", stats.relations, vocab.n_relations),
    ]
    for kind, attr in ((RELATIONAL, "relational"), (INSTANCE_OF, "instance_of"),
                       (SUB_CLASS_OF, "sub_class_of")):
        splits = dataset.splits_of(kind)
        checks.append((f"train_{attr}", getattr(stats, f"train_{attr}"),
                       len(splits["train"].positives())))
        checks.append((f"valid_{attr}", getattr(stats, f"valid_{attr}"),
                       len(splits["valid"].positives())))
        checks.append((f"test_{attr}", getattr(stats, f"test_{attr}"),
                       len(splits["test"].positives())))
    for name, expected, actual in checks:
        if expected is not None and expected != actual:
            raise DataError(f"split-count mismatch for {name}: expected {expected}, got {actual}")


class TruthIndex:
    """Constant-time membership over train + valid-positive + test-positive triples.

    Also indexes known heads per (relation, tail) and known tails per
    (head, relation) for the filtered link-prediction setting.  Immutable
    after construction.
    """

    def __init__(self, dataset: Dataset):
        self.relational: set[tuple[int, int, int]] = set()
        self.instance_of: set[tuple[int, int]] = set()
        self.sub_class_of: set[tuple[int, int]] = set()
        for kind, store in ((RELATIONAL, self.relational),
                            (INSTANCE_OF, self.instance_of),
                            (SUB_CLASS_OF, self.sub_class_of)):
            for split in SPLITS:
                for row in dataset.splits_of(kind)[split].positives():
                    store.add(tuple(int(x) for x in row))

        self._heads: dict[tuple[int, int], list[int]] = {}
        self._tails: dict[tuple[int, int], list[int]] = {}
        for h, r, t in self.relational:
            self._heads.setdefault((r, t), []).append(h)
            self._tails.setdefault((h, r), []).append(t)

    def contains(self, kind: str, triple: tuple) -> bool:
        if kind == RELATIONAL:
            return tuple(triple) in self.relational
        if kind == INSTANCE_OF:
            return tuple(triple) in self.instance_of
        if kind == SUB_CLASS_OF:
            return tuple(triple) in self.sub_class_of
        raise ValueError(f"unknown triple kind: {kind!r}")

    def known_heads(self, relation: int, tail: int) -> list[int]:
        return self._heads.get((relation, tail), [])

    def known_tails(self, head: int, relation: int) -> list[int]:
        return self._tails.get((head, relation), [])

    def size(self, kind: str) -> int:
        if kind == RELATIONAL:
            return len(self.relational)
        if kind == INSTANCE_OF:
            return len(self.instance_of)
        return len(self.sub_class_of)


def build_truth_index(dataset: Dataset) -> TruthIndex:
    return TruthIndex(dataset)


def with_generated_negatives(dataset: Dataset, seed: int) -> Dataset:
    """Return a dataset whose all-positive valid/test splits gain one
    corrupted negative per positive.

    Used when labeled evaluation files are not shipped.  Corruptions
    replace one side uniformly and are resampled until absent from the
    truth index; splits that already contain negatives are left alone.
    """
    truth = build_truth_index(dataset)
    vocab = dataset.vocabulary
    out = Dataset(
        vocabulary=vocab,
        relational=dict(dataset.relational),
        instance_of=dict(dataset.instance_of),
        sub_class_of=dict(dataset.sub_class_of),
        concept_texts=list(dataset.concept_texts),
    )
    rng = np.random.default_rng(seed)
    for kind in KINDS:
        splits = out.splits_of(kind)
        for split in ("valid", "test"):
            st = splits[split]
            if len(st) == 0 or not st.labels.all():
                continue
            negatives = []
            for row in st.ids:
                neg = _corrupt_uniform(tuple(int(x) for x in row), kind, vocab, truth, rng)
                if neg is not None:
                    negatives.append(neg)
            if not negatives:
                continue
            ids = np.concatenate([st.ids, np.array(negatives, dtype=np.int64)])
            labels = np.concatenate([st.labels, np.zeros(len(negatives), dtype=bool)])
            splits[split] = SplitTriples(ids=ids, labels=labels)
    return out


def _corrupt_uniform(triple: tuple, kind: str, vocab: Vocabulary,
                     truth: TruthIndex, rng: np.random.Generator,
                     max_tries: int = 100) -> Optional[tuple]:
    replace_first = bool(rng.random() < 0.5)
    for _ in range(max_tries):
        cand = list(triple)
        if kind == RELATIONAL:
            pool = vocab.n_instances
            pos = 0 if replace_first else 2
        elif kind == INSTANCE_OF:
            pos = 0 if replace_first else 1
            pool = vocab.n_instances if pos == 0 else vocab.n_concepts
        else:
            pos = 0 if replace_first else 1
            pool = vocab.n_concepts
        cand[pos] = int(rng.integers(pool))
        cand_t = tuple(cand)
        if cand_t != triple and not truth.contains(kind, cand_t):
            return cand_t
    return None
