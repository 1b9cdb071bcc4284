"""Synthetic ontology generator for end-to-end checks and demos.

Builds a three-level concept tree whose geometry is realizable by
construction.  Leaf clusters sit on a square lattice, branches are the
lattice quadrants, the root covers everything:

  * InstanceOf assertions at the leaf always, at the branch and root with
    configurable probabilities (split across train/valid/test),
  * SubClassOf direct edges in train, with the two-step closure pairs
    (leaf to root) held out for valid/test, so evaluation measures
    transitive generalization,
  * one same-cluster relation plus lattice-shift relations, so every
    relation is a single consistent translation.

Evaluation negatives are corrupted against the semantic closure rather
than the asserted triples; an entailed-but-unasserted triple must never
be labeled false.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import ConceptText, Dataset, SplitTriples, Vocabulary
from .errors import DataError

# lattice shift per relation id >= 1: right, down, up, left
_SHIFTS = ((0, 1), (1, 0), (-1, 0), (0, -1))


@dataclass
class SynthSpec:
    n_concepts: int = 20          # 1 root + 4 quadrant branches + leaves
    n_instances: int = 500
    n_relations: int = 5          # same-cluster plus up to four shifts
    seed: int = 7
    p_branch_type: float = 0.6    # chance an instance also asserts its branch
    p_root_type: float = 0.3     # chance an instance also asserts the root
    same_cluster_rings: int = 3   # ring passes linking members of one leaf
    cross_edges_per_pair: int = 25
    instance_split: tuple[float, float] = (0.8, 0.1)    # train, valid (rest test)
    relational_split: tuple[float, float] = (0.9, 0.05)
    subclass_negatives: int = 3   # negatives per positive in valid/test
    instance_negatives: int = 1


def generate_ontology(spec: SynthSpec = SynthSpec()) -> Dataset:
    n_leaves = spec.n_concepts - 5
    if n_leaves < 4:
        raise DataError("need at least 9 concepts (root, 4 branches, 4 leaves)")
    if not 1 <= spec.n_relations <= 1 + len(_SHIFTS):
        raise DataError(f"n_relations must be in [1, {1 + len(_SHIFTS)}]")
    rng = np.random.default_rng(spec.seed)

    grid = 2
    while grid * grid < n_leaves:
        grid += 2  # even side keeps the four quadrants balanced
    cell_of = {leaf: (k // grid, k % grid) for k, leaf in enumerate(range(n_leaves))}
    leaf_at = {cell: leaf for leaf, cell in cell_of.items()}

    root = 0
    half = grid // 2

    def branch_of(leaf: int) -> int:
        row, col = cell_of[leaf]
        return 1 + (row // half) * 2 + (col // half)

    concept_of_leaf = {leaf: 5 + leaf for leaf in range(n_leaves)}
    vocab = Vocabulary(
        instances=[f"inst_{k:04d}" for k in range(spec.n_instances)],
        concepts=_concept_names(n_leaves, branch_of),
        relations=[f"rel_{k}" for k in range(spec.n_relations)],
    )

    leaf_of_inst = rng.integers(0, n_leaves, size=spec.n_instances)
    members: dict[int, list[int]] = {leaf: [] for leaf in range(n_leaves)}
    for inst, leaf in enumerate(leaf_of_inst):
        members[int(leaf)].append(inst)

    # -- InstanceOf assertions over three levels ------------------------------
    ins_rows: list[tuple[int, int]] = []
    for inst in range(spec.n_instances):
        leaf = int(leaf_of_inst[inst])
        ins_rows.append((inst, concept_of_leaf[leaf]))
        if rng.random() < spec.p_branch_type:
            ins_rows.append((inst, branch_of(leaf)))
        if rng.random() < spec.p_root_type:
            ins_rows.append((inst, root))
    ins_splits = _split_rows(ins_rows, spec.instance_split, rng)

    # -- SubClassOf: direct edges train, two-step closure held out -------------
    direct = [(b, root) for b in range(1, 5)]
    direct += [(concept_of_leaf[leaf], branch_of(leaf)) for leaf in range(n_leaves)]
    closure = [(concept_of_leaf[leaf], root) for leaf in range(n_leaves)]
    rng.shuffle(closure)
    sub_splits = {
        "train": direct,
        "valid": closure[: len(closure) // 2],
        "test": closure[len(closure) // 2:],
    }

    # -- relational triples: consistent single-translation relations -----------
    rel_rows: set[tuple[int, int, int]] = set()
    for leaf in range(n_leaves):
        group = members[leaf]
        if len(group) < 2:
            continue
        for _ in range(spec.same_cluster_rings):
            ring = [group[k] for k in rng.permutation(len(group))]
            for a, b in zip(ring, ring[1:] + ring[:1]):
                rel_rows.add((a, 0, b))
    for r in range(1, spec.n_relations):
        dr, dc = _SHIFTS[r - 1]
        for leaf in range(n_leaves):
            row, col = cell_of[leaf]
            target = leaf_at.get((row + dr, col + dc))
            if target is None or not members[leaf] or not members[target]:
                continue
            for _ in range(spec.cross_edges_per_pair):
                h = int(rng.choice(members[leaf]))
                t = int(rng.choice(members[target]))
                rel_rows.add((h, r, t))
    rel_splits = _split_rows(sorted(rel_rows), spec.relational_split, rng)

    dataset = Dataset(
        vocabulary=vocab,
        relational={s: _as_split(rows, 3) for s, rows in rel_splits.items()},
        instance_of={s: _as_split(rows, 2) for s, rows in ins_splits.items()},
        sub_class_of={s: _as_split(rows, 2) for s, rows in sub_splits.items()},
        concept_texts=[
            ConceptText(c, name, _describe(c, branch_of))
            for c, name in enumerate(vocab.concepts)
        ],
    )

    def entailed(kind: str, triple: tuple) -> bool:
        if kind == "instance_of":
            inst, c = triple
            leaf = int(leaf_of_inst[inst])
            return c in (concept_of_leaf[leaf], branch_of(leaf), root)
        if kind == "sub_class_of":
            a, b = triple
            if a == b or b == root:
                return True
            return a >= 5 and b == branch_of(a - 5)
        h, r, t = triple
        lh, lt = int(leaf_of_inst[h]), int(leaf_of_inst[t])
        if r == 0:
            return lh == lt
        dr, dc = _SHIFTS[r - 1]
        row, col = cell_of[lh]
        return leaf_at.get((row + dr, col + dc)) == lt

    _add_negatives(dataset, "instance_of", spec.instance_negatives, rng, entailed)
    _add_negatives(dataset, "sub_class_of", spec.subclass_negatives, rng, entailed)
    _add_negatives(dataset, "relational", 1, rng, entailed)
    return dataset


def _concept_names(n_leaves: int, branch_of) -> list[str]:
    names = ["<synthetic_root_thing>"]
    names += [f"<synthetic_branch_{b}>" for b in range(1, 5)]
    names += [f"<synthetic_leaf_{leaf}_of_branch_{branch_of(leaf)}>"
              for leaf in range(n_leaves)]
    return names


def _describe(c: int, branch_of) -> str:
    if c == 0:
        return "top level synthetic concept covering everything"
    if c <= 4:
        return "mid level synthetic concept directly under the root"
    return f"bottom level synthetic concept inside branch {branch_of(c - 5)}"


def _split_rows(rows, fractions, rng):
    rows = list(rows)
    order = rng.permutation(len(rows))
    n_train = int(round(fractions[0] * len(rows)))
    n_valid = int(round(fractions[1] * len(rows)))
    picked = {"train": [], "valid": [], "test": []}
    for pos, idx in enumerate(order):
        if pos < n_train:
            split = "train"
        elif pos < n_train + n_valid:
            split = "valid"
        else:
            split = "test"
        picked[split].append(rows[int(idx)])
    return picked


def _as_split(rows, width) -> SplitTriples:
    if not rows:
        return SplitTriples(ids=np.zeros((0, width), dtype=np.int64),
                            labels=np.zeros((0,), dtype=bool))
    return SplitTriples(ids=np.array(rows, dtype=np.int64),
                        labels=np.ones(len(rows), dtype=bool))


def _add_negatives(dataset: Dataset, kind: str, per_positive: int,
                   rng: np.random.Generator,
                   entailed: Callable[[str, tuple], bool]) -> None:
    vocab = dataset.vocabulary
    splits = dataset.splits_of(kind)
    for split in ("valid", "test"):
        st = splits[split]
        if len(st) == 0:
            continue
        negatives: set[tuple] = set()
        for row in st.ids:
            pos = tuple(int(x) for x in row)
            made = 0
            for _ in range(200):
                if made >= per_positive:
                    break
                cand = _corrupt_row(pos, kind, vocab, rng)
                if not entailed(kind, cand) and cand not in negatives:
                    negatives.add(cand)
                    made += 1
        if not negatives:
            continue
        ordered = sorted(negatives)
        ids = np.concatenate([st.ids, np.array(ordered, dtype=np.int64)])
        labels = np.concatenate([st.labels, np.zeros(len(ordered), dtype=bool)])
        splits[split] = SplitTriples(ids=ids, labels=labels)


def _corrupt_row(pos, kind, vocab, rng):
    cand = list(pos)
    if kind == "relational":
        idx = 0 if rng.random() < 0.5 else 2
        cand[idx] = int(rng.integers(vocab.n_instances))
    elif kind == "instance_of":
        idx = 0 if rng.random() < 0.5 else 1
        cand[idx] = int(rng.integers(vocab.n_instances if idx == 0 else vocab.n_concepts))
    else:
        idx = 0 if rng.random() < 0.5 else 1
        cand[idx] = int(rng.integers(vocab.n_concepts))
    return tuple(cand)
