"""Command-line entry point.

Subcommands: train, eval-classify, eval-link, probe-transitivity,
import-vectors, inspect-checkpoint, benchmark, make-synth.  Config-file
keys and training flags mirror each other one-to-one, with flags taking
precedence; all randomness is governed by the seed.

Exit codes: 0 success, 2 bad flags or config, 3 data errors, 4 numeric
aborts during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional

import numpy as np

from . import evaluation as ev
from .benchmark import run_benchmark, subsample_dataset, transitivity_csv, make_valid_metric
from .checkpoint import describe_checkpoint, load_checkpoint
from .config import resolve_config
from .data import (
    KNOWN_STATS,
    DatasetStats,
    build_truth_index,
    load_dataset,
    save_dataset,
    with_generated_negatives,
)
from .errors import OntospaceError
from .intensional import load_concept_vectors, read_concept_vector_file, write_concept_vector_file
from .synth import SynthSpec, generate_ontology
from .training import train

logger = logging.getLogger(__name__)

_CONFIG_FLAGS = (
    ("--d", int, "embedding dimension"),
    ("--lr", float, "SGD learning rate"),
    ("--margin-rel", float, "relational ranking margin"),
    ("--margin-ins", float, "InstanceOf ranking margin"),
    ("--margin-sub", float, "SubClassOf ranking margin"),
    ("--alpha", float, "weight of the intensional score"),
    ("--epochs", int, "training epochs"),
    ("--batch-size", int, "positives per SGD batch"),
    ("--sampling", str, "negative sampling mode: unif or bern"),
    ("--bridge", str, "space bridge: EYE (identity) or MAT (learnable)"),
    ("--init", str, "concept vector init: PRE (encoder file) or UNP (random)"),
    ("--seed", int, "random seed"),
    ("--norm", str, "relational residual norm: L1 or L2"),
    ("--negatives-per-positive", int, "negatives drawn per positive"),
    ("--freeze-concept-vectors", None, "do not update concept vectors"),
    ("--valid-every", int, "validate every N epochs (0 disables)"),
    ("--select-by", str, "checkpoint selection: accuracy, hits10, or none"),
    ("--threads", int, "worker threads for batch sharding"),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for flag, ftype, help_text in _CONFIG_FLAGS:
        if ftype is None:
            parser.add_argument(flag, action="store_const", const=True,
                                default=None, help=help_text)
        else:
            parser.add_argument(flag, type=ftype, default=None, help=help_text)


def _config_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for flag, *_ in _CONFIG_FLAGS:
        key = flag.lstrip("-").replace("-", "_")
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _parse_stats(name_or_path: Optional[str]) -> Optional[DatasetStats]:
    if name_or_path is None:
        return None
    if name_or_path in KNOWN_STATS:
        return KNOWN_STATS[name_or_path]
    with open(name_or_path, encoding="utf-8") as fh:
        return DatasetStats(**json.load(fh))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ontospace",
        description="Two-space ontology embedding: train, evaluate, inspect.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", help="checkpoint output path")
    p.add_argument("--log", help="per-epoch CSV loss log path")
    p.add_argument("--vectors", help="concept vector file for PRE init")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--expect-stats", help="dataset stats preset name or JSON path")
    p.add_argument("--subsample", type=float, help="train on a fraction of every split")
    _add_config_flags(p)

    p = sub.add_parser("eval-classify", help="triple classification on the test split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("valid", "test"))
    p.add_argument("--seed", type=int, default=0,
                   help="seed for generating negatives when splits are unlabeled")
    p.add_argument("--format", default="csv", choices=("csv", "table"))
    p.add_argument("--out", help="also write the CSV report to this path")

    p = sub.add_parser("eval-link", help="link prediction over relational test triples")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--setting", default="both", choices=("raw", "filter", "both"))
    p.add_argument("--max-queries", type=int, help="cap the number of test triples")
    p.add_argument("--dump-ranks", help="write per-query ranks to this path")
    p.add_argument("--format", default="csv", choices=("csv", "table"))
    p.add_argument("--out", help="also write the CSV report to this path")

    p = sub.add_parser("probe-transitivity",
                       help="classify the isA closure materialized from training triples")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="csv", choices=("csv", "table"))

    p = sub.add_parser("import-vectors",
                       help="validate an encoder vector file against a dataset")
    p.add_argument("--vectors", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target-dim", type=int,
                   help="reduce to this dimension (writes --out)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the reduced vector file here")

    p = sub.add_parser("inspect-checkpoint", help="print checkpoint metadata")
    p.add_argument("--ckpt", required=True)

    p = sub.add_parser("benchmark",
                       help="train plus full evaluation, writing report CSVs")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--vectors", help="concept vector file for PRE init")
    p.add_argument("--subsample", type=float, help="fraction of every split to keep")
    p.add_argument("--max-queries", type=int, help="cap link-prediction queries")
    p.add_argument("--out-dir", required=True, help="directory for report files")
    _add_config_flags(p)

    p = sub.add_parser("make-synth", help="generate a synthetic dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--instances", type=int, default=500)
    p.add_argument("--concepts", type=int, default=20)
    p.add_argument("--relations", type=int, default=5)
    return parser


def _cmd_train(args) -> int:
    config = resolve_config(args.config, _config_overrides(args))
    dataset = load_dataset(args.data, expect_stats=_parse_stats(args.expect_stats))
    if args.subsample:
        dataset = subsample_dataset(dataset, args.subsample, config.seed)
    dataset = with_generated_negatives(dataset, seed=config.seed)

    concept_vecs = None
    initial_state = None
    if args.resume:
        initial_state = load_checkpoint(args.resume)
        initial_state.config = config
    elif config.init == "PRE":
        if not args.vectors:
            raise OntospaceError("PRE init requires --vectors")
        concept_vecs = load_concept_vectors(
            args.vectors, dataset.vocabulary.n_concepts, config.d, config.seed)

    state, history = train(
        dataset, config,
        concept_vecs=concept_vecs,
        initial_state=initial_state,
        log_path=args.log,
        checkpoint_path=args.out,
        valid_metric_fn=make_valid_metric(config, dataset),
    )
    last = history[-1] if history else None
    if last is not None:
        print(f"trained {len(history)} epochs; "
              f"final loss {last.loss.total:.4f} "
              f"(rel {last.loss.rel:.4f}, ins {last.loss.ins:.4f}, sub {last.loss.sub:.4f})",
              file=sys.stderr)
    if args.out:
        print(f"checkpoint written to {args.out}", file=sys.stderr)
    return 0


def _cmd_eval_classify(args) -> int:
    state = load_checkpoint(args.ckpt)
    dataset = with_generated_negatives(load_dataset(args.data), seed=args.seed)
    table = ev.tune_thresholds(state, dataset)
    reports = ev.classify(state, table, dataset, split=args.split)
    text = ev.classification_csv(reports) if args.format == "csv" \
        else ev.classification_table(reports)
    print(text, end="" if text.endswith("\n") else "\n")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(ev.classification_csv(reports))
    return 0


def _cmd_eval_link(args) -> int:
    state = load_checkpoint(args.ckpt)
    dataset = load_dataset(args.data)
    truth = build_truth_index(dataset)
    report = ev.link_predict(state, dataset.relational["test"], truth,
                             setting=args.setting,
                             collect_ranks=bool(args.dump_ranks),
                             max_queries=args.max_queries)
    text = ev.ranking_csv(report) if args.format == "csv" else ev.ranking_table(report)
    print(text, end="" if text.endswith("\n") else "\n")
    if args.dump_ranks:
        ev.write_rank_dump(args.dump_ranks, report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(ev.ranking_csv(report))
    return 0


def _cmd_probe_transitivity(args) -> int:
    state = load_checkpoint(args.ckpt)
    dataset = with_generated_negatives(load_dataset(args.data), seed=args.seed)
    table = ev.tune_thresholds(state, dataset)
    report = ev.transitivity_probe(state, table, dataset)
    if args.format == "csv":
        print(transitivity_csv(report), end="")
    else:
        def cell(x):
            return "undefined" if x is None else f"{x:.4f}"

        print(f"InstanceOf closure : {cell(report.instance_of_fraction)} "
              f"over {report.instance_of_total} derived")
        print(f"SubClassOf closure : {cell(report.sub_class_of_fraction)} "
              f"over {report.sub_class_of_total} derived")
    return 0


def _cmd_import_vectors(args) -> int:
    dataset = load_dataset(args.data)
    count, dim, ids, _ = read_concept_vector_file(args.vectors)
    if (ids >= dataset.vocabulary.n_concepts).any():
        raise OntospaceError("vector file references unknown concept ids")
    print(f"{count} vectors of dimension {dim}; "
          f"covers {count}/{dataset.vocabulary.n_concepts} concepts", file=sys.stderr)
    if args.target_dim:
        if not args.out:
            raise OntospaceError("--target-dim requires --out")
        reduced = load_concept_vectors(args.vectors, dataset.vocabulary.n_concepts,
                                       args.target_dim, args.seed)
        write_concept_vector_file(args.out, np.arange(len(reduced)), reduced)
        print(f"reduced file written to {args.out}", file=sys.stderr)
    return 0


def _cmd_inspect_checkpoint(args) -> int:
    info = describe_checkpoint(args.ckpt)
    print(json.dumps(info, indent=2, default=str))
    return 0


def _cmd_benchmark(args) -> int:
    config = resolve_config(args.config, _config_overrides(args))
    dataset = load_dataset(args.data)
    concept_vecs = None
    if config.init == "PRE":
        if not args.vectors:
            raise OntospaceError("PRE init requires --vectors")
        concept_vecs = load_concept_vectors(
            args.vectors, dataset.vocabulary.n_concepts, config.d, config.seed)
    result = run_benchmark(dataset, config, concept_vecs=concept_vecs,
                           subsample=args.subsample,
                           link_max_queries=args.max_queries,
                           out_dir=args.out_dir)
    print(ev.classification_table(result.classification))
    if result.ranking is not None:
        print()
        print(ev.ranking_table(result.ranking))
    print(f"\ntrain {result.train_seconds:.1f}s, eval {result.eval_seconds:.1f}s; "
          f"reports in {args.out_dir}", file=sys.stderr)
    return 0


def _cmd_make_synth(args) -> int:
    spec = SynthSpec(seed=args.seed, n_instances=args.instances,
                     n_concepts=args.concepts, n_relations=args.relations)
    dataset = generate_ontology(spec)
    save_dataset(dataset, args.out)
    print(f"synthetic dataset written to {args.out}", file=sys.stderr)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval-classify": _cmd_eval_classify,
    "eval-link": _cmd_eval_link,
    "probe-transitivity": _cmd_probe_transitivity,
    "import-vectors": _cmd_import_vectors,
    "inspect-checkpoint": _cmd_inspect_checkpoint,
    "benchmark": _cmd_benchmark,
    "make-synth": _cmd_make_synth,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except OntospaceError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
