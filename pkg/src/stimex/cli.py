"""Command-line interface for the full pipeline.

Subcommands: validate, stats, clauses extract, clauses eval, split, train,
predict, eval, errors, report.  Predictions are stored under ``pred_iob`` /
``pred_clauses`` and never overwrite gold fields.  All randomness is driven
by explicit seeds, so identical invocations produce identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from stimex import models
from stimex.clause_extract import DEFAULT_CLAUSE_LABELS, extract_clauses
from stimex.corpus import (
    ClauseAnnotation,
    CorpusError,
    Instance,
    compute_stats,
    format_stats_csv,
    iob_to_spans,
    load_corpus,
    save_corpus,
    split_corpus,
)
from stimex.error_analysis import classify_corpus, format_errors_csv
from stimex.evaluation import (
    MatchMode,
    SPAN_MODES,
    clause_alignment,
    clause_match_prf,
    clause_prf,
    format_eval_csv,
    span_prf,
)
from stimex.mapping import clauses_to_tokens, tokens_to_clauses
from stimex.parsetree import BracketParseError, ConstTree, parse_bracket


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _by_dataset(instances: Sequence[Instance]) -> dict[str, list[Instance]]:
    groups: dict[str, list[Instance]] = {}
    for inst in instances:
        groups.setdefault(inst.dataset, []).append(inst)
    return groups


def _trees_for(instances: Sequence[Instance], trees_path: str | None) -> list[ConstTree]:
    """One tree per instance, from a line-aligned sidecar file or the parse field."""
    if trees_path:
        lines = [ln for ln in Path(trees_path).read_text(encoding="utf-8").splitlines() if ln.strip()]
        if len(lines) != len(instances):
            raise CorpusError(
                f"{trees_path} holds {len(lines)} trees for {len(instances)} instances"
            )
        sources = lines
    else:
        sources = []
        for inst in instances:
            if inst.parse is None:
                raise CorpusError(f"instance {inst.id!r} has no parse and no --trees file given")
            sources.append(inst.parse)
    trees = []
    for inst, text in zip(instances, sources):
        tree = parse_bracket(text)
        if tree.leaf_span.end != len(inst.tokens):
            raise CorpusError(
                f"instance {inst.id!r}: tree has {tree.leaf_span.end} leaves "
                f"but the instance has {len(inst.tokens)} tokens"
            )
        trees.append(tree)
    return trees


def _pred_iob(inst: Instance) -> list[str]:
    """Token-level predictions, mapped from clause predictions if needed."""
    if inst.pred_iob is not None:
        return inst.pred_iob
    if inst.pred_clauses is not None:
        return clauses_to_tokens(
            [c.is_stimulus for c in inst.pred_clauses],
            [c.span for c in inst.pred_clauses],
            len(inst.tokens),
        )
    raise CorpusError(f"instance {inst.id!r} has no predictions (pred_iob or pred_clauses)")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args) -> int:
    instances = load_corpus(args.corpus)
    print(f"ok: {len(instances)} instances")
    return 0


def cmd_stats(args) -> int:
    instances = load_corpus(args.corpus)
    stats = {name: compute_stats(group) for name, group in _by_dataset(instances).items()}
    _emit(format_stats_csv(stats), args.out)
    return 0


def _clause_labels(args) -> frozenset[str]:
    if args.labels:
        return frozenset(lab.strip() for lab in args.labels.split(",") if lab.strip())
    return DEFAULT_CLAUSE_LABELS


def cmd_clauses_extract(args) -> int:
    instances = load_corpus(args.corpus)
    trees = _trees_for(instances, args.trees)
    labels = _clause_labels(args)
    for inst, tree in zip(instances, trees):
        segs = extract_clauses(tree, labels, join=not args.no_join)
        inst.clauses = [ClauseAnnotation(sp, False) for sp in segs.segments]
    save_corpus(instances, args.out)
    print(f"wrote {len(instances)} instances with extracted clauses to {args.out}")
    return 0


def cmd_clauses_eval(args) -> int:
    instances = load_corpus(args.corpus)
    labels = _clause_labels(args)
    pairs: dict[str, list[tuple[Instance, ConstTree]]] = {}
    for inst, tree in zip(instances, _trees_for(instances, args.trees)):
        pairs.setdefault(inst.dataset, []).append((inst, tree))
    header = (
        "dataset,stimuli,anno_exact,anno_left,anno_right,"
        "extract_precision,extract_recall,extract_f1,extr_exact,extr_left,extr_right"
    )
    lines = [header]
    for name, group in sorted(pairs.items()):
        stimuli = [inst.stimulus_spans() for inst, _ in group]
        annotated = []
        for inst, _ in group:
            if inst.clauses is None:
                raise CorpusError(f"instance {inst.id!r} has no clause annotations")
            annotated.append([c.span for c in inst.clauses])
        extracted = [list(extract_clauses(tree, labels).segments) for _, tree in group]
        anno = clause_alignment(stimuli, annotated)
        match = clause_match_prf(extracted, annotated)
        extr = clause_alignment(stimuli, extracted)
        lines.append(
            ",".join(
                [
                    name,
                    str(anno.n_stimuli),
                    str(anno.exact),
                    str(anno.left),
                    str(anno.right),
                    str(match.precision),
                    str(match.recall),
                    str(match.f1),
                    str(extr.exact),
                    str(extr.left),
                    str(extr.right),
                ]
            )
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_split(args) -> int:
    instances = load_corpus(args.corpus)
    ids = [inst.id for inst in instances]
    if len(set(ids)) != len(ids):
        raise CorpusError("instance ids must be unique to write a split file")
    train, dev, test = split_corpus(instances, args.seed)
    payload = {
        "seed": args.seed,
        "train": [i.id for i in train],
        "dev": [i.id for i in dev],
        "test": [i.id for i in test],
    }
    Path(args.out).write_text(json.dumps(payload), encoding="utf-8")
    print(f"split {len(instances)} instances into {len(train)}/{len(dev)}/{len(test)}")
    return 0


def _read_splits(path: str) -> dict:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("train", "dev", "test"):
        if key not in payload:
            raise CorpusError(f"{path}: split file is missing the {key!r} id list")
    return payload


def _select(instances: Sequence[Instance], ids: Sequence[str], path: str) -> list[Instance]:
    by_id = {inst.id: inst for inst in instances}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise CorpusError(f"{path}: split references unknown instance ids: {missing[:5]}")
    return [by_id[i] for i in ids]


def _load_config(args) -> models.TrainConfig:
    values = {}
    if getattr(args, "config", None):
        values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(values, dict):
            raise CorpusError(f"{args.config}: training config must be a JSON object")
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed  # flags beat the config file
    return models.TrainConfig.from_dict(values)


def cmd_train(args) -> int:
    instances = load_corpus(args.corpus)
    splits = _read_splits(args.splits)
    train_insts = _select(instances, splits["train"], args.splits)
    dev_insts = _select(instances, splits["dev"], args.splits)
    config = _load_config(args)
    if args.embeddings:
        embeddings = models.EmbeddingTable.load_text(args.embeddings)
    else:
        embeddings = models.EmbeddingTable.random(
            models.vocabulary(train_insts), config.embedding_dim, config.seed
        )
    trained = models.train(args.arch, train_insts, dev_insts, embeddings, config)
    models.save_checkpoint(trained, args.checkpoint)
    best = max(h["dev_metric"] for h in trained.history)
    print(
        f"trained {args.arch} for {len(trained.history)} epochs "
        f"(best dev {config.selection_metric} {best:.4f}); checkpoint at {args.checkpoint}"
    )
    return 0


def cmd_predict(args) -> int:
    instances = load_corpus(args.corpus)
    if args.splits:
        splits = _read_splits(args.splits)
        if args.subset == "all":
            ids = splits["train"] + splits["dev"] + splits["test"]
        else:
            ids = splits[args.subset]
        instances = _select(instances, ids, args.splits)
    trained = models.load_checkpoint(args.checkpoint)
    for inst in instances:
        if trained.architecture == "sl":
            inst.pred_iob = models.sl_predict(trained, inst)
        elif trained.architecture == "icc":
            spans = models.clause_spans(inst)
            flags = [
                models.icc_predict(trained, inst.tokens[sp.start : sp.end]) for sp in spans
            ]
            inst.pred_clauses = [ClauseAnnotation(sp, f) for sp, f in zip(spans, flags)]
        else:
            spans = models.clause_spans(inst)
            flags = models.jcc_predict(trained, inst)
            inst.pred_clauses = [ClauseAnnotation(sp, f) for sp, f in zip(spans, flags)]
    save_corpus(instances, args.out)
    print(f"wrote predictions for {len(instances)} instances to {args.out}")
    return 0


def cmd_eval(args) -> int:
    instances = load_corpus(args.corpus)
    modes = list(SPAN_MODES) + [MatchMode.CLAUSE] if args.mode == "all" else [MatchMode(args.mode)]
    rows = []
    for name, group in sorted(_by_dataset(instances).items()):
        gold_spans = [inst.stimulus_spans() for inst in group]
        pred_spans = [iob_to_spans(_pred_iob(inst)) for inst in group]
        for mode in modes:
            if mode is MatchMode.CLAUSE:
                gold_flags, pred_flags = [], []
                for inst in group:
                    spans = models.clause_spans(inst)
                    gold_flags.append(tokens_to_clauses(inst.iob, spans))
                    pred_flags.append(tokens_to_clauses(_pred_iob(inst), spans))
                rows.append((name, args.model, mode, clause_prf(pred_flags, gold_flags)))
            else:
                rows.append((name, args.model, mode, span_prf(pred_spans, gold_spans, mode)))
    _emit(format_eval_csv(rows), args.out)
    return 0


def cmd_errors(args) -> int:
    instances = load_corpus(args.corpus)
    counts = {}
    for name, group in sorted(_by_dataset(instances).items()):
        gold = [inst.stimulus_spans() for inst in group]
        pred = [iob_to_spans(_pred_iob(inst)) for inst in group]
        counts[f"{args.model}/{name}"] = classify_corpus(gold, pred)
    _emit(format_errors_csv(counts), args.out)
    return 0


def _markdown_table(csv_text: str) -> str:
    rows = [line.split(",") for line in csv_text.strip().splitlines()]
    if not rows:
        return "(empty)\n"
    widths = [max(len(r[i]) if i < len(r) else 0 for r in rows) for i in range(len(rows[0]))]
    out = []
    for k, row in enumerate(rows):
        cells = [c.ljust(widths[i]) for i, c in enumerate(row)]
        out.append("| " + " | ".join(cells) + " |")
        if k == 0:
            out.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    sections = []
    for title, path in (
        ("Corpus statistics", args.stats),
        ("Evaluation", args.eval),
        ("Error analysis", args.errors),
    ):
        if path:
            text = Path(path).read_text(encoding="utf-8")
            sections.append(f"## {title}\n\n{_markdown_table(text)}")
    report = "# Stimulus detection report\n\n" + "\n".join(sections)
    Path(args.out).write_text(report, encoding="utf-8")
    print(f"wrote report to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stimex", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus file against the format")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="corpus statistics per dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("clauses", help="clause extraction and its evaluation")
    clauses_sub = p.add_subparsers(dest="clauses_command", required=True)

    pe = clauses_sub.add_parser("extract", help="write extracted clause spans into the corpus")
    pe.add_argument("--corpus", required=True)
    pe.add_argument("--trees", help="line-aligned sidecar file of bracketed trees")
    pe.add_argument("--labels", help="comma-separated clause node labels")
    pe.add_argument("--no-join", action="store_true", help="skip the segment join loop")
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_clauses_extract)

    pv = clauses_sub.add_parser("eval", help="alignment of stimuli and extraction vs annotation")
    pv.add_argument("--corpus", required=True)
    pv.add_argument("--trees")
    pv.add_argument("--labels")
    pv.add_argument("--out")
    pv.set_defaults(func=cmd_clauses_eval)

    p = sub.add_parser("split", help="write a deterministic 80/10/10 split id file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--arch", choices=list(models.ARCHITECTURES), required=True)
    p.add_argument("--embeddings", help="text embedding file; random table when omitted")
    p.add_argument("--config", help="JSON file mirroring TrainConfig fields")
    p.add_argument("--seed", type=int, help="overrides the config file seed")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="store model predictions in a corpus copy")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--splits")
    p.add_argument("--subset", choices=["train", "dev", "test", "all"], default="all")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate stored predictions")
    p.add_argument("--corpus", required=True)
    p.add_argument(
        "--mode",
        choices=[m.value for m in MatchMode] + ["all"],
        default="all",
    )
    p.add_argument("--model", default="model", help="model name written into the rows")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("errors", help="boundary-error taxonomy counts")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", default="model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("report", help="combine CSV outputs into a Markdown report")
    p.add_argument("--stats")
    p.add_argument("--eval")
    p.add_argument("--errors")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, BracketParseError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
