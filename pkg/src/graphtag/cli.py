"""Command-line surface: convert, train, eval, ablate, demo.

Exit codes: 0 success, 1 usage errors, 2 data errors, 3 numeric
failures. Every failure prints a single stderr line of the form
``error: <category>: <message>``.

Run configs are flat ``key = value`` text files; '#' starts a comment.
Hyperparameter keys keep their familiar table names
(word_embedding_size, first_gcn_layer_size, second_gcn_layer_size,
gcn_learning_rate, gcn_dropout, epochs, activation).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .graphs import build_dependency_graphs
from .ingest import (
    Corpus,
    ParseError,
    first_ancestor_labels,
    parse_bracket_forest,
    parse_conllu,
    parse_role_columns,
    read_jsonl,
    sentence_from_words,
    write_jsonl,
)
from .metrics import spans_from_labels
from .model import Model, ModelConfig, config_with
from .train import NumericError, RunConfig, evaluate, train_model

__all__ = ["main", "UsageError", "DataError", "parse_run_config"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# Run config files.

_BOOL_KEYS = ("use_dep", "use_syn", "use_sem", "use_gating")


def _to_bool(key: str, value: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise UsageError(f"config key {key!r}: expected a boolean, got {value!r}")


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"config key {key!r}: expected an integer, got {value!r}") from None


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise UsageError(f"config key {key!r}: expected a number, got {value!r}") from None


def parse_run_config(path) -> RunConfig:
    """Parse a flat key=value run config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror or e}") from None
    run = RunConfig()
    model_kwargs: dict = {}
    layer1: int | None = None
    layer2: int | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {line_no}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "seed":
            run.seed = _to_int(key, value)
        elif key == "optimizer":
            run.optimizer = value
        elif key == "beta1":
            run.beta1 = _to_float(key, value)
        elif key == "beta2":
            run.beta2 = _to_float(key, value)
        elif key == "adam_eps":
            run.adam_eps = _to_float(key, value)
        elif key == "train":
            run.train_path = value
        elif key == "dev":
            run.dev_path = value
        elif key == "test":
            run.test_path = value
        elif key == "checkpoint":
            run.checkpoint_path = value
        elif key == "metrics":
            run.metrics_path = value
        elif key == "early_stop_f1":
            run.early_stop_f1 = _to_float(key, value)
        elif key == "word_embedding_size":
            model_kwargs["embed_dim"] = _to_int(key, value)
        elif key == "first_gcn_layer_size":
            layer1 = _to_int(key, value)
        elif key == "second_gcn_layer_size":
            layer2 = _to_int(key, value)
        elif key == "gcn_learning_rate":
            model_kwargs["learning_rate"] = _to_float(key, value)
        elif key == "gcn_dropout":
            model_kwargs["dropout"] = _to_float(key, value)
        elif key == "epochs":
            model_kwargs["epochs"] = _to_int(key, value)
        elif key == "activation":
            if value.lower() != "relu":
                raise UsageError(f"config key 'activation': only relu is supported, got {value!r}")
        elif key == "encoder":
            model_kwargs["encoder"] = value
        elif key == "fusion":
            model_kwargs["fusion"] = value
        elif key in _BOOL_KEYS:
            model_kwargs[key] = _to_bool(key, value)
        else:
            raise UsageError(f"config line {line_no}: unknown key {key!r}")
    if (layer1 is None) != (layer2 is None):
        raise UsageError("config: first_gcn_layer_size and second_gcn_layer_size go together")
    if layer1 is not None:
        model_kwargs["gcn_layer_dims"] = (layer1, layer2)
    run.model = replace(ModelConfig(), **model_kwargs)
    try:
        run.validate()
    except ValueError as e:
        raise UsageError(str(e)) from None
    return run


# ---------------------------------------------------------------------------
# IO helpers.


def _read_corpus(path) -> Corpus:
    try:
        return read_jsonl(path)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror or e}") from None
    except ParseError as e:
        raise DataError(f"{path}: {e}") from None


def _read_text(path, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {what} {path}: {e.strerror or e}") from None


def _load_model(path) -> Model:
    try:
        return Model.load(path)
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e.strerror or e}") from None
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        raise DataError(f"checkpoint {path}: {e}") from None


def _write_json(path, payload) -> None:
    p = Path(path)
    if p.parent != Path(""):
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _packs(model: Model, corpus: Corpus):
    try:
        return [model.pack(s) for s in corpus.sentences]
    except ValueError as e:
        raise DataError(str(e)) from None


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_convert(args) -> int:
    if args.format != "conllu":
        raise UsageError(f"unknown --format {args.format!r} (expected conllu)")
    try:
        parsed = parse_conllu(_read_text(args.input, "input"))
    except ParseError as e:
        raise DataError(f"{args.input}: {e}") from None

    syn_per_sentence: list[list[str | None]] | None = None
    if args.trees:
        try:
            forest = parse_bracket_forest(_read_text(args.trees, "trees"))
        except ParseError as e:
            raise DataError(f"{args.trees}: {e}") from None
        if len(forest) != len(parsed):
            raise DataError(
                f"{args.trees}: {len(forest)} trees for {len(parsed)} sentences"
            )
        syn_per_sentence = []
        for i, (tree, sent) in enumerate(zip(forest, parsed)):
            leaves = tree.leaf_words()
            if leaves != sent.words:
                raise DataError(
                    f"{args.trees}: sentence {i}: tree words {leaves!r} do not match {sent.words!r}"
                )
            syn_per_sentence.append(first_ancestor_labels(tree))

    roles_per_sentence: list[list[str | None]] | None = None
    if args.roles:
        roles_per_sentence = parse_role_columns(_read_text(args.roles, "roles"))
        if len(roles_per_sentence) != len(parsed):
            raise DataError(
                f"{args.roles}: {len(roles_per_sentence)} role rows for {len(parsed)} sentences"
            )
        for i, (roles, sent) in enumerate(zip(roles_per_sentence, parsed)):
            if len(roles) != len(sent.words):
                raise DataError(
                    f"{args.roles}: sentence {i}: {len(roles)} roles for {len(sent.words)} words"
                )

    sentences = []
    for i, sent in enumerate(parsed):
        try:
            sentences.append(
                sentence_from_words(
                    sent.words,
                    sent.pos,
                    sent.heads,
                    syn=syn_per_sentence[i] if syn_per_sentence else None,
                    sem=roles_per_sentence[i] if roles_per_sentence else None,
                    dep_source="conllu",
                )
            )
        except ValueError as e:
            raise DataError(f"{args.input}: sentence {i}: {e}") from None
    corpus = Corpus.from_sentences(sentences)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(corpus, out)
    print(f"sentences={len(corpus)} words={corpus.n_words} pos_tags={len(corpus.pos_tagset)}")
    return EXIT_OK


def cmd_train(args) -> int:
    run = parse_run_config(args.config)
    if args.seed is not None:
        run.seed = args.seed
    if args.out is not None:
        run.metrics_path = args.out
    if run.train_path is None:
        raise UsageError("config must set a train path")
    train_corpus = _read_corpus(run.train_path)
    dev_corpus = _read_corpus(run.dev_path) if run.dev_path else None
    try:
        result = train_model(run, train_corpus, dev_corpus, log=print)
    except ValueError as e:
        raise DataError(str(e)) from None
    ckpt = Path(run.checkpoint_path)
    if ckpt.parent != Path(""):
        ckpt.parent.mkdir(parents=True, exist_ok=True)
    result.model.save(ckpt)
    _write_json(run.metrics_path, result.metrics)
    print(f"best epoch {result.best_epoch}; checkpoint {ckpt}; metrics {run.metrics_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.checkpoint)
    corpus = _read_corpus(args.test)
    unknown = [t for t in corpus.pos_tagset if t not in model.alphabet.pos_tagset]
    if unknown:
        raise DataError(f"tagset mismatch: unknown POS tag {unknown[0]!r} in {args.test}")
    packs = _packs(model, corpus)
    scores = evaluate(model, packs)
    payload = {
        "cws": {
            "precision": scores["cws"].precision,
            "recall": scores["cws"].recall,
            "f1": scores["cws"].f1,
        },
        "joint": {
            "precision": scores["joint"].precision,
            "recall": scores["joint"].recall,
            "f1": scores["joint"].f1,
        },
        "sentences": len(corpus),
        "words": corpus.n_words,
    }
    if args.out:
        _write_json(args.out, payload)
    print(f"cws: p={payload['cws']['precision']:.4f} r={payload['cws']['recall']:.4f} f1={payload['cws']['f1']:.4f}")
    print(f"joint: p={payload['joint']['precision']:.4f} r={payload['joint']['recall']:.4f} f1={payload['joint']['f1']:.4f}")
    return EXIT_OK


_COMPONENT_ROWS = (
    ("baseline", dict(use_dep=False, use_syn=False, use_sem=False)),
    ("+dep", dict(use_dep=True, use_syn=False, use_sem=False)),
    ("+dep+syn", dict(use_dep=True, use_syn=True, use_sem=False)),
    ("+dep+syn+sem", dict(use_dep=True, use_syn=True, use_sem=True)),
)

_FUSION_ROWS = (
    ("no-gate/sum", dict(use_gating=False, fusion="sum")),
    ("no-gate/concat", dict(use_gating=False, fusion="concat")),
    ("gate/sum", dict(use_gating=True, fusion="sum")),
    ("gate/concat", dict(use_gating=True, fusion="concat")),
)


def cmd_ablate(args) -> int:
    run = parse_run_config(args.config)
    if args.seed is not None:
        run.seed = args.seed
    if run.train_path is None:
        raise UsageError("config must set a train path")
    if args.repeats < 1:
        raise UsageError(f"--repeats must be at least 1, got {args.repeats}")
    grid = _COMPONENT_ROWS if args.grid == "components" else _FUSION_ROWS
    train_corpus = _read_corpus(run.train_path)
    dev_corpus = _read_corpus(run.dev_path) if run.dev_path else None

    out_dir = Path(args.out_dir) if args.out_dir else Path(args.out).parent / "ablate"
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for row_id, (label, changes) in enumerate(grid, start=1):
        try:
            cfg = config_with(run.model, **changes)
        except ValueError as e:
            raise UsageError(f"row {label!r}: {e}") from None
        cws_f1s, joint_f1s = [], []
        row_model = None
        for r in range(args.repeats):
            row_run = replace(run, model=cfg, seed=run.seed + r)
            try:
                result = train_model(row_run, train_corpus, dev_corpus)
            except ValueError as e:
                raise DataError(str(e)) from None
            dev_packs = _packs(
                result.model, dev_corpus if dev_corpus is not None else train_corpus
            )
            scores = evaluate(result.model, dev_packs)
            cws_f1s.append(scores["cws"].f1)
            joint_f1s.append(scores["joint"].f1)
            if r == 0:
                row_model = result.model
        ckpt_path = out_dir / f"row{row_id}_{label.replace('/', '_').replace('+', '_')}.json"
        row_model.save(ckpt_path)
        rows.append(
            {
                "id": row_id,
                "label": label,
                "use_dep": cfg.use_dep,
                "use_syn": cfg.use_syn,
                "use_sem": cfg.use_sem,
                "use_gating": cfg.use_gating,
                "fusion": cfg.fusion,
                "cws_f1": sum(cws_f1s) / len(cws_f1s),
                "joint_f1": sum(joint_f1s) / len(joint_f1s),
                "param_count": row_model.num_params(),
                "checkpoint": str(ckpt_path),
            }
        )
    payload = {"grid": args.grid, "seed": run.seed, "repeats": args.repeats, "rows": rows}
    _write_json(args.out, payload)
    for row in rows:
        print(
            f"{row['id']} {row['label']:<16} params={row['param_count']:<7} "
            f"cws_f1={row['cws_f1']:.4f} joint_f1={row['joint_f1']:.4f}"
        )
    print(f"table written to {args.out}")
    return EXIT_OK


def cmd_demo(args) -> int:
    baseline = _load_model(args.baseline)
    graph = _load_model(args.graph)
    corpus = _read_corpus(args.sentence)
    if not corpus.sentences:
        raise DataError(f"{args.sentence}: no sentences")
    sentence = corpus.sentences[0]

    def render(model: Model) -> str:
        pack = model.pack(sentence)
        labels = [model.alphabet.label(i) for i in model.predict(pack)]
        return " ".join(
            f"{''.join(sentence.chars[s:e])}/{tag}"
            for (s, e), tag in spans_from_labels(labels)
        )

    _, dep_out = build_dependency_graphs(
        len(sentence.chars), sentence.words, sentence.heads
    )
    edges = sorted(dep_out.edges)
    edge_text = (
        " ".join(f"{sentence.chars[i]}→{sentence.chars[j]}" for i, j in edges)
        if edges
        else "(none)"
    )

    try:
        baseline_line = render(baseline)
        graph_line = render(graph)
    except ValueError as e:
        raise DataError(str(e)) from None
    print(f"input: {''.join(sentence.chars)}")
    print(f"dependency edges (head→dependent): {edge_text}")
    print(f"baseline: {baseline_line}")
    print(f"graph:    {graph_line}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Wiring.


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="graphtag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert annotation files to JSONL")
    p.add_argument("--format", default="conllu")
    p.add_argument("--input", required=True)
    p.add_argument("--trees", default=None)
    p.add_argument("--roles", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="override the metrics path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a JSONL test set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and score an ablation grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", choices=("components", "fusion"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-dir", default=None, help="directory for row checkpoints")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("demo", help="compare two checkpoints on one sentence")
    p.add_argument("--baseline", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--sentence", required=True)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: usage: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"error: data: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"error: numeric: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
