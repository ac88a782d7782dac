"""Command-line entry point.

    claimgraph validate     --corpus FILE [--json]
    claimgraph stats        --corpus FILE [--json]
    claimgraph filter       --input FILE [--keywords ...] [--json]
    claimgraph encode-attrs --corpus FILE --out FILE
    claimgraph decode-attrs --corpus FILE --out FILE
    claimgraph split        --corpus FILE --out-prefix P [--fractions a,b,c] [--seed N]
    claimgraph train        --corpus FILE [--val FILE] --out CKPT [hyperparameters...]
    claimgraph eval         --gold FILE (--pred FILE | --checkpoint CKPT) [--json]
    claimgraph predict      --checkpoint CKPT (--corpus FILE | --input FILE) [--scores]
    claimgraph gradcheck    [--eps 1e-4] [--dim 16] [--sentences 2] [--seed N]
    claimgraph serve        --checkpoint CKPT [--queue FILE] [--store FILE] ...

Exit codes: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen
from .corpus import (
    CLAIM_KEYWORDS,
    Corpus,
    CorpusFormatError,
    attrs_as_ents_decode,
    attrs_as_ents_encode,
    corpus_stats,
    keyword_filter,
    load_corpus,
    parse_collapsed_label,
    save_corpus,
    sentence_from_json,
    sentence_to_json,
    split_corpus,
)
from .metrics import MatchCriteria, report_to_json_str, score_corpus
from .model.network import InferenceConfig, predict
from .model.params import load_checkpoint_file, save_checkpoint_file
from .model.providers import (
    PrecomputedEmbeddingProvider,
    TokenLookupProvider,
)
from .schema import validate_schema, validate_structural
from .training import TrainConfig, grad_check, train


class CliError(RuntimeError):
    pass


def _load(path) -> Corpus:
    try:
        return load_corpus(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file")
    except CorpusFormatError as exc:
        lines = "\n".join(f"{path}:{ln}: {msg}" for ln, msg in exc.errors)
        raise CliError(f"failed to parse {path}:\n{lines}")


def cmd_validate(args) -> int:
    """Structural + schema reports per sentence; exit 1 iff any errors.

    Parses leniently so that rule violations are reported as validation
    results rather than parse failures.
    """
    path = Path(args.corpus)
    if not path.exists():
        raise CliError(f"{args.corpus}: no such file")
    total_errors = 0
    count = 0
    results = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        count += 1
        try:
            obj = json.loads(line)
            sent = sentence_from_json(obj, check_structure=False)
        except (json.JSONDecodeError, ValueError) as exc:
            total_errors += 1
            results.append((f"line {lineno}", [f"error parse: {exc}"]))
            continue
        report = validate_structural(sent.graph)
        if report.ok:
            report = validate_schema(sent.graph)
        total_errors += len(report.errors)
        results.append((sent.id, report.lines()))
    if args.json:
        print(json.dumps({sid: lines for sid, lines in results}, indent=2))
    else:
        for sid, lines in results:
            for line in lines:
                print(f"{sid}: {line}")
        print(f"{count} sentences, {total_errors} errors")
    return 1 if total_errors else 0


def cmd_stats(args) -> int:
    stats = corpus_stats(_load(args.corpus))
    if args.json:
        print(json.dumps(stats.to_json(), indent=2))
    else:
        print(stats.to_text())
    return 0


def cmd_filter(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise CliError(f"{args.input}: no such file")
    sentences = [line.split() for line in path.read_text(encoding="utf-8").splitlines()
                 if line.strip()]
    keywords = args.keywords if args.keywords else list(CLAIM_KEYWORDS)
    matches = keyword_filter(sentences, keywords)
    if args.json:
        print(json.dumps([{"index": m.index, "tokens": list(m.tokens),
                           "keywords": list(m.keywords)} for m in matches]))
    else:
        for m in matches:
            print(f"{m.index}\t{' '.join(m.keywords)}\t{' '.join(m.tokens)}")
    return 0


def cmd_encode_attrs(args) -> int:
    corpus = _load(args.corpus)
    lines = []
    for sent in corpus:
        collapsed = attrs_as_ents_encode(sent.graph)
        obj = {"id": sent.meta.id, "source": sent.meta.source, "split": sent.meta.split,
               "tokens": list(collapsed.tokens),
               "entities": [{"type": str(label), "start": span.start, "end": span.end}
                            for span, label in collapsed.entities],
               "relations": [{"type": r.rtype.value, "head": r.head, "tail": r.tail}
                             for r in collapsed.relations],
               "attributes": []}
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    Path(args.out).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    print(f"wrote {len(lines)} collapsed sentences to {args.out}")
    return 0


def cmd_decode_attrs(args) -> int:
    path = Path(args.corpus)
    if not path.exists():
        raise CliError(f"{args.corpus}: no such file")
    out_lines = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            for ent in obj.get("entities", []):
                label = parse_collapsed_label(ent["type"])
                ent["type"] = label.etype.value
                if label.attrs:
                    obj.setdefault("attributes", []).append(
                        {"entity": obj["entities"].index(ent),
                         "types": [t.value for t in label.attrs]})
            sent = sentence_from_json(obj)
        except ValueError as exc:
            raise CliError(f"{args.corpus}:{lineno}: {exc}")
        out_lines.append(json.dumps(sentence_to_json(sent),
                                    ensure_ascii=False, separators=(",", ":")))
    Path(args.out).write_text("".join(l + "\n" for l in out_lines), encoding="utf-8")
    print(f"wrote {len(out_lines)} decoded sentences to {args.out}")
    return 0


def cmd_split(args) -> int:
    corpus = _load(args.corpus)
    fractions = tuple(float(x) for x in args.fractions.split(","))
    if len(fractions) != 3:
        raise CliError("--fractions needs three comma-separated numbers")
    try:
        parts = split_corpus(corpus, seed=args.seed, fractions=fractions)
    except ValueError as exc:
        raise CliError(str(exc))
    for name, part in zip(("train", "val", "test"), parts):
        out = f"{args.out_prefix}.{name}.jsonl"
        save_corpus(part, out)
        print(f"{out}: {len(part)} sentences")
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.learning_rate, warmup_fraction=args.warmup_fraction,
        weight_decay=args.weight_decay, max_grad_norm=args.max_grad_norm,
        dropout=args.dropout, seed=args.seed, dim=args.dim,
        max_span_size=args.max_span_size, span_repr_mode=args.span_repr,
        attribute_filtering=args.attribute_filtering,
        attrs_as_ents=args.attrs_as_ents,
        neg_entity_count=args.neg_entities, neg_relation_count=args.neg_relations,
        attr_threshold=args.attr_threshold, rel_threshold=args.rel_threshold)


def _provider(args, corpus=None, params=None):
    if args.embeddings:
        return PrecomputedEmbeddingProvider.from_file(args.embeddings)
    if params is not None and params.vocab is not None:
        return TokenLookupProvider(params.vocab, params.dim)
    if corpus is None:
        raise CliError("a corpus is needed to build the lookup provider vocabulary")
    train_split = corpus.subset("train")
    return TokenLookupProvider.from_corpus(
        train_split if len(train_split) else corpus, args.dim)


def cmd_train(args) -> int:
    corpus = _load(args.corpus)
    val = _load(args.val) if args.val else None
    config = _train_config(args)
    provider = _provider(args, corpus=corpus)
    params, report = train(corpus, provider, config, val=val,
                           log=lambda msg: print(msg, file=sys.stderr))
    digest = save_checkpoint_file(params, args.out)
    report.checkpoint_path = str(args.out)
    print(f"checkpoint {args.out} ({digest[:12]})")
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json(), indent=2),
                                     encoding="utf-8")
        print(f"report {args.report}")
    return 0


def _inference_config(args, params) -> InferenceConfig:
    echo = params.config_echo.get("train_config", {})
    return InferenceConfig(
        attr_threshold=args.attr_threshold if args.attr_threshold is not None
        else echo.get("attr_threshold", 0.55),
        rel_threshold=args.rel_threshold if args.rel_threshold is not None
        else echo.get("rel_threshold", 0.4),
        max_span_size=echo.get("max_span_size", params.max_span_size),
        span_repr_mode=echo.get("span_repr_mode", "attention"),
        attribute_filtering=echo.get("attribute_filtering", "cascaded"))


def cmd_eval(args) -> int:
    gold = _load(args.gold)
    criteria = MatchCriteria(relation_strict=not args.relaxed_relations)
    if args.pred:
        pred_corpus = _load(args.pred)
        predictions = {s.id: s.graph for s in pred_corpus}
    else:
        if not args.checkpoint:
            raise CliError("eval needs --pred or --checkpoint")
        params, _ = load_checkpoint_file(args.checkpoint)
        provider = _provider(args, corpus=gold, params=params)
        inference = _inference_config(args, params)
        predictions = {
            s.id: predict(s.graph.tokens, provider, params, inference, sid=s.id).graph
            for s in gold}
    try:
        report = score_corpus(gold, predictions, criteria)
    except ValueError as exc:
        raise CliError(str(exc))
    print(report_to_json_str(report) if args.json else report.to_text())
    return 0


def cmd_predict(args) -> int:
    params, digest = load_checkpoint_file(args.checkpoint)
    inference = _inference_config(args, params)
    provider = _provider(args, params=params)
    outputs = []
    if args.corpus:
        corpus = _load(args.corpus)
        items = [(s.id, list(s.graph.tokens)) for s in corpus]
    else:
        if not args.input:
            raise CliError("predict needs --corpus or --input")
        lines = Path(args.input).read_text(encoding="utf-8").splitlines()
        items = [(f"line{n}", line.split()) for n, line in enumerate(lines, 1)
                 if line.strip()]
    for sid, tokens in items:
        prediction = predict(tokens, provider, params, inference, sid=sid)
        obj = prediction.to_json()
        if not args.scores:
            obj.pop("scores")
        obj = {"id": sid, **obj}
        outputs.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    text = "".join(l + "\n" for l in outputs)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(outputs)} predictions to {args.out} (model {digest[:12]})")
    else:
        sys.stdout.write(text)
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    corpus = datagen.build_toy_corpus(args.sentences)
    provider = TokenLookupProvider.from_corpus(corpus, args.dim)
    from .model.params import STANDARD_ENTITY_LABELS, init_params
    params = init_params(args.dim, args.max_span_size, STANDARD_ENTITY_LABELS,
                         rng, provider=provider)
    errors = grad_check(params, list(corpus), provider, epsilon=args.eps)
    worst = max(errors.values())
    for name in sorted(errors):
        print(f"{name:>16}  {errors[name]:.3e}")
    print(f"{'worst':>16}  {worst:.3e}  (tolerance {args.tolerance:g})")
    return 0 if worst < args.tolerance else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, config_from_env, create_app

    config = config_from_env(
        checkpoint_path=args.checkpoint, store_path=args.store,
        queue_path=args.queue, embeddings_path=args.embeddings,
        no_suggest_splits=tuple(args.no_suggest_splits or ()),
        retrain_epochs=args.retrain_epochs, seed=args.seed, ui_dir=args.ui_dir)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="claimgraph",
        description="Claim knowledge-graph toolkit: validation, corpus tools, "
                    "span-based extraction model, metrics, annotation service.")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap numeric worker threads (BLAS pools)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="corpus label counts and densities")
    p.add_argument("--corpus", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("filter", help="keyword-filter raw sentences (one per line)")
    p.add_argument("--input", required=True)
    p.add_argument("--keywords", nargs="*")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("encode-attrs", help="collapse attributes into entity labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode_attrs)

    p = sub.add_parser("decode-attrs", help="expand collapsed entity labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode_attrs)

    p = sub.add_parser("split", help="deterministic train/val/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--fractions", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--val")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--embeddings", help="precomputed embedding file")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=5e-5)
    p.add_argument("--warmup-fraction", type=float, default=0.1)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--max-grad-norm", type=float, default=1.0)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--max-span-size", type=int, default=20)
    p.add_argument("--span-repr", choices=("attention", "maxpool"), default="attention")
    p.add_argument("--attribute-filtering", choices=("cascaded", "unfiltered"),
                   default="cascaded")
    p.add_argument("--attrs-as-ents", action="store_true")
    p.add_argument("--neg-entities", type=int, default=100)
    p.add_argument("--neg-relations", type=int, default=100)
    p.add_argument("--attr-threshold", type=float, default=0.55)
    p.add_argument("--rel-threshold", type=float, default=0.4)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred")
    p.add_argument("--checkpoint")
    p.add_argument("--embeddings")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--attr-threshold", type=float)
    p.add_argument("--rel-threshold", type=float)
    p.add_argument("--relaxed-relations", action="store_true",
                   help="match relations by span only, ignoring endpoint entity types")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict graphs for sentences")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus")
    p.add_argument("--input", help="raw sentences, one per line, whitespace-tokenized")
    p.add_argument("--embeddings")
    p.add_argument("--out")
    p.add_argument("--scores", action="store_true")
    p.add_argument("--attr-threshold", type=float)
    p.add_argument("--rel-threshold", type=float)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--sentences", type=int, default=2)
    p.add_argument("--max-span-size", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("serve", help="run the annotation suggestion service")
    p.add_argument("--checkpoint", help="model checkpoint (or $CLAIMGRAPH_CKPT)")
    p.add_argument("--store", help="append-only annotation store (or $CLAIMGRAPH_STORE)")
    p.add_argument("--queue", help="unlabeled sentences to annotate")
    p.add_argument("--embeddings")
    p.add_argument("--no-suggest-splits", nargs="*", metavar="SPLIT",
                   help="splits for which /suggest is disabled (e.g. test)")
    p.add_argument("--retrain-epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ui-dir", help="built frontend directory to serve at /ui")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "threads", None):
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                return args.func(args)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
