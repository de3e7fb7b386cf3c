"""Command-line interface: one entry point with pipeline subcommands.

Every flag overrides the matching key of the optional INI config file
(``--config`` or the CRFTAG_CONFIG environment variable); outputs are
written atomically; each run logs its effective config hash and seed.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
import traceback
import unicodedata

from . import conllio
from .config import ENV_CONFIG, PipelineConfig, atomic_write_text
from .evaluation import (
    bootstrap_compare,
    collect_classes,
    decode_tag_documents,
    evaluate_conll_files,
    format_conlleval_report,
)
from .harem import export_conll, format_stats, get_scenario, parse_harem, resolve_document
from .tagger import (
    HEAD_CRF,
    HEAD_SOFTMAX,
    OPTIMIZER_ADAM,
    OPTIMIZER_SGD,
    ExternalEmissions,
    SequenceTagger,
    load_model,
    predict,
    read_emissions_file,
    save_model,
)
from .tagscheme import TagSet
from .vocab import (
    ASCII_PUNCTUATION,
    CONTINUATION_PREFIX,
    SubToken,
    TokenizedDocument,
    Vocabulary,
    convert_sentencepiece_vocab,
    pre_tokens_from_words,
    tokenize_text,
    wordpiece_tokenize,
)
from .windowing import SpanConfig, split_spans

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _require(value, name: str):
    if value is None:
        raise UsageError(f"{name} is required (flag or config key)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crftag", description="CRF sequence-labeling pipelines")
    parser.add_argument("--config", help=f"INI config file (default: ${ENV_CONFIG})")
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker thread budget; outputs are identical for any value",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert-vocab", help="rewrite a SentencePiece vocabulary as WordPiece")
    p.add_argument("--input", help="SentencePiece vocab, one piece per line")
    p.add_argument("--output", help="WordPiece vocab to write")
    p.add_argument("--punctuation-file", help="file whose characters form the punctuation set")
    p.set_defaults(func=_cmd_convert_vocab)

    p = sub.add_parser("tokenize", help="pre-tokenize and WordPiece-segment text")
    p.add_argument("--vocab")
    p.add_argument("--input", help="text file, one document per line")
    p.add_argument("--output", help="tokens file to write")
    p.add_argument("--normalize", action="store_true", help="apply NFC normalization first")
    p.set_defaults(func=_cmd_tokenize)

    p = sub.add_parser("split-spans", help="report sliding-window span boundaries")
    p.add_argument("--input", help="tokens file")
    p.add_argument("--output", help="span boundaries file to write")
    p.add_argument("--max-len", type=int)
    p.add_argument("--stride", type=int)
    p.set_defaults(func=_cmd_split_spans)

    p = sub.add_parser("preprocess-harem", help="convert HAREM XML to CoNLL tokens/tags")
    p.add_argument("--input", help="Golden Collection XML file")
    p.add_argument("--scenario", choices=["selective", "total"])
    p.add_argument("--output", help="CoNLL file to write")
    p.add_argument("--stats", help="statistics report to write")
    p.set_defaults(func=_cmd_preprocess_harem)

    p = sub.add_parser("train", help="train the toy tagger on a CoNLL corpus")
    p.add_argument("--train", help="training CoNLL file (token<TAB>tag)")
    p.add_argument("--dev", help="held-out CoNLL file for the final F1 report")
    p.add_argument("--out", help="model checkpoint to write")
    p.add_argument("--vocab")
    p.add_argument("--classes", help="comma-separated entity classes (default: inferred)")
    p.add_argument("--head", choices=[HEAD_CRF, HEAD_SOFTMAX])
    p.add_argument("--optimizer", choices=[OPTIMIZER_SGD, OPTIMIZER_ADAM])
    p.add_argument("--max-len", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--embedding-dim", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr-encoder", type=float)
    p.add_argument("--lr-head", type=float)
    p.add_argument("--warmup-fraction", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--o-tag-bias-init", type=float)
    p.add_argument("--o-tag-loss-weight", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="tag documents with a trained model")
    p.add_argument("--model", help="model checkpoint")
    p.add_argument("--input")
    p.add_argument("--output", help="CoNLL file to write")
    p.add_argument(
        "--format",
        choices=["conll", "text", "tokens"],
        default="conll",
        help="input layout: CoNLL columns, raw text lines, or a tokens file",
    )
    p.add_argument("--emissions", help="external emissions file (external checkpoints only)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="entity-level scores for predictions")
    p.add_argument("--gold", help="gold CoNLL file")
    p.add_argument("--pred", help="predicted CoNLL file")
    p.add_argument("--per-class", action="store_true", help="include per-class lines")
    p.add_argument("--bootstrap", help="second prediction file to compare against")
    p.add_argument("--resamples", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        config = _start(args)
        return args.func(args, config)
    except UsageError as err:
        logger.error("%s", err)
        return EXIT_USAGE
    except (ValueError, OSError) as err:
        logger.error("%s", err)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


def _start(args) -> PipelineConfig:
    config = PipelineConfig.default(args.config)
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    overrides = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("func", "command", "config") and value is not None
    }
    logger.info(
        "run: command=%s config=%s hash=%s seed=%d",
        args.command,
        config.source or "<none>",
        config.hash(overrides),
        _seed(args, config),
    )
    return config


def _seed(args, config: PipelineConfig) -> int:
    return config.get("run", "seed", override=getattr(args, "seed", None), default=13, type=int)


def _cmd_convert_vocab(args, config: PipelineConfig) -> int:
    input_path = _require(config.get("paths", "sp_vocab", override=args.input), "--input")
    output_path = _require(config.get("paths", "vocab", override=args.output), "--output")
    with open(input_path, encoding="utf-8") as fh:
        pieces = [line.rstrip("\n").split("\t")[0] for line in fh if line.strip()]
    punctuation_path = config.get("paths", "punctuation", override=args.punctuation_file)
    if punctuation_path:
        with open(punctuation_path, encoding="utf-8") as fh:
            punctuation = {ch for ch in fh.read() if not ch.isspace()}
    else:
        punctuation = set(ASCII_PUNCTUATION)
    vocab = convert_sentencepiece_vocab(pieces, punctuation)
    vocab.save(output_path)
    logger.info("wrote %d tokens to %s", len(vocab), output_path)
    return EXIT_OK


def _cmd_tokenize(args, config: PipelineConfig) -> int:
    vocab = Vocabulary.load(_require(config.get("paths", "vocab", override=args.vocab), "--vocab"))
    input_path = _require(config.get("paths", "input", override=args.input), "--input")
    output_path = _require(config.get("paths", "output", override=args.output), "--output")
    normalize = config.get("run", "normalize_unicode", override=args.normalize or None, default=False, type=bool)
    lines = []
    with open(input_path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            text = line.rstrip("\n")
            if normalize:
                text = unicodedata.normalize("NFC", text)
            document = tokenize_text(vocab, text, doc_id=f"d{i}")
            pieces = " ".join(vocab.token_of(st.token_id) for st in document.sub_tokens)
            lines.append(f"{document.doc_id}\t{pieces}")
    atomic_write_text(output_path, "\n".join(lines) + ("\n" if lines else ""))
    logger.info("tokenized %d documents", len(lines))
    return EXIT_OK


def _read_tokens_file(path) -> list[tuple[str, list[str]]]:
    documents = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            doc_id, _, rest = line.partition("\t")
            if not doc_id:
                raise ValueError(f"{path}:{lineno}: missing document id")
            documents.append((doc_id, rest.split()))
    return documents


def _cmd_split_spans(args, config: PipelineConfig) -> int:
    input_path = _require(config.get("paths", "input", override=args.input), "--input")
    output_path = _require(config.get("paths", "output", override=args.output), "--output")
    span_config = SpanConfig(
        config.get("span", "max_len", override=args.max_len, default=512, type=int),
        config.get("span", "stride", override=args.stride, default=128, type=int),
    )
    lines = []
    for doc_id, pieces in _read_tokens_file(input_path):
        for span in split_spans(len(pieces), span_config):
            lines.append(f"{doc_id}\t{span.start} {span.end}")
    atomic_write_text(output_path, "\n".join(lines) + ("\n" if lines else ""))
    return EXIT_OK


def _cmd_preprocess_harem(args, config: PipelineConfig) -> int:
    input_path = _require(config.get("paths", "corpus", override=args.input), "--input")
    output_path = _require(config.get("paths", "output", override=args.output), "--output")
    scenario = get_scenario(_require(config.get("tags", "scenario", override=args.scenario), "--scenario"))
    with open(input_path, "rb") as fh:
        data = fh.read()
    resolved = [resolve_document(doc, scenario) for doc in parse_harem(data)]
    text, stats = export_conll(resolved, TagSet(scenario.classes))
    atomic_write_text(output_path, text)
    stats_path = config.get("paths", "stats", override=args.stats)
    if stats_path:
        atomic_write_text(stats_path, format_stats(stats))
    logger.info(
        "%s scenario: %d documents, %d tokens, %d entities",
        scenario.name,
        stats.documents,
        stats.tokens,
        stats.entities,
    )
    return EXIT_OK


def _read_labeled_conll(path) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    return [(doc.tokens, doc.columns[0]) for doc in conllio.read_tagged(path, 1)]


def _tokenized_pairs(pairs, vocab: Vocabulary, prefix: str):
    dataset = []
    for i, (words, tags) in enumerate(pairs):
        document = wordpiece_tokenize(vocab, pre_tokens_from_words(words), doc_id=f"{prefix}{i}")
        dataset.append((document, list(tags)))
    return dataset


def _cmd_train(args, config: PipelineConfig) -> int:
    vocab = Vocabulary.load(_require(config.get("paths", "vocab", override=args.vocab), "--vocab"))
    train_path = _require(config.get("paths", "train", override=args.train), "--train")
    out_path = _require(config.get("paths", "model", override=args.out), "--out")
    classes_value = config.get("tags", "classes", override=args.classes)
    classes = [c.strip() for c in classes_value.split(",")] if classes_value else None

    train_pairs = _read_labeled_conll(train_path)
    dataset = _tokenized_pairs(train_pairs, vocab, "train")
    tagger = SequenceTagger(
        vocab=vocab,
        classes=classes,
        head=config.get("train", "head", override=args.head, default=HEAD_CRF),
        max_len=config.get("span", "max_len", override=args.max_len, default=512, type=int),
        stride=config.get("span", "stride", override=args.stride, default=128, type=int),
        embedding_dim=config.get("train", "embedding_dim", override=args.embedding_dim, default=32, type=int),
        epochs=config.get("train", "epochs", override=args.epochs, default=20, type=int),
        batch_size=config.get("train", "batch_size", override=args.batch_size, default=16, type=int),
        lr_encoder=config.get("train", "lr_encoder", override=args.lr_encoder, default=5e-5, type=float),
        lr_head=config.get("train", "lr_head", override=args.lr_head, default=1e-3, type=float),
        warmup_fraction=config.get("train", "warmup_fraction", override=args.warmup_fraction, default=0.1, type=float),
        weight_decay=config.get("train", "weight_decay", override=args.weight_decay, default=0.01, type=float),
        o_tag_bias_init=config.get("train", "o_tag_bias_init", override=args.o_tag_bias_init, default=6.0, type=float),
        o_tag_loss_weight=config.get(
            "train", "o_tag_loss_weight", override=args.o_tag_loss_weight, default=0.01, type=float
        ),
        optimizer=config.get("train", "optimizer", override=args.optimizer, default=OPTIMIZER_SGD),
        seed=_seed(args, config),
    )
    tagger.fit([doc for doc, _ in dataset], [tags for _, tags in dataset])
    save_model(tagger.model_, out_path)
    logger.info("saved model to %s (final training loss %.4f)", out_path, tagger.loss_trace_[-1])

    dev_path = config.get("paths", "dev", override=args.dev)
    if dev_path:
        dev_dataset = _tokenized_pairs(_read_labeled_conll(dev_path), vocab, "dev")
        f1 = tagger.score([doc for doc, _ in dev_dataset], [tags for _, tags in dev_dataset])
        print(f"dev entity F1: {f1:.4f}")
    return EXIT_OK


def _read_conll_tokens(path) -> list[list[str]]:
    """Token column of a CoNLL file with any number of tag columns."""
    documents: list[list[str]] = []
    words: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                if words:
                    documents.append(words)
                    words = []
                continue
            words.append(line.split("\t")[0])
    if words:
        documents.append(words)
    return documents


def _document_from_pieces(model, doc_id: str, pieces: list[str]) -> tuple[TokenizedDocument, list[str]]:
    words: list[str] = []
    sub_tokens: list[SubToken] = []
    for piece in pieces:
        continuation = piece.startswith(CONTINUATION_PREFIX)
        if continuation and not words:
            raise ValueError(f"document {doc_id}: first piece {piece!r} is a continuation")
        if continuation:
            words[-1] += piece[len(CONTINUATION_PREFIX) :]
        else:
            words.append(piece)
        if model.vocab is not None:
            try:
                token_id = model.vocab.id_of(piece)
            except KeyError:
                raise ValueError(f"document {doc_id}: piece {piece!r} is not in the model vocabulary") from None
        else:
            # External emissions never look at token ids.
            token_id = 0
        sub_tokens.append(SubToken(token_id, len(words) - 1, not continuation))
    document = TokenizedDocument(tuple(pre_tokens_from_words(words)), tuple(sub_tokens), doc_id=doc_id)
    return document, words


def _cmd_predict(args, config: PipelineConfig) -> int:
    model = load_model(_require(config.get("paths", "model", override=args.model), "--model"))
    input_path = _require(config.get("paths", "input", override=args.input), "--input")
    output_path = _require(config.get("paths", "output", override=args.output), "--output")
    emissions_path = config.get("paths", "emissions", override=args.emissions)
    if emissions_path:
        if not isinstance(model.encoder, ExternalEmissions):
            raise ValueError("--emissions requires an external-emissions checkpoint")
        tag_names, matrices = read_emissions_file(emissions_path)
        if tuple(tag_names) != model.tag_set.tags:
            raise ValueError(
                f"emissions header tags {tag_names} do not match the model tags {list(model.tag_set.tags)}"
            )
        model.encoder.matrices = matrices
    elif isinstance(model.encoder, ExternalEmissions):
        raise UsageError("external-emissions checkpoints need --emissions")

    documents: list[tuple[TokenizedDocument, list[str]]] = []
    if args.format == "text":
        if model.vocab is None:
            raise ValueError("model has no vocabulary; use --format tokens")
        with open(input_path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                document = tokenize_text(model.vocab, line.rstrip("\n"), doc_id=f"d{i}")
                documents.append((document, [p.text for p in document.pre_tokens]))
    elif args.format == "conll":
        if model.vocab is None:
            raise ValueError("model has no vocabulary; use --format tokens")
        for i, words in enumerate(_read_conll_tokens(input_path)):
            document = wordpiece_tokenize(model.vocab, pre_tokens_from_words(words), doc_id=f"d{i}")
            documents.append((document, words))
    else:
        for doc_id, pieces in _read_tokens_file(input_path):
            documents.append(_document_from_pieces(model, doc_id, pieces))

    tagged = []
    for document, words in documents:
        tags, _ = predict(model, document)
        tagged.append(conllio.TaggedDocument(tuple(words), (tuple(model.tag_set.to_names(tags)),)))
    atomic_write_text(output_path, conllio.format_tagged(tagged))
    logger.info("tagged %d documents", len(tagged))
    return EXIT_OK


def _cmd_evaluate(args, config: PipelineConfig) -> int:
    gold_path = _require(config.get("paths", "gold", override=args.gold), "--gold")
    pred_path = _require(config.get("paths", "pred", override=args.pred), "--pred")
    gold_docs = conllio.read_tagged(gold_path, 1)
    pred_docs = conllio.read_tagged(pred_path, 1)
    merged = conllio.merge_columns(gold_docs, pred_docs)

    fd, merged_path = tempfile.mkstemp(suffix=".conll")
    os.close(fd)
    try:
        atomic_write_text(merged_path, conllio.format_tagged(merged))
        result = evaluate_conll_files(merged_path)
    finally:
        os.unlink(merged_path)
    sys.stdout.write(format_conlleval_report(result, per_class=args.per_class))

    bootstrap_path = config.get("paths", "bootstrap", override=args.bootstrap)
    if bootstrap_path:
        other_docs = conllio.read_tagged(bootstrap_path, 1)
        conllio.merge_columns(gold_docs, other_docs)
        gold_tags = [d.columns[0] for d in gold_docs]
        pred_tags = [d.columns[0] for d in pred_docs]
        other_tags = [d.columns[0] for d in other_docs]
        classes = collect_classes(gold_tags + pred_tags + other_tags)
        tag_set = TagSet(classes if classes else ["NONE"])
        report = bootstrap_compare(
            decode_tag_documents(gold_tags, tag_set, apply_filter=False),
            decode_tag_documents(pred_tags, tag_set, apply_filter=True),
            decode_tag_documents(other_tags, tag_set, apply_filter=True),
            resamples=config.get("eval", "resamples", override=args.resamples, default=1000, type=int),
            seed=_seed(args, config),
        )
        print(
            f"F1 delta (pred - other): {report.f1_delta:+.4f}; "
            f"95% CI [{report.ci_low:+.4f}, {report.ci_high:+.4f}]; "
            f"resamples={report.resamples}; seed={report.seed}"
        )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
