"""Sequence labeling with a linear-chain CRF over pluggable emission scores."""

from .conllio import TaggedDocument, format_tagged, merge_columns, read_tagged
from .crf import (
    brute_force_oracle,
    log_likelihood,
    log_partition,
    path_score,
    viterbi_decode,
    zero_transitions,
)
from .evaluation import (
    BootstrapReport,
    ClassScores,
    EvalResult,
    bootstrap_compare,
    evaluate,
    evaluate_conll_files,
    format_conlleval_report,
)
from .harem import (
    SELECTIVE,
    TOTAL,
    export_conll,
    format_stats,
    get_scenario,
    parse_harem,
    resolve_document,
)
from .tagger import (
    ExternalEmissions,
    SequenceTagger,
    TaggerModel,
    TrainableEncoder,
    TrainConfig,
    create_trainable_model,
    load_model,
    lr_schedule,
    predict,
    save_model,
    train,
)
from .tagscheme import Entity, TagSet, decode, encode, filter_invalid, is_valid
from .vocab import (
    PreToken,
    SubToken,
    TokenizedDocument,
    Vocabulary,
    convert_sentencepiece_vocab,
    pre_tokenize,
    tokenize_text,
    wordpiece_tokenize,
)
from .windowing import Span, SpanConfig, assign_max_context, merge_predictions, split_spans

__version__ = "0.1.0"

__all__ = [
    "BootstrapReport",
    "ClassScores",
    "Entity",
    "EvalResult",
    "ExternalEmissions",
    "PreToken",
    "SELECTIVE",
    "SequenceTagger",
    "Span",
    "SpanConfig",
    "SubToken",
    "TOTAL",
    "TagSet",
    "TaggedDocument",
    "TaggerModel",
    "TokenizedDocument",
    "TrainConfig",
    "TrainableEncoder",
    "Vocabulary",
    "assign_max_context",
    "bootstrap_compare",
    "brute_force_oracle",
    "convert_sentencepiece_vocab",
    "create_trainable_model",
    "decode",
    "encode",
    "evaluate",
    "evaluate_conll_files",
    "export_conll",
    "filter_invalid",
    "format_conlleval_report",
    "format_stats",
    "format_tagged",
    "get_scenario",
    "is_valid",
    "load_model",
    "log_likelihood",
    "log_partition",
    "lr_schedule",
    "merge_columns",
    "merge_predictions",
    "parse_harem",
    "path_score",
    "pre_tokenize",
    "predict",
    "read_tagged",
    "resolve_document",
    "save_model",
    "split_spans",
    "tokenize_text",
    "train",
    "viterbi_decode",
    "wordpiece_tokenize",
    "zero_transitions",
]
