"""Entity-level evaluation in the CoNLL-2003 style.

An entity counts as correct only when its start, end, and class all match
a gold entity exactly; precision, recall, and F1 are micro-averaged over
all documents.  Zero denominators yield 0, matching the reference
conlleval script.  A percentile bootstrap over documents compares two
systems on the same gold standard.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tagscheme import OUTSIDE, TagSet, decode, filter_invalid


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    correct: int
    predicted: int
    gold: int

    @property
    def support(self) -> int:
        return self.gold


@dataclass(frozen=True)
class EvalResult:
    """Micro scores with per-class breakdown and raw counts.

    ``tokens`` and ``token_accuracy`` are present only for file-based
    evaluation, where position-level agreement is well defined.
    """

    precision: float
    recall: float
    f1: float
    per_class: dict[str, ClassScores] = field(repr=False)
    correct: int
    predicted: int
    gold: int
    tokens: Optional[int] = None
    token_accuracy: Optional[float] = None


@dataclass(frozen=True)
class BootstrapReport:
    """Percentile bootstrap interval for an F1 difference.

    ``ci_low``/``ci_high`` are the 2.5/97.5 percentiles of the resampled
    deltas; they normally bracket ``f1_delta`` (the full-set difference)
    but are not forced to.
    """

    f1_delta: float
    ci_low: float
    ci_high: float
    resamples: int
    seed: int


def _prf(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    precision = correct / predicted if predicted else 0.0
    recall = correct / gold if gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _entity_keys(entities) -> set[tuple[int, int, str]]:
    return {(e.start, e.end, e.class_name) for e in entities}


def evaluate(gold_docs, pred_docs) -> EvalResult:
    """Micro precision/recall/F1 over per-document entity collections."""
    if len(gold_docs) != len(pred_docs):
        raise ValueError(f"{len(gold_docs)} gold documents but {len(pred_docs)} predicted")
    correct: Counter = Counter()
    predicted: Counter = Counter()
    gold: Counter = Counter()
    for gold_entities, pred_entities in zip(gold_docs, pred_docs):
        g = _entity_keys(gold_entities)
        p = _entity_keys(pred_entities)
        for _, _, cls in g & p:
            correct[cls] += 1
        for _, _, cls in p:
            predicted[cls] += 1
        for _, _, cls in g:
            gold[cls] += 1

    per_class = {}
    for cls in sorted(set(predicted) | set(gold)):
        p, r, f = _prf(correct[cls], predicted[cls], gold[cls])
        per_class[cls] = ClassScores(p, r, f, correct[cls], predicted[cls], gold[cls])
    total_c, total_p, total_g = sum(correct.values()), sum(predicted.values()), sum(gold.values())
    p, r, f = _prf(total_c, total_p, total_g)
    return EvalResult(p, r, f, per_class, total_c, total_p, total_g)


def _parse_tag(tag: str, location: str) -> tuple[str, str | None]:
    if tag == OUTSIDE:
        return OUTSIDE, None
    prefix, sep, class_name = tag.partition("-")
    if prefix not in ("B", "I") or not sep or not class_name:
        raise ValueError(f"{location}: unknown tag {tag!r}")
    return prefix, class_name


def evaluate_conll_files(path) -> EvalResult:
    """Score a merged token/gold/pred file.

    The predicted column is run through :func:`filter_invalid` before
    decoding; the gold column must already be valid IOB2.  Token accuracy
    compares the filtered predictions with gold position by position.
    """
    documents: list[tuple[list[str], list[str]]] = []
    gold_col: list[str] = []
    pred_col: list[str] = []
    classes: set[str] = set()

    def flush() -> None:
        nonlocal gold_col, pred_col
        if gold_col:
            documents.append((gold_col, pred_col))
        gold_col, pred_col = [], []

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            fields = line.split("\t")
            if len(fields) != 3 or not all(fields):
                raise ValueError(f"{path}:{lineno}: expected token<TAB>gold<TAB>pred, got {line!r}")
            for tag in fields[1:]:
                _, class_name = _parse_tag(tag, f"{path}:{lineno}")
                if class_name is not None:
                    classes.add(class_name)
            gold_col.append(fields[1])
            pred_col.append(fields[2])
    flush()

    tag_set = TagSet(sorted(classes)) if classes else TagSet(["NONE"])
    gold_entities = []
    pred_entities = []
    tokens = 0
    agreeing = 0
    for d, (gold_tags, pred_tags) in enumerate(documents):
        gold_idx = tag_set.to_indices(gold_tags)
        try:
            gold_entities.append(decode(gold_idx, tag_set))
        except ValueError as err:
            raise ValueError(f"{path}: document {d}: invalid gold tags: {err}") from err
        filtered = filter_invalid(tag_set.to_indices(pred_tags), tag_set)
        pred_entities.append(decode(filtered, tag_set))
        tokens += len(gold_tags)
        agreeing += sum(1 for g, p in zip(gold_idx, filtered) if g == p)

    result = evaluate(gold_entities, pred_entities)
    return EvalResult(
        result.precision,
        result.recall,
        result.f1,
        result.per_class,
        result.correct,
        result.predicted,
        result.gold,
        tokens=tokens,
        token_accuracy=agreeing / tokens if tokens else 0.0,
    )


def format_conlleval_report(result: EvalResult, per_class: bool = True) -> str:
    """Render the classic conlleval summary, optionally with per-class lines."""
    if result.tokens is None or result.token_accuracy is None:
        raise ValueError("report formatting needs a file-based result with token counts")
    lines = [
        f"processed {result.tokens} tokens with {result.gold} phrases; "
        f"found: {result.predicted} phrases; correct: {result.correct}.",
        f"accuracy: {100 * result.token_accuracy:6.2f}%; "
        f"precision: {100 * result.precision:6.2f}%; "
        f"recall: {100 * result.recall:6.2f}%; "
        f"FB1: {100 * result.f1:6.2f}",
    ]
    if per_class:
        for cls, s in result.per_class.items():
            lines.append(
                f"{cls:>17}: precision: {100 * s.precision:6.2f}%; "
                f"recall: {100 * s.recall:6.2f}%; "
                f"FB1: {100 * s.f1:6.2f}  {s.predicted}"
            )
    return "\n".join(lines) + "\n"


def collect_classes(tag_sequences) -> list[str]:
    """Sorted entity classes mentioned in any of the tag-name sequences."""
    classes: set[str] = set()
    for tags in tag_sequences:
        for tag in tags:
            _, class_name = _parse_tag(tag, "tags")
            if class_name is not None:
                classes.add(class_name)
    return sorted(classes)


def decode_tag_documents(tag_sequences, tag_set: TagSet, apply_filter: bool):
    """Per-document entities from tag-name sequences.

    Predicted sequences should set ``apply_filter``; gold sequences are
    decoded strictly instead.
    """
    documents = []
    for d, tags in enumerate(tag_sequences):
        indices = tag_set.to_indices(tags)
        if apply_filter:
            indices = filter_invalid(indices, tag_set)
        try:
            documents.append(decode(indices, tag_set))
        except ValueError as err:
            raise ValueError(f"document {d}: invalid tag sequence: {err}") from err
    return documents


def _doc_count_matrix(gold_docs, pred_docs) -> np.ndarray:
    counts = np.zeros((len(gold_docs), 3), dtype=int)
    for d, (gold_entities, pred_entities) in enumerate(zip(gold_docs, pred_docs)):
        g = _entity_keys(gold_entities)
        p = _entity_keys(pred_entities)
        counts[d] = (len(g & p), len(p), len(g))
    return counts


def _f1_from_totals(totals: np.ndarray) -> float:
    return _prf(int(totals[0]), int(totals[1]), int(totals[2]))[2]


def bootstrap_compare(gold_docs, pred_a, pred_b, resamples: int = 1000, seed: int = 0) -> BootstrapReport:
    """Percentile bootstrap of F1(A) - F1(B) resampling whole documents.

    Each resample draws its own generator from a spawned seed sequence, so
    the reported interval does not depend on evaluation order.
    """
    if resamples < 1000:
        raise ValueError(f"resamples must be at least 1000, got {resamples}")
    n = len(gold_docs)
    if n < 2:
        raise ValueError(f"bootstrap needs at least 2 documents, got {n}")
    if len(pred_a) != n or len(pred_b) != n:
        raise ValueError("prediction lists must align with the gold documents")

    counts_a = _doc_count_matrix(gold_docs, pred_a)
    counts_b = _doc_count_matrix(gold_docs, pred_b)
    point = _f1_from_totals(counts_a.sum(axis=0)) - _f1_from_totals(counts_b.sum(axis=0))

    deltas = np.empty(resamples)
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(resamples)):
        idx = np.random.default_rng(child).integers(0, n, size=n)
        deltas[i] = _f1_from_totals(counts_a[idx].sum(axis=0)) - _f1_from_totals(counts_b[idx].sum(axis=0))
    ci_low, ci_high = np.percentile(deltas, [2.5, 97.5])
    return BootstrapReport(point, float(ci_low), float(ci_high), resamples, seed)
