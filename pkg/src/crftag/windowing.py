"""Sliding-window splitting of long documents and max-context merging.

Documents longer than the encoder limit are broken into overlapping spans
of at most ``max_len`` sub-tokens whose starts advance by ``stride``.  Each
position's final prediction comes from the span in which it has the most
surrounding context; those max-context regions are contiguous and partition
the document, so merging per-span predictions is a simple scatter.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class SpanConfig:
    """Window geometry: span length cap and start-to-start stride."""

    max_len: int
    stride: int

    def __post_init__(self) -> None:
        if self.max_len < 1:
            raise ValueError(f"max_len must be positive, got {self.max_len}")
        if not 0 < self.stride <= self.max_len:
            raise ValueError(f"stride must be in [1, max_len], got stride={self.stride} max_len={self.max_len}")

    @property
    def max_spans_per_token(self) -> int:
        """Upper bound on how many spans can cover one position: ceil(S / D)."""
        return -(-self.max_len // self.stride)


@dataclass(frozen=True)
class Span:
    """Half-open sub-token slice of a document.

    ``max_context_range`` is the half-open sub-interval whose positions take
    their final prediction from this span; it is ``None`` until assigned.
    """

    start: int
    end: int
    max_context_range: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span ({self.start}, {self.end})")
        if self.max_context_range is not None:
            lo, hi = self.max_context_range
            if not (self.start <= lo <= hi <= self.end):
                raise ValueError(f"max-context range {self.max_context_range} outside span ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def __contains__(self, position: int) -> bool:
        return self.start <= position < self.end

    def context_score(self, position: int) -> int:
        """min(left context, right context) of ``position`` inside this span."""
        if position not in self:
            raise ValueError(f"position {position} outside span ({self.start}, {self.end})")
        return min(position - self.start, self.end - 1 - position)


def split_spans(doc_len: int, cfg: SpanConfig) -> list[Span]:
    """Enumerate spans starting at 0, D, 2D, ... until one reaches the end.

    Each span has length ``min(S, doc_len - start)``; their union is
    ``[0, doc_len)``.  An empty document yields no spans.
    """
    if doc_len < 0:
        raise ValueError(f"doc_len must be non-negative, got {doc_len}")
    spans: list[Span] = []
    start = 0
    while start < doc_len:
        end = min(start + cfg.max_len, doc_len)
        spans.append(Span(start, end))
        if end == doc_len:
            break
        start += cfg.stride
    return spans


def assign_max_context(spans: Sequence[Span], doc_len: int) -> list[Span]:
    """Fill each span's max-context range by per-position score comparison.

    Position i belongs to the covering span maximizing
    ``min(i - start, end - 1 - i)``, ties going to the earliest span.  The
    resulting ranges are contiguous and partition ``[0, doc_len)``.
    """
    if doc_len < 0:
        raise ValueError(f"doc_len must be non-negative, got {doc_len}")
    if spans and (spans[0].start != 0 or max(s.end for s in spans) != doc_len):
        raise ValueError("spans do not cover [0, doc_len)")
    if not spans:
        if doc_len:
            raise ValueError("spans do not cover [0, doc_len)")
        return []

    starts = np.array([s.start for s in spans])[:, np.newaxis]
    ends = np.array([s.end for s in spans])[:, np.newaxis]
    positions = np.arange(doc_len)[np.newaxis, :]
    # Context scores are non-negative inside a span and negative outside it,
    # so an unmasked argmax picks a covering span; ties resolve to the
    # earliest because argmax returns the first maximum.
    scores = np.minimum(positions - starts, ends - 1 - positions)
    owner = np.argmax(scores, axis=0)
    if np.min(scores[owner, np.arange(doc_len)]) < 0:
        raise ValueError("some position is not covered by any span")

    assigned: list[Span] = []
    cursor = 0
    for k, span in enumerate(spans):
        lo = cursor
        while cursor < doc_len and owner[cursor] == k:
            cursor += 1
        if np.any(owner[cursor:] == k):
            raise ValueError(f"max-context positions of span ({span.start}, {span.end}) are not contiguous")
        assigned.append(dataclasses.replace(span, max_context_range=(lo, cursor)))
    if cursor != doc_len:
        raise ValueError("max-context ranges do not cover the document")
    return assigned


def merge_predictions(spans: Sequence[Span], per_span_tags: Sequence[Sequence]) -> list:
    """Combine per-span tag sequences into one document-level sequence.

    Every position takes its tag from the span owning it via the assigned
    max-context ranges.
    """
    if len(spans) != len(per_span_tags):
        raise ValueError(f"{len(spans)} spans but {len(per_span_tags)} tag sequences")
    if not spans:
        return []
    doc_len = max(s.end for s in spans)
    merged: list = [None] * doc_len
    filled = 0
    for span, tags in zip(spans, per_span_tags):
        if len(tags) != len(span):
            raise ValueError(f"span ({span.start}, {span.end}) has length {len(span)} but {len(tags)} tags")
        if span.max_context_range is None:
            raise ValueError("spans must have max-context ranges assigned before merging")
        lo, hi = span.max_context_range
        for i in range(lo, hi):
            merged[i] = tags[i - span.start]
        filled += hi - lo
    if filled != doc_len:
        raise ValueError("max-context ranges do not partition the document")
    return merged
