"""Seeded synthetic copy-task corpus for end-to-end smoke testing.

Every word belongs to exactly one tag: entity words are drawn from small
per-class lexicons of begin and inside words, everything else is an O
word.  A model therefore only has to copy word identity into the tag,
which a toy encoder can learn in seconds.  Roughly a third of the O words
are absent from the vocabulary as whole tokens and segment into two
pieces, exercising first-sub-token masking end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vocab import SPECIAL_TOKENS, TokenizedDocument, Vocabulary, pre_tokens_from_words, wordpiece_tokenize

LabeledWords = tuple[tuple[str, ...], tuple[str, ...]]


@dataclass(frozen=True)
class SyntheticCorpus:
    vocab: Vocabulary
    train: tuple[LabeledWords, ...]
    dev: tuple[LabeledWords, ...]


def _o_word(index: int) -> str:
    # Every third O word is excluded from the vocabulary and relies on the
    # two-piece segmentation below.
    if index % 3 == 0:
        return f"stem{index:02d}tail"
    return f"w{index:02d}"


def _build_vocab(classes, words_per_class: int, o_words: int) -> Vocabulary:
    tokens = list(SPECIAL_TOKENS)
    for cls in classes:
        for i in range(words_per_class):
            tokens.append(f"{cls.lower()}b{i}")
            tokens.append(f"{cls.lower()}i{i}")
    for i in range(o_words):
        if i % 3 == 0:
            tokens.append(f"stem{i:02d}")
        else:
            tokens.append(_o_word(i))
    tokens.append("##tail")
    return Vocabulary(tokens)


def generate_corpus(
    seed: int = 13,
    num_docs: int = 500,
    classes=("PER", "LOC"),
    words_per_class: int = 8,
    o_words: int = 30,
    min_words: int = 8,
    max_words: int = 20,
    dev_fraction: float = 0.2,
) -> SyntheticCorpus:
    """Deterministic corpus of tagged word sequences plus a matching vocabulary."""
    if num_docs < 2:
        raise ValueError("need at least 2 documents to split off a dev set")
    rng = np.random.default_rng(seed)
    documents: list[LabeledWords] = []
    for _ in range(num_docs):
        length = int(rng.integers(min_words, max_words + 1))
        words: list[str] = []
        tags: list[str] = []
        while len(words) < length:
            if rng.random() < 0.25:
                cls = classes[int(rng.integers(len(classes)))]
                words.append(f"{cls.lower()}b{rng.integers(words_per_class)}")
                tags.append(f"B-{cls}")
                if rng.random() < 0.5:
                    words.append(f"{cls.lower()}i{rng.integers(words_per_class)}")
                    tags.append(f"I-{cls}")
            else:
                words.append(_o_word(int(rng.integers(o_words))))
                tags.append("O")
        documents.append((tuple(words), tuple(tags)))
    num_dev = max(1, int(round(num_docs * dev_fraction)))
    return SyntheticCorpus(
        _build_vocab(classes, words_per_class, o_words),
        tuple(documents[:-num_dev]),
        tuple(documents[-num_dev:]),
    )


def tokenized_split(corpus_split, vocab: Vocabulary, prefix: str = "d") -> list[tuple[TokenizedDocument, list[str]]]:
    """Materialize (TokenizedDocument, gold tag names) training pairs."""
    pairs = []
    for i, (words, tags) in enumerate(corpus_split):
        doc = wordpiece_tokenize(vocab, pre_tokens_from_words(words), doc_id=f"{prefix}{i}")
        pairs.append((doc, list(tags)))
    return pairs


def format_conll(corpus_split) -> str:
    """Render a split in the token<TAB>tag file layout."""
    blocks = []
    for words, tags in corpus_split:
        blocks.append("\n".join(f"{w}\t{t}" for w, t in zip(words, tags)))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
