"""Subword vocabulary handling and WordPiece tokenization.

Text is first split into pre-tokens at whitespace and punctuation, keeping
exact character offsets; each pre-token is then segmented with the greedy
longest-match-first WordPiece algorithm.  SentencePiece vocabularies using
the ``▁`` word-boundary marker can be rewritten into WordPiece format
with :func:`convert_sentencepiece_vocab`.

No lowercasing or Unicode normalization is applied anywhere: offsets into
the original text stay exact.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass, field

from .config import atomic_write_text

logger = logging.getLogger(__name__)

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
MASK_TOKEN = "[MASK]"
UNK_TOKEN = "[UNK]"
SPECIAL_TOKENS = (CLS_TOKEN, MASK_TOKEN, SEP_TOKEN, UNK_TOKEN)

CONTINUATION_PREFIX = "##"
SP_WORD_MARKER = "▁"

# Longest pre-token the greedy matcher will attempt before falling back to
# [UNK]; standard WordPiece guard.
MAX_CHARS_PER_WORD = 100

# ASCII characters treated as punctuation on top of the Unicode P* classes,
# for compatibility with standard WordPiece vocabularies ($ + < = > ^ ` | ~
# and friends carry S* categories but still split words).
ASCII_PUNCTUATION = frozenset(
    chr(cp)
    for cp in range(33, 127)
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126
)


def is_punctuation(char: str) -> bool:
    """True for Unicode P* characters and the ASCII symbol block above."""
    if char in ASCII_PUNCTUATION:
        return True
    return unicodedata.category(char).startswith("P")


def _is_reserved(token: str) -> bool:
    # Bracketed placeholders such as [CLS] or [unused0] are exempt from the
    # shape rules below.
    return len(token) > 2 and token[0] == "[" and token[-1] == "]" and "[" not in token[1:-1]


@dataclass(frozen=True)
class PreToken:
    """A whitespace/punctuation-delimited surface token with exact offsets."""

    text: str
    char_start: int
    char_end: int


def pre_tokens_from_words(words) -> list[PreToken]:
    """Pre-tokens for an already-tokenized word list.

    Words are kept whole (no punctuation re-splitting, preserving one tag
    per word) with offsets as if they were joined by single spaces.
    """
    pre_tokens = []
    position = 0
    for word in words:
        if not word or any(ch.isspace() for ch in word):
            raise ValueError(f"invalid pre-token {word!r}")
        pre_tokens.append(PreToken(word, position, position + len(word)))
        position += len(word) + 1
    return pre_tokens


def pre_tokenize(text: str) -> list[PreToken]:
    """Split text at whitespace and punctuation into offset-carrying pre-tokens.

    Punctuation characters become single-character pre-tokens; runs of other
    non-whitespace characters become word pre-tokens.  Offsets index into
    ``text`` so that ``text[p.char_start:p.char_end] == p.text``.
    """
    pre_tokens: list[PreToken] = []
    word_start = -1
    for i, ch in enumerate(text):
        if ch.isspace() or is_punctuation(ch):
            if word_start >= 0:
                pre_tokens.append(PreToken(text[word_start:i], word_start, i))
                word_start = -1
            if not ch.isspace():
                pre_tokens.append(PreToken(ch, i, i + 1))
        elif word_start < 0:
            word_start = i
    if word_start >= 0:
        pre_tokens.append(PreToken(text[word_start:], word_start, len(text)))
    return pre_tokens


class Vocabulary:
    """Immutable ordered subword inventory with the four required specials.

    Every non-reserved token must be a single punctuation character, a
    ``##``-prefixed continuation piece, or a punctuation-free word-initial
    piece; no token may mix punctuation and non-punctuation characters.
    """

    def __init__(self, tokens) -> None:
        self._tokens: tuple[str, ...] = tuple(tokens)
        self._ids: dict[str, int] = {}
        for i, token in enumerate(self._tokens):
            if token in self._ids:
                raise ValueError(f"duplicate vocabulary token {token!r} at ids {self._ids[token]} and {i}")
            self._ids[token] = i
        for special in SPECIAL_TOKENS:
            if special not in self._ids:
                raise ValueError(f"vocabulary is missing special token {special}")
        for token in self._tokens:
            self._check_shape(token)
        self.continuation_prefix = CONTINUATION_PREFIX
        self.special_ids = {special: self._ids[special] for special in SPECIAL_TOKENS}
        self.unk_id = self._ids[UNK_TOKEN]
        self.cls_id = self._ids[CLS_TOKEN]
        self.sep_id = self._ids[SEP_TOKEN]
        self.mask_id = self._ids[MASK_TOKEN]

    @staticmethod
    def _check_shape(token: str) -> None:
        if not token:
            raise ValueError("empty vocabulary token")
        if _is_reserved(token):
            return
        if len(token) == 1 and is_punctuation(token):
            return
        body = token[2:] if token.startswith(CONTINUATION_PREFIX) else token
        if not body:
            raise ValueError(f"bare continuation prefix token {token!r}")
        if any(is_punctuation(ch) for ch in body):
            raise ValueError(f"token {token!r} mixes punctuation and non-punctuation characters")
        if any(ch.isspace() for ch in body):
            raise ValueError(f"token {token!r} contains whitespace")

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def id_of(self, token: str) -> int:
        return self._ids[token]

    def token_of(self, token_id: int) -> str:
        return self._tokens[token_id]

    @classmethod
    def load(cls, path) -> "Vocabulary":
        """Read a plain-text vocabulary, one token per line (line number = id)."""
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        if tokens and tokens[-1] == "":
            tokens.pop()
        return cls(tokens)

    def save(self, path) -> None:
        atomic_write_text(path, "".join(token + "\n" for token in self._tokens))


@dataclass(frozen=True)
class SubToken:
    """One WordPiece unit: vocabulary id plus its owning pre-token."""

    token_id: int
    pre_token_index: int
    is_first: bool


@dataclass(frozen=True)
class TokenizedDocument:
    """Pre-tokens and their subword segmentation for one document."""

    pre_tokens: tuple[PreToken, ...]
    sub_tokens: tuple[SubToken, ...]
    doc_id: str | None = field(default=None, compare=False)

    @property
    def num_words(self) -> int:
        return len(self.pre_tokens)

    @property
    def num_sub_tokens(self) -> int:
        return len(self.sub_tokens)

    def first_sub_token_indices(self) -> list[int]:
        """Sub-token positions carrying the prediction for each pre-token."""
        return [i for i, st in enumerate(self.sub_tokens) if st.is_first]


def wordpiece_segment(vocab: Vocabulary, word: str) -> list[str]:
    """Greedy longest-match-first segmentation of a single pre-token.

    Returns the list of piece strings, or ``[UNK_TOKEN]`` when the word is
    overlong or has no full segmentation.
    """
    if len(word) > MAX_CHARS_PER_WORD:
        return [UNK_TOKEN]
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        piece = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = CONTINUATION_PREFIX + candidate
            if candidate in vocab:
                piece = candidate
                break
            end -= 1
        if piece is None:
            return [UNK_TOKEN]
        pieces.append(piece)
        start = end
    return pieces


def wordpiece_tokenize(
    vocab: Vocabulary, pre_tokens, doc_id: str | None = None
) -> TokenizedDocument:
    """Segment pre-tokens into sub-tokens, flagging each word's first piece."""
    sub_tokens: list[SubToken] = []
    for word_index, pre_token in enumerate(pre_tokens):
        pieces = wordpiece_segment(vocab, pre_token.text)
        for k, piece in enumerate(pieces):
            sub_tokens.append(SubToken(vocab.id_of(piece), word_index, k == 0))
    return TokenizedDocument(tuple(pre_tokens), tuple(sub_tokens), doc_id=doc_id)


def tokenize_text(vocab: Vocabulary, text: str, doc_id: str | None = None) -> TokenizedDocument:
    """Pre-tokenize ``text`` and apply WordPiece segmentation."""
    return wordpiece_tokenize(vocab, pre_tokenize(text), doc_id=doc_id)


def convert_sentencepiece_vocab(sp_tokens, punctuation_set) -> Vocabulary:
    """Rewrite SentencePiece pieces into a WordPiece vocabulary.

    The output starts with the four special tokens and every character from
    ``punctuation_set`` as its own token.  Each piece is then split at
    punctuation characters (which are dropped); a resulting unit becomes
    word-initial when the piece carried the leading ``▁`` marker or when
    it followed a punctuation split point, and a ``##`` continuation piece
    otherwise.  Pieces with a non-initial ``▁`` are skipped with a
    warning.  Duplicates keep their first occurrence.
    """
    punctuation_set = set(punctuation_set)
    ordered: list[str] = list(SPECIAL_TOKENS)
    seen = set(ordered)

    def add(token: str) -> None:
        if token not in seen:
            seen.add(token)
            ordered.append(token)

    for ch in sorted(punctuation_set):
        add(ch)

    for piece in sp_tokens:
        if piece in SPECIAL_TOKENS:
            continue
        if SP_WORD_MARKER in piece[1:]:
            logger.warning("skipping malformed piece %r: %r marker is not piece-initial", piece, SP_WORD_MARKER)
            continue
        word_initial = piece.startswith(SP_WORD_MARKER)
        body = piece[1:] if word_initial else piece
        for unit, follows_split in _split_at_punctuation(body, punctuation_set):
            # Tokenization turns punctuation into its own pre-token, so any
            # unit after a split point surfaces word-initially regardless of
            # the marker.
            if word_initial or follows_split:
                add(unit)
            else:
                add(CONTINUATION_PREFIX + unit)
    return Vocabulary(ordered)


def _split_at_punctuation(text: str, punctuation_set) -> list[tuple[str, bool]]:
    """Split at (and drop) punctuation, pairing each unit with whether it
    followed a split point rather than starting the string."""
    units: list[tuple[str, bool]] = []
    current: list[str] = []
    start = 0
    for i, ch in enumerate(text):
        if ch in punctuation_set:
            if current:
                units.append(("".join(current), start > 0))
                current = []
        else:
            if not current:
                start = i
            current.append(ch)
    if current:
        units.append(("".join(current), start > 0))
    return units
