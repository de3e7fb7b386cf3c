"""Reading and writing CoNLL-style column files.

A tagged file holds one token per line with tab-separated columns and a
blank line between documents.  Two layouts are used: "token<TAB>tag"
(gold corpora, prediction output) and "token<TAB>gold<TAB>pred" (merged
evaluation input).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TaggedDocument:
    """Word-level tokens with one tag string per column beyond the token."""

    tokens: tuple[str, ...]
    columns: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        for column in self.columns:
            if len(column) != len(self.tokens):
                raise ValueError(f"column of length {len(column)} does not match {len(self.tokens)} tokens")


def read_tagged(path, num_columns: int) -> list[TaggedDocument]:
    """Parse a CoNLL-style file with ``num_columns`` tag columns per token."""
    documents: list[TaggedDocument] = []
    tokens: list[str] = []
    columns: list[list[str]] = [[] for _ in range(num_columns)]

    def flush() -> None:
        nonlocal tokens, columns
        if tokens:
            documents.append(TaggedDocument(tuple(tokens), tuple(tuple(c) for c in columns)))
        tokens = []
        columns = [[] for _ in range(num_columns)]

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            fields = line.split("\t")
            if len(fields) != num_columns + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {num_columns + 1} tab-separated fields, got {len(fields)}"
                )
            if not all(fields):
                raise ValueError(f"{path}:{lineno}: empty field")
            tokens.append(fields[0])
            for c, value in enumerate(fields[1:]):
                columns[c].append(value)
    flush()
    return documents


def format_tagged(documents) -> str:
    """Render documents in the tab-separated column layout."""
    blocks = []
    for doc in documents:
        lines = []
        for i, token in enumerate(doc.tokens):
            lines.append("\t".join([token] + [column[i] for column in doc.columns]))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def merge_columns(gold_docs, pred_docs) -> list[TaggedDocument]:
    """Zip two single-column files into the token/gold/pred layout.

    Tokens must agree document by document; a mismatch means the two files
    were produced from different inputs.
    """
    if len(gold_docs) != len(pred_docs):
        raise ValueError(f"{len(gold_docs)} gold documents but {len(pred_docs)} predicted")
    merged = []
    for d, (g, p) in enumerate(zip(gold_docs, pred_docs)):
        if g.tokens != p.tokens:
            raise ValueError(f"document {d}: token mismatch between gold and prediction files")
        merged.append(TaggedDocument(g.tokens, (g.columns[0], p.columns[0])))
    return merged
