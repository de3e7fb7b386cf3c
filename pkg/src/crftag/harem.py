"""HAREM Golden Collection preprocessing.

The collections annotate named entities with ``<EM>`` elements whose
``CATEG`` attribute may list several categories, and wrap genuinely
ambiguous stretches in ``<ALT>`` blocks holding ``|``-separated
alternative annotations.  A single truth is selected by keeping the
alternative with the most entities (ties go to the first) and the first
category valid for the chosen scenario; entities with no valid category
are dropped while their text is kept.  Resolved documents are exported as
token<TAB>tag CoNLL files with corpus statistics.
"""

from __future__ import annotations

import logging
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .tagscheme import Entity, TagSet, encode
from .vocab import pre_tokenize

logger = logging.getLogger(__name__)

# Scenario class inventories; names are accent-stripped uppercase English.
TOTAL_CLASSES = (
    "LOCATION",
    "PERSON",
    "ORGANIZATION",
    "VALUE",
    "DATE",
    "TITLE",
    "THING",
    "EVENT",
    "ABSTRACTION",
    "OTHER",
)
SELECTIVE_CLASSES = ("PERSON", "ORGANIZATION", "LOCATION", "VALUE", "DATE")

# Source categories (Portuguese and abbreviated forms) per canonical class.
_CATEGORY_ALIASES = {
    "PESSOA": "PERSON",
    "PER": "PERSON",
    "ORGANIZACAO": "ORGANIZATION",
    "ORG": "ORGANIZATION",
    "LOCAL": "LOCATION",
    "LOC": "LOCATION",
    "TEMPO": "DATE",
    "VALOR": "VALUE",
    "OBRA": "TITLE",
    "COISA": "THING",
    "ACONTECIMENTO": "EVENT",
    "ABSTRACCAO": "ABSTRACTION",
    "VARIADO": "OTHER",
}
_CATEGORY_ALIASES.update({name: name for name in TOTAL_CLASSES})


@dataclass(frozen=True)
class Scenario:
    name: str
    classes: tuple[str, ...]


SELECTIVE = Scenario("selective", SELECTIVE_CLASSES)
TOTAL = Scenario("total", TOTAL_CLASSES)


def get_scenario(name: str) -> Scenario:
    try:
        return {"selective": SELECTIVE, "total": TOTAL}[name.lower()]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected 'selective' or 'total'") from None


@dataclass(frozen=True)
class TextSegment:
    text: str


@dataclass(frozen=True)
class EmSegment:
    text: str
    categories: tuple[str, ...]


@dataclass(frozen=True)
class AltSegment:
    alternatives: tuple[tuple["RawSegment", ...], ...]


RawSegment = Union[TextSegment, EmSegment, AltSegment]


@dataclass(frozen=True)
class HaremDocument:
    doc_id: str
    segments: tuple[RawSegment, ...]


@dataclass(frozen=True)
class CharEntity:
    """Entity with character offsets into the resolved document text."""

    start: int
    end: int
    class_name: str


@dataclass(frozen=True)
class ResolvedDocument:
    doc_id: str
    text: str
    entities: tuple[CharEntity, ...]


def _parse_em(element: ET.Element, doc_id: str) -> EmSegment:
    if element.find(".//EM") is not None:
        logger.warning("document %s: EM nested inside EM; keeping the outer entity", doc_id)
    raw = element.get("CATEG") or element.get("categ") or ""
    categories = tuple(c.strip() for c in raw.split("|") if c.strip())
    if not categories:
        logger.warning("document %s: EM without categories", doc_id)
    return EmSegment("".join(element.itertext()), categories)


def _parse_alt(element: ET.Element, doc_id: str) -> AltSegment:
    alternatives: list[list[RawSegment]] = [[]]

    def push_text(text: str) -> None:
        # A bare "|" at the top level of an ALT separates alternatives.
        pieces = text.split("|")
        if pieces[0]:
            alternatives[-1].append(TextSegment(pieces[0]))
        for piece in pieces[1:]:
            alternatives.append([])
            if piece:
                alternatives[-1].append(TextSegment(piece))

    if element.text:
        push_text(element.text)
    for child in element:
        for segment in _parse_children(child, doc_id):
            alternatives[-1].append(segment)
        if child.tail:
            push_text(child.tail)
    return AltSegment(tuple(tuple(a) for a in alternatives))


def _parse_children(element: ET.Element, doc_id: str) -> list[RawSegment]:
    """Segments for one child element, dispatching on its tag."""
    if element.tag == "EM":
        return [_parse_em(element, doc_id)]
    if element.tag == "ALT":
        return [_parse_alt(element, doc_id)]
    logger.warning("document %s: unknown tag <%s> treated as plain content", doc_id, element.tag)
    return _walk_mixed(element, doc_id)


def _walk_mixed(element: ET.Element, doc_id: str) -> list[RawSegment]:
    """Flatten an element's mixed content, recursing through unknown tags."""
    segments: list[RawSegment] = []
    if element.text:
        segments.append(TextSegment(element.text))
    for child in element:
        segments.extend(_parse_children(child, doc_id))
        if child.tail:
            segments.append(TextSegment(child.tail))
    return segments


def parse_harem(data: bytes) -> list[HaremDocument]:
    """Parse Golden Collection XML into per-document segment streams."""
    root = ET.fromstring(data)
    documents = []
    elements = [root] if root.tag == "DOC" else list(root.iter("DOC"))
    for index, doc in enumerate(elements):
        doc_id = doc.get("DOCID") or doc.get("docid") or doc.get("ID") or f"doc{index}"
        documents.append(HaremDocument(doc_id, tuple(_walk_mixed(doc, doc_id))))
    return documents


def _count_entities(segments: Sequence[RawSegment]) -> int:
    count = 0
    for segment in segments:
        if isinstance(segment, EmSegment):
            count += 1
        elif isinstance(segment, AltSegment):
            count += _count_entities(resolve_alt(segment))
    return count


def resolve_alt(alt: AltSegment) -> tuple[RawSegment, ...]:
    """Alternative with the most entities; ties favor the first.

    Entities are counted before any scenario projection, and each EM counts
    once however many categories it lists.
    """
    return max(alt.alternatives, key=_count_entities)


def _canonical_category(category: str) -> Optional[str]:
    stripped = unicodedata.normalize("NFD", category.strip().upper())
    stripped = "".join(ch for ch in stripped if not unicodedata.combining(ch))
    return _CATEGORY_ALIASES.get(stripped)


def resolve_categories(categories: Sequence[str], scenario: Scenario) -> Optional[str]:
    """First category valid under the scenario, or None to drop the entity."""
    for category in categories:
        canonical = _canonical_category(category)
        if canonical in scenario.classes:
            return canonical
    return None


def resolve_document(document: HaremDocument, scenario: Scenario) -> ResolvedDocument:
    """Flatten one document to text plus scenario-projected entities."""
    parts: list[str] = []
    entities: list[CharEntity] = []
    position = 0

    def emit(segments: Sequence[RawSegment]) -> None:
        nonlocal position
        for segment in segments:
            if isinstance(segment, AltSegment):
                emit(resolve_alt(segment))
                continue
            text = segment.text
            if isinstance(segment, EmSegment) and text:
                class_name = resolve_categories(segment.categories, scenario)
                if class_name is not None:
                    entities.append(CharEntity(position, position + len(text), class_name))
            parts.append(text)
            position += len(text)

    emit(document.segments)
    return ResolvedDocument(document.doc_id, "".join(parts), tuple(entities))


@dataclass(frozen=True)
class DocStats:
    doc_id: str
    tokens: int
    entities: int


@dataclass(frozen=True)
class CorpusStats:
    scenario: str
    documents: int
    tokens: int
    entities: int
    per_doc: tuple[DocStats, ...]


def _word_entities(doc: ResolvedDocument, pre_tokens) -> list[Entity]:
    """Map character entities onto covering token ranges.

    Edge whitespace inside an entity is ignored for alignment; any other
    boundary mismatch expands the entity to whole tokens with a warning.
    Entities left without tokens, or overlapping after expansion, are
    dropped with a warning.
    """
    word_entities: list[Entity] = []
    occupied_until = 0
    for entity in doc.entities:
        start, end = entity.start, entity.end
        while start < end and doc.text[start].isspace():
            start += 1
        while end > start and doc.text[end - 1].isspace():
            end -= 1
        covering = [i for i, t in enumerate(pre_tokens) if t.char_start < end and t.char_end > start]
        if not covering:
            logger.warning("document %s: entity %r covers no tokens; dropped", doc.doc_id, doc.text[entity.start:entity.end])
            continue
        first, last = covering[0], covering[-1]
        if pre_tokens[first].char_start != start or pre_tokens[last].char_end != end:
            logger.warning(
                "document %s: entity %r not aligned to token boundaries; expanded to covering tokens",
                doc.doc_id,
                doc.text[entity.start:entity.end],
            )
        if first < occupied_until:
            logger.warning("document %s: entity %r overlaps a previous entity; dropped", doc.doc_id, doc.text[entity.start:entity.end])
            continue
        occupied_until = last + 1
        word_entities.append(Entity(first, last + 1, entity.class_name))
    return word_entities


def export_conll(docs: Sequence[ResolvedDocument], tag_set: TagSet) -> tuple[str, CorpusStats]:
    """Render documents as token<TAB>tag lines and collect statistics."""
    blocks: list[str] = []
    per_doc: list[DocStats] = []
    scenario_name = "custom"
    for scenario in (SELECTIVE, TOTAL):
        if tuple(tag_set.classes) == scenario.classes:
            scenario_name = scenario.name
    for doc in docs:
        pre_tokens = pre_tokenize(doc.text)
        entities = _word_entities(doc, pre_tokens)
        tags = tag_set.to_names(encode(entities, len(pre_tokens), tag_set))
        blocks.append("\n".join(f"{t.text}\t{tag}" for t, tag in zip(pre_tokens, tags)))
        per_doc.append(DocStats(doc.doc_id, len(pre_tokens), len(entities)))
    stats = CorpusStats(
        scenario_name,
        len(per_doc),
        sum(d.tokens for d in per_doc),
        sum(d.entities for d in per_doc),
        tuple(per_doc),
    )
    return "\n\n".join(blocks) + ("\n" if blocks else ""), stats


def format_stats(stats: CorpusStats) -> str:
    """Human-readable per-document table plus a machine-readable block."""
    width = max([len("doc_id"), len("TOTAL")] + [len(d.doc_id) for d in stats.per_doc])
    lines = [f"{'doc_id':<{width}}  {'tokens':>8}  {'entities':>8}"]
    for d in stats.per_doc:
        lines.append(f"{d.doc_id:<{width}}  {d.tokens:>8}  {d.entities:>8}")
    lines.append(f"{'TOTAL':<{width}}  {stats.tokens:>8}  {stats.entities:>8}")
    lines.append("")
    lines.append(f"scenario={stats.scenario}")
    lines.append(f"documents={stats.documents}")
    lines.append(f"tokens={stats.tokens}")
    lines.append(f"entities={stats.entities}")
    return "\n".join(lines) + "\n"
