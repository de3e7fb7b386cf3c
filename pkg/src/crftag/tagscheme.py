"""IOB2 tag scheme: entity spans <-> tag sequences, validity and filtering.

Tags are indexed into a :class:`TagSet`, which always places ``O`` at index 0
followed by ``B-<class>``/``I-<class>`` pairs in class order.  Raw model
output may violate the scheme; :func:`filter_invalid` repairs it before
:func:`decode` is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

OUTSIDE = "O"


@dataclass(frozen=True)
class Entity:
    """A labeled token span, half-open over word-level positions."""

    start: int
    end: int
    class_name: str

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid entity span [{self.start}, {self.end})")


@dataclass(frozen=True)
class TagSet:
    """Ordered tag inventory derived from entity class names.

    The tag list is ``["O", "B-c1", "I-c1", "B-c2", "I-c2", ...]`` so the
    number of tags is ``2 * len(classes) + 1``.
    """

    classes: tuple[str, ...]
    tags: tuple[str, ...] = field(init=False)

    def __init__(self, classes) -> None:
        classes = tuple(classes)
        seen = set()
        for name in classes:
            if not name:
                raise ValueError("entity class names must be nonempty")
            if any(ch.isspace() for ch in name):
                raise ValueError(f"entity class name contains whitespace: {name!r}")
            if name in seen:
                raise ValueError(f"duplicate entity class name: {name!r}")
            seen.add(name)
        object.__setattr__(self, "classes", classes)
        tags = [OUTSIDE]
        for name in classes:
            tags.append(f"B-{name}")
            tags.append(f"I-{name}")
        object.__setattr__(self, "tags", tuple(tags))

    def __len__(self) -> int:
        return len(self.tags)

    @property
    def num_tags(self) -> int:
        return len(self.tags)

    def index(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError:
            raise KeyError(f"unknown tag {tag!r} for classes {self.classes}") from None

    def name(self, index: int) -> str:
        return self.tags[index]

    def begin_index(self, class_name: str) -> int:
        return self.index(f"B-{class_name}")

    def inside_index(self, class_name: str) -> int:
        return self.index(f"I-{class_name}")

    def split(self, index: int) -> tuple[str, str | None]:
        """Return (prefix, class_name) for a tag index; ('O', None) for outside."""
        tag = self.tags[index]
        if tag == OUTSIDE:
            return OUTSIDE, None
        prefix, _, class_name = tag.partition("-")
        return prefix, class_name

    def to_indices(self, tags) -> list[int]:
        """Convert tag names (or pass through indices) to a list of indices."""
        out = []
        for t in tags:
            if isinstance(t, str):
                out.append(self.index(t))
            else:
                i = int(t)
                if not 0 <= i < len(self.tags):
                    raise IndexError(f"tag index {i} out of range for {len(self.tags)} tags")
                out.append(i)
        return out

    def to_names(self, indices) -> list[str]:
        return [self.tags[int(i)] for i in indices]


def encode(entities: list[Entity], length: int, tag_set: TagSet) -> list[int]:
    """Encode non-overlapping entities over ``length`` positions as IOB2 indices.

    Raises:
        ValueError: if entities overlap, lie out of bounds, or use a class
            name absent from ``tag_set``.
    """
    tags = [0] * length
    last_end = -1
    for ent in sorted(entities, key=lambda e: (e.start, e.end)):
        if ent.start < last_end:
            raise ValueError(f"overlapping entities at position {ent.start}")
        if ent.end > length:
            raise ValueError(f"entity [{ent.start}, {ent.end}) exceeds sequence length {length}")
        if ent.class_name not in tag_set.classes:
            raise ValueError(f"entity class {ent.class_name!r} not in tag set {tag_set.classes}")
        tags[ent.start] = tag_set.begin_index(ent.class_name)
        inside = tag_set.inside_index(ent.class_name)
        for i in range(ent.start + 1, ent.end):
            tags[i] = inside
        last_end = ent.end
    return tags


def decode(tags, tag_set: TagSet) -> list[Entity]:
    """Decode a valid IOB2 sequence into entities (inverse of :func:`encode`).

    Raises:
        ValueError: on an ``I-`` tag that does not continue a same-class
            entity; run :func:`filter_invalid` first for raw model output.
    """
    indices = tag_set.to_indices(tags)
    entities: list[Entity] = []
    open_start = -1
    open_class: str | None = None

    def close(end: int) -> None:
        nonlocal open_start, open_class
        if open_class is not None:
            entities.append(Entity(open_start, end, open_class))
            open_class = None

    for pos, idx in enumerate(indices):
        prefix, class_name = tag_set.split(idx)
        if prefix == "B":
            close(pos)
            open_start, open_class = pos, class_name
        elif prefix == "I":
            if class_name != open_class:
                raise ValueError(
                    f"invalid IOB2 transition into {tag_set.name(idx)!r} at position {pos}; "
                    "apply filter_invalid before decoding"
                )
        else:
            close(pos)
    close(len(indices))
    return entities


def is_valid(tags, tag_set: TagSet) -> bool:
    """True if every ``I-X`` tag continues a preceding ``B-X`` or ``I-X``."""
    prev_class: str | None = None
    for idx in tag_set.to_indices(tags):
        prefix, class_name = tag_set.split(idx)
        if prefix == "I" and class_name != prev_class:
            return False
        prev_class = class_name
    return True


def filter_invalid(tags, tag_set: TagSet) -> list[int]:
    """Rewrite IOB2 violations to ``O`` in a single left-to-right pass.

    An ``I-X`` whose predecessor (after rewriting) is neither ``B-X`` nor
    ``I-X`` becomes ``O``.  Valid sequences pass through unchanged, and no
    position ever gains a non-``O`` tag.
    """
    out = []
    prev_class: str | None = None
    for idx in tag_set.to_indices(tags):
        prefix, class_name = tag_set.split(idx)
        if prefix == "I" and class_name != prev_class:
            out.append(0)
            prev_class = None
        else:
            out.append(idx)
            prev_class = class_name
    return out
