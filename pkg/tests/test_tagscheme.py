import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crftag.tagscheme import Entity, TagSet, decode, encode, filter_invalid, is_valid

PER_LOC = TagSet(["PER", "LOC"])


def oracle_is_valid(names):
    # Independent validity check on tag names.
    previous = "O"
    for tag in names:
        if tag.startswith("I-") and previous not in (f"B-{tag[2:]}", f"I-{tag[2:]}"):
            return False
        previous = tag
    return True


def test_tag_set_layout():
    assert PER_LOC.tags == ("O", "B-PER", "I-PER", "B-LOC", "I-LOC")
    assert PER_LOC.classes == ("PER", "LOC")
    assert len(PER_LOC) == 5
    assert PER_LOC.num_tags == 5
    assert PER_LOC.index("I-LOC") == 4
    assert PER_LOC.name(3) == "B-LOC"
    assert PER_LOC.begin_index("PER") == 1
    assert PER_LOC.inside_index("LOC") == 4
    assert PER_LOC.split(0) == ("O", None)
    assert PER_LOC.split(2) == ("I", "PER")


def test_tag_set_ten_classes_has_21_tags():
    tag_set = TagSet([f"C{i}" for i in range(10)])
    assert tag_set.num_tags == 21


def test_tag_set_rejects_bad_classes():
    with pytest.raises(ValueError, match="duplicate"):
        TagSet(["PER", "PER"])
    with pytest.raises(ValueError, match="nonempty"):
        TagSet(["PER", ""])
    with pytest.raises(ValueError, match="whitespace"):
        TagSet(["P ER"])


def test_tag_set_unknown_tag():
    with pytest.raises(KeyError, match="unknown tag"):
        PER_LOC.index("B-ORG")


def test_to_indices_mixed_and_range_checked():
    assert PER_LOC.to_indices(["O", "B-PER", 4]) == [0, 1, 4]
    assert PER_LOC.to_indices(np.array([1, 2])) == [1, 2]
    with pytest.raises(IndexError):
        PER_LOC.to_indices([5])


def test_entity_validation():
    with pytest.raises(ValueError):
        Entity(2, 2, "PER")
    with pytest.raises(ValueError):
        Entity(-1, 1, "PER")


def test_encode_hand_case():
    entities = [Entity(0, 2, "PER"), Entity(3, 4, "LOC")]
    assert encode(entities, 5, PER_LOC) == [1, 2, 0, 3, 0]


def test_encode_adjacent_entities():
    entities = [Entity(0, 1, "PER"), Entity(1, 3, "PER")]
    assert encode(entities, 3, PER_LOC) == [1, 1, 2]


def test_encode_rejects_bad_input():
    with pytest.raises(ValueError, match="overlap"):
        encode([Entity(0, 2, "PER"), Entity(1, 3, "LOC")], 4, PER_LOC)
    with pytest.raises(ValueError, match="exceeds"):
        encode([Entity(0, 3, "PER")], 2, PER_LOC)
    with pytest.raises(ValueError, match="not in tag set"):
        encode([Entity(0, 1, "ORG")], 2, PER_LOC)


def test_decode_hand_case():
    assert decode(["B-PER", "I-PER", "O", "B-LOC", "B-LOC"], PER_LOC) == [
        Entity(0, 2, "PER"),
        Entity(3, 4, "LOC"),
        Entity(4, 5, "LOC"),
    ]


def test_decode_entity_reaching_end():
    assert decode([0, 1, 2], PER_LOC) == [Entity(1, 3, "PER")]


def test_decode_strict_mentions_filter():
    with pytest.raises(ValueError, match="filter_invalid"):
        decode(["O", "I-PER"], PER_LOC)
    with pytest.raises(ValueError, match="filter_invalid"):
        decode(["B-PER", "I-LOC"], PER_LOC)


def test_is_valid_cases():
    assert is_valid(["O", "B-PER", "I-PER", "B-LOC"], PER_LOC)
    assert not is_valid(["I-PER"], PER_LOC)
    assert not is_valid(["B-PER", "I-LOC"], PER_LOC)
    assert is_valid([], PER_LOC)


@pytest.mark.parametrize(
    "raw, expected",
    [
        # Leading orphan I becomes O.
        (["I-PER", "I-PER"], ["O", "O"]),
        # I after O becomes O.
        (["O", "I-LOC"], ["O", "O"]),
        # Class switch without B: the I is orphaned.
        (["B-PER", "I-LOC", "I-LOC"], ["B-PER", "O", "O"]),
        # Repair cascades: once rewritten to O, the next I is orphaned too.
        (["O", "I-PER", "I-PER", "O"], ["O", "O", "O", "O"]),
        (["B-LOC", "I-LOC", "I-LOC"], ["B-LOC", "I-LOC", "I-LOC"]),
    ],
)
def test_filter_invalid_hand_cases(raw, expected):
    assert filter_invalid(raw, PER_LOC) == PER_LOC.to_indices(expected)


def test_encode_decode_round_trip_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        length = int(rng.integers(1, 30))
        entities = []
        position = 0
        while position < length:
            if rng.random() < 0.4:
                end = min(length, position + int(rng.integers(1, 4)))
                entities.append(Entity(position, end, ["PER", "LOC"][int(rng.integers(2))]))
                position = end
            else:
                position += 1
        tags = encode(entities, length, PER_LOC)
        assert is_valid(tags, PER_LOC)
        assert decode(tags, PER_LOC) == entities
        assert filter_invalid(tags, PER_LOC) == tags


@st.composite
def tag_indices(draw):
    num_classes = draw(st.integers(min_value=1, max_value=10))
    tag_set = TagSet([f"C{i}" for i in range(num_classes)])
    tags = draw(st.lists(st.integers(min_value=0, max_value=tag_set.num_tags - 1), max_size=40))
    return tag_set, tags


@settings(max_examples=300, deadline=None)
@given(tag_indices())
def test_filter_invalid_properties(case):
    tag_set, tags = case
    filtered = filter_invalid(tags, tag_set)
    assert is_valid(filtered, tag_set)
    assert oracle_is_valid(tag_set.to_names(filtered))
    assert filter_invalid(filtered, tag_set) == filtered
    if is_valid(tags, tag_set):
        assert filtered == tags
    # Positions only ever lose entity tags, never gain or change them.
    for before, after in zip(tags, filtered):
        assert after in (before, 0)
