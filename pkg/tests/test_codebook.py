import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opencoding.codebook import (
    Code,
    CodeExample,
    Codebook,
    LabelEmptyError,
    RawInstance,
    check_verb_phrase,
    codebook_from_doc,
    codebook_to_doc,
    export_codebook,
    load_codebook,
    load_verb_lexicon,
    merge,
    normalize_label,
    save_codebook,
)

from conftest import make_dataset


# -- normalize ----------------------------------------------------------------


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("User Feedback ", "user feedback"),
        ("multi-language support", "multi language support"),
        ("Import/Export  Functionality", "import export functionality"),
        ("what's next?", "what s next"),
        ("ALL CAPS", "all caps"),
    ],
)
def test_normalize_cases(raw, expected):
    assert normalize_label(raw) == expected


def test_normalize_empty_is_error():
    with pytest.raises(LabelEmptyError):
        normalize_label("—!!—")


@given(st.text(max_size=60))
@settings(max_examples=300, deadline=None)
def test_normalize_idempotent(raw):
    try:
        once = normalize_label(raw)
    except LabelEmptyError:
        return
    assert normalize_label(once) == once


# -- merge ---------------------------------------------------------------------


def dataset_for_merge():
    return make_dataset(list(range(8)))


def test_merge_unions_examples_across_chunks():
    dataset = dataset_for_merge()
    instances = [
        RawInstance("participatory design", 0, ("1-0", "1-1")),
        RawInstance("Participatory Design", 2, ("1-5",)),
        RawInstance("participatory design", 1, ("1-1", "1-3")),
    ]
    book = merge(instances, "chunk", dataset)
    assert len(book) == 1
    code = book.codes[0]
    assert [e.message_id for e in code.examples] == ["1-0", "1-1", "1-3", "1-5"]
    assert code.source_indices == (0, 1, 2)
    assert code.display_label == "participatory design"  # first-seen raw form


def test_merge_keeps_synonyms_separate():
    dataset = dataset_for_merge()
    book = merge(
        [
            RawInstance("resource sharing", 0, ("1-0",)),
            RawInstance("sharing resources", 0, ("1-1",)),
        ],
        "chunk",
        dataset,
    )
    assert sorted(book.labels()) == ["resource sharing", "sharing resources"]


def test_merge_empty():
    book = merge([], "item", dataset_for_merge())
    assert len(book) == 0


def test_merge_definition_first_non_empty():
    dataset = dataset_for_merge()
    book = merge(
        [
            RawInstance("a code", 1, (), definition="later definition"),
            RawInstance("a code", 0, (), definition=None),
            RawInstance("a code", 0, ("1-0",), definition="first definition"),
        ],
        "chunk",
        dataset,
    )
    assert book.codes[0].definition == "first definition"


def test_merge_order_insensitive():
    dataset = dataset_for_merge()
    instances = [
        RawInstance("alpha", 0, ("1-0",)),
        RawInstance("beta", 1, ("1-2", "1-1")),
        RawInstance("Alpha", 1, ("1-4",), definition="d"),
        RawInstance("gamma", 2, ("1-6",)),
        RawInstance("alpha", 2, ("1-0", "1-5")),
    ]
    book = merge(instances, "chunk", dataset)
    rng = random.Random(9)
    for _ in range(20):
        shuffled = instances[:]
        rng.shuffle(shuffled)
        assert merge(shuffled, "chunk", dataset) == book


def test_merge_never_creates_labels():
    dataset = dataset_for_merge()
    rng = random.Random(1)
    labels = ["a", "b", "c", "A ", "b-", "d!"]
    instances = [
        RawInstance(rng.choice(labels), rng.randrange(3), (f"1-{rng.randrange(8)}",))
        for _ in range(30)
    ]
    book = merge(instances, "item", dataset)
    assert len(book) <= len(instances)
    assert len(book) == len({normalize_label(i.raw_label) for i in instances})


def test_merge_examples_deduped_by_id_and_sorted():
    dataset = dataset_for_merge()
    book = merge(
        [RawInstance("x", 0, ("1-3", "1-1", "1-3", "1-1"))],
        "item",
        dataset,
    )
    assert [e.message_id for e in book.codes[0].examples] == ["1-1", "1-3"]


def test_merge_flags_nonconforming_verb_labels():
    dataset = dataset_for_merge()
    lexicon = load_verb_lexicon()
    book = merge(
        [
            RawInstance("acknowledge feedback", 0, ("1-0",)),
            RawInstance("emoji", 0, ("1-1",)),
        ],
        "verb",
        dataset,
        verb_lexicon=lexicon,
    )
    by_label = {c.normalized_label: c for c in book.codes}
    assert not by_label["acknowledge feedback"].verb_nonconforming
    assert by_label["emoji"].verb_nonconforming
    assert "emoji" in book.labels()  # retained, only flagged


# -- verb phrase check ----------------------------------------------------------


def test_check_verb_phrase():
    lexicon = load_verb_lexicon()
    assert check_verb_phrase("acknowledge feedback", lexicon)
    assert check_verb_phrase("Invite Feedback", lexicon)
    assert not check_verb_phrase("emoji", lexicon)
    assert not check_verb_phrase("user engagement", lexicon)


def test_verb_lexicon_size():
    assert len(load_verb_lexicon()) >= 1000


# -- export / import --------------------------------------------------------------


def random_codebook(rng: random.Random) -> Codebook:
    codes = []
    used = set()
    for _ in range(rng.randint(0, 8)):
        label = f"label {rng.randrange(1000)}"
        normalized = normalize_label(label)
        if normalized in used:
            continue
        used.add(normalized)
        examples = tuple(
            CodeExample(
                message_id=f"1-{rng.randrange(50)}",
                speaker_role=rng.choice(["Designer", "User"]),
                content=f"content {rng.randrange(100)}",
            )
            for _ in range(rng.randint(0, 3))
        )
        codes.append(
            Code(
                normalized_label=normalized,
                display_label=label,
                definition=rng.choice([None, "a definition"]),
                examples=examples,
                approach="chunk",
                source_indices=tuple(sorted({rng.randrange(5) for _ in range(2)})),
                verb_nonconforming=rng.random() < 0.2,
            )
        )
    codes.sort(key=lambda c: c.normalized_label)
    return Codebook(approach="chunk", codes=tuple(codes), backend="mock", seed=rng.randrange(100))


def test_structured_round_trip_randomized():
    for seed in range(200):
        book = random_codebook(random.Random(seed))
        assert codebook_from_doc(codebook_to_doc(book)) == book


def test_structured_file_round_trip(tmp_path):
    book = random_codebook(random.Random(5))
    path = tmp_path / "book.json"
    save_codebook(book, path)
    assert load_codebook(path) == book


def test_table_doc_bullet_convention():
    dataset = make_dataset([0, 1, 2, 3])
    instances = [RawInstance("role identification", 0, ("1-3",))]
    book = merge(instances, "chunk", dataset)
    rendered = export_codebook(book, "table")
    assert "● 1-3: User: message 3" in rendered
    assert rendered.startswith("| Label | Examples |")


def test_table_doc_renders_fixture_style_row():
    book = Codebook(
        approach="chunk",
        codes=(
            Code(
                normalized_label="role identification",
                display_label="role identification",
                definition=None,
                examples=(
                    CodeExample("2-3", "Designer", "I'll upload one now... Are you a teacher?"),
                ),
                approach="chunk",
                source_indices=(0,),
            ),
        ),
    )
    rendered = export_codebook(book, "table")
    assert "● 2-3: Designer: I'll upload one now... Are you a teacher?" in rendered


def test_empty_codebook_renders_header_only():
    book = Codebook(approach="item", codes=())
    rendered = export_codebook(book, "table")
    assert rendered.splitlines() == ["| Label | Examples |", "| --- | --- |"]


def test_export_structured_is_lossless():
    book = random_codebook(random.Random(77))
    doc = json.loads(export_codebook(book, "structured"))
    assert codebook_from_doc(doc) == book


def test_export_unknown_format():
    with pytest.raises(ValueError):
        export_codebook(Codebook(approach="item", codes=()), "pdf")


def test_codebook_rejects_duplicate_normalized_labels():
    code = Code(
        normalized_label="dup",
        display_label="dup",
        definition=None,
        examples=(),
        approach="item",
        source_indices=(),
    )
    with pytest.raises(ValueError, match="duplicate"):
        Codebook(approach="item", codes=(code, code))
