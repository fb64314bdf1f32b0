import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from localmt.errors import InputValidationError
from localmt.textops import (
    AnnotatedText,
    Vocabulary,
    byte_fallback_vocabulary,
    default_abbreviations,
    load_abbreviations,
    load_vocabulary,
    reassemble,
    save_vocabulary,
    split_sentences,
)

ABBREVS = frozenset({"Dr.", "Mr.", "e.g.", "No."})


# --- segmentation -----------------------------------------------------------


def test_split_empty():
    out = split_sentences("")
    assert out.gaps == ("",)
    assert out.sentences == ()


def test_split_whitespace_only():
    out = split_sentences("  \n \t ")
    assert out.gaps == ("  \n \t ",)
    assert out.sentences == ()


def test_split_two_sentences():
    out = split_sentences("Hello world. How are you?")
    assert out.sentences == ("Hello world.", "How are you?")
    assert out.gaps == ("", " ", "")


def test_split_abbreviation_blocks_boundary():
    out = split_sentences("Dr. Smith arrived.", ABBREVS)
    assert out.sentences == ("Dr. Smith arrived.",)


def test_split_single_initial_blocks_boundary():
    out = split_sentences("J. Smith stayed. He left.")
    assert out.sentences == ("J. Smith stayed.", "He left.")


def test_split_requires_uppercase_or_opener():
    assert split_sentences("version 2.0 is out. really.").sentences == (
        "version 2.0 is out. really.",
    )
    quoted = split_sentences('He left. "Stay," she said.')
    assert quoted.sentences == ("He left.", '"Stay," she said.')


def test_split_double_newline_always_splits():
    out = split_sentences("one two\n\nthree four")
    assert out.sentences == ("one two", "three four")
    assert out.gaps == ("", "\n\n", "")


def test_split_preserves_leading_and_trailing_whitespace():
    text = "  Hi there. Bye now.\n\n"
    out = split_sentences(text)
    assert out.gaps[0] == "  "
    assert out.gaps[-1] == "\n\n"
    assert out.text == text


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=400))
def test_split_lossless_on_arbitrary_text(text):
    out = split_sentences(text, ABBREVS)
    rebuilt = [out.gaps[0]]
    for s, g in zip(out.sentences, out.gaps[1:]):
        rebuilt += [s, g]
    assert "".join(rebuilt) == text


def test_annotated_text_shape_validation():
    with pytest.raises(InputValidationError):
        AnnotatedText(gaps=("",), sentences=("a",))


# --- reassemble ---------------------------------------------------------------


def test_reassemble_identity():
    text = "One two. Three four!\n\nFive."
    out = split_sentences(text)
    assert reassemble(out, list(out.sentences)) == text


def test_reassemble_replaces_sentences():
    out = split_sentences("Hello world. How are you?")
    assert reassemble(out, ["A", "B"]) == "A B"


def test_reassemble_length_mismatch():
    out = split_sentences("Hello world. How are you?")
    with pytest.raises(InputValidationError):
        reassemble(out, ["only one"])


def test_reassemble_empty():
    out = split_sentences("   ")
    assert reassemble(out, []) == "   "


# --- tokenizer ------------------------------------------------------------------


@pytest.fixture(scope="module")
def vocab():
    return byte_fallback_vocabulary(extra_pieces=["hello", "hell", "he", "llo", " wor"])


def test_tokenize_empty(vocab):
    assert vocab.tokenize("") == []
    assert vocab.detokenize([]) == ""


def test_tokenize_single_known_piece(vocab):
    ids = vocab.tokenize("hello")
    assert len(ids) == 1
    assert vocab.pieces[ids[0]] == "hello"


def test_tokenize_greedy_longest_match(vocab):
    # "hello" must win over "hell" + byte fallback
    ids = vocab.tokenize("hello world")
    assert vocab.pieces[ids[0]] == "hello"
    assert vocab.detokenize(ids) == "hello world"


def test_detokenize_rejects_out_of_range(vocab):
    with pytest.raises(InputValidationError):
        vocab.detokenize([len(vocab.pieces)])
    with pytest.raises(InputValidationError):
        vocab.detokenize([-1])


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_tokenize_bytes_roundtrip(data):
    v = byte_fallback_vocabulary(extra_pieces=["the", "and", "ing", "été"])
    assert v.detokenize_bytes(v.tokenize_bytes(data)) == data


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=150))
def test_tokenize_text_roundtrip(text):
    v = byte_fallback_vocabulary()
    assert v.detokenize(v.tokenize(text)) == text


def test_vocabulary_requires_byte_coverage():
    with pytest.raises(InputValidationError):
        Vocabulary(["<pad>", "<unk>", "</s>", "just-a-piece"])


def test_vocabulary_rejects_duplicates():
    pieces = ["<pad>", "<unk>", "</s>"] + [f"<0x{b:02X}>" for b in range(256)] + ["dup", "dup"]
    with pytest.raises(InputValidationError):
        Vocabulary(pieces)


def test_vocab_file_roundtrip(tmp_path, vocab):
    path = tmp_path / "vocab.txt"
    save_vocabulary(vocab, path)
    loaded = load_vocabulary(path)
    assert loaded.pieces == vocab.pieces
    sample = "hello world, ümläut bytes"
    assert loaded.tokenize(sample) == vocab.tokenize(sample)


def test_vocab_file_reserves_first_three_lines(tmp_path, vocab):
    path = tmp_path / "vocab.txt"
    save_vocabulary(vocab, path)
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[:3] == ["<pad>", "<unk>", "</s>"]
    assert vocab.pad_id == 0 and vocab.unk_id == 1 and vocab.eos_id == 2


# --- abbreviation files ----------------------------------------------------------


def test_load_abbreviations(tmp_path):
    f = tmp_path / "ab.txt"
    f.write_text("# comment\nDr.\nMr.\n\n  e.g.  \n", encoding="utf-8")
    assert load_abbreviations(f) == frozenset({"Dr.", "Mr.", "e.g."})


def test_default_abbreviations_shipped():
    en = default_abbreviations("en")
    assert "Dr." in en and "e.g." in en
    assert default_abbreviations("xx") == frozenset()
