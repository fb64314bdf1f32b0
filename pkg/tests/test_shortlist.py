import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from localmt.errors import (
    BadMagicError,
    IdOutOfRangeError,
    InputValidationError,
    ShortlistFormatError,
    UnknownVersionError,
)
from localmt.shortlist import Shortlist, build, candidates, deserialize, serialize


def random_shortlist(rng, vocab_size=32, f=4, k=3):
    table = rng.integers(0, 5, (vocab_size, vocab_size))
    table[rng.random((vocab_size, vocab_size)) < 0.8] = 0
    return build(table, f=f, k=k, vocab_size=vocab_size)


# --- build -------------------------------------------------------------------


def test_build_empty_table_tie_break():
    sl = build({}, f=4, k=2, vocab_size=10)
    assert sl.first_f == (0, 1, 2, 3)  # all-zero counts fall back to lowest ids
    assert sl.per_source == {}


def test_build_single_pair():
    sl = build({(3, 7): 5}, f=0, k=1, vocab_size=10)
    assert sl.per_source == {3: (7,)}
    assert sl.first_f == ()


def test_build_matches_exhaustive_sort_oracle(rng):
    vocab = 20
    table = rng.integers(0, 50, (vocab, vocab))
    table[rng.random((vocab, vocab)) < 0.5] = 0
    f, k = 4, 2
    sl = build(table, f=f, k=k, vocab_size=vocab)

    totals = table.sum(axis=0)
    order = sorted(range(vocab), key=lambda t: (-int(totals[t]), t))
    assert sl.first_f == tuple(sorted(order[:f]))

    for s in range(vocab):
        nonzero = [(t, int(table[s, t])) for t in range(vocab) if table[s, t] > 0]
        expect = tuple(sorted(t for t, _ in sorted(nonzero, key=lambda tc: (-tc[1], tc[0]))[:k]))
        assert sl.per_source.get(s, ()) == expect


def test_build_tie_break_prefers_lower_id():
    sl = build({(0, 5): 3, (0, 2): 3, (0, 9): 3}, f=2, k=2, vocab_size=10)
    assert sl.per_source[0] == (2, 5)
    assert sl.first_f == (2, 5)


def test_build_clamps_with_warning():
    with pytest.warns(UserWarning):
        sl = build({}, f=99, k=1, vocab_size=8)
    assert sl.first_f == tuple(range(8))
    with pytest.warns(UserWarning):
        build({}, f=1, k=99, vocab_size=8)


def test_build_rejects_bad_input():
    with pytest.raises(InputValidationError):
        build({(0, 0): -1}, f=1, k=1, vocab_size=4)
    with pytest.raises(InputValidationError):
        build({(0, 9): 1}, f=1, k=1, vocab_size=4)
    with pytest.raises(InputValidationError):
        build({}, f=-1, k=1, vocab_size=4)


# --- candidates ----------------------------------------------------------------


def test_candidates_saturated_first_f_returns_full_vocab():
    sl = build({}, f=8, k=1, vocab_size=8)
    assert candidates(sl, [0, 3], specials=[1, 2]) == list(range(8))


def test_candidates_empty_source():
    sl = build({(1, 5): 2}, f=2, k=1, vocab_size=10)
    assert candidates(sl, [], specials=[2, 1]) == sorted(set(sl.first_f) | {1, 2})


def test_candidates_union_oracle():
    sl = build({(4, 7): 9, (4, 6): 1, (5, 3): 2}, f=1, k=2, vocab_size=12)
    got = candidates(sl, [4, 5], specials=[2, 1])
    expect = sorted(set(sl.first_f) | set(sl.per_source[4]) | set(sl.per_source[5]) | {1, 2})
    assert got == expect


def test_candidates_monotone(rng):
    sl = random_shortlist(rng)
    base = candidates(sl, [3], specials=[1, 2])
    grown = candidates(sl, [3, 9], specials=[1, 2])
    assert set(base) <= set(grown)


def test_candidates_contains_specials(rng):
    sl = random_shortlist(rng)
    got = candidates(sl, [0, 1, 2], specials=[2, 1])
    assert {1, 2} <= set(got)


def test_candidates_unknown_source_contributes_nothing():
    sl = build({(1, 5): 2}, f=0, k=1, vocab_size=10)
    assert candidates(sl, [8], specials=[1, 2]) == [1, 2]
    with pytest.raises(InputValidationError):
        candidates(sl, [10], specials=[1, 2])


# --- serialization ----------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_serialize_roundtrip(seed):
    rng = np.random.default_rng(seed)
    sl = random_shortlist(rng, vocab_size=int(rng.integers(4, 40)))
    assert deserialize(serialize(sl)) == sl


def test_serialize_empty_shortlist():
    sl = Shortlist(first_f=(), per_source={}, k=0, vocab_size=1)
    assert deserialize(serialize(sl)) == sl


def test_deserialize_bad_magic(rng):
    blob = bytearray(serialize(random_shortlist(rng)))
    blob[0] ^= 0xFF
    with pytest.raises(BadMagicError):
        deserialize(bytes(blob))


def test_deserialize_unknown_version(rng):
    blob = bytearray(serialize(random_shortlist(rng)))
    blob[4] = 9
    with pytest.raises(UnknownVersionError):
        deserialize(bytes(blob))


def test_deserialize_out_of_range_id():
    sl = Shortlist(first_f=(0,), per_source={0: (1,)}, k=1, vocab_size=4)
    blob = bytearray(serialize(sl))
    # first_f id sits after magic(4) + version/vocab/f/k (16)
    blob[20] = 200
    with pytest.raises(IdOutOfRangeError):
        deserialize(bytes(blob))


def test_deserialize_truncated(rng):
    blob = serialize(random_shortlist(rng))
    with pytest.raises(ShortlistFormatError):
        deserialize(blob[: len(blob) - 2])


def test_wire_layout():
    sl = Shortlist(first_f=(1, 3), per_source={2: (0, 5)}, k=2, vocab_size=6)
    blob = serialize(sl)
    assert blob[:4] == b"LSHL"
    words = np.frombuffer(blob[4:], dtype="<u4")
    assert words.tolist() == [1, 6, 2, 2, 1, 3, 1, 2, 2, 0, 5]
