import pytest
from hypothesis import given, settings, strategies as st

from traces import (Alphabet, AlphabetError, Operation, Trace, TraceExplosion,
    common, owned, query, independent, word_to_trace, is_trace_prefix,
    count_matching, interleaving_count, enumerate_representatives, OWNED)

ALPHABET = Alphabet(2, common={'c'}, owned={'o'}, queries={'q'})

POOL = [common('c', 1), common('c', 2), owned(1, 'o', 1), owned(1, 'o', 2), owned(2, 'o', 1)]

words = st.lists(st.sampled_from(POOL), max_size=8)

def test_empty_trace():
    t = Trace(2)
    assert t.is_empty()
    assert t.size == 0
    assert list(t.operations()) == []

def test_operation_validation():
    with pytest.raises(AlphabetError):
        Operation(OWNED, 'o')
    with pytest.raises(AlphabetError):
        Operation('weird', 'o')
    with pytest.raises(AlphabetError):
        Operation.from_json({'kind': 'owned', 'name': 'o', 'owner': 'two'})
    with pytest.raises(AlphabetError):
        Operation.from_json(['not', 'a', 'dict'])

def test_operation_json():
    op = owned(2, 'o', 'x', [1, 2])
    assert op.args == ('x', (1, 2))
    assert Operation.from_json(op.to_json()) == op

def test_independence():
    assert independent(ALPHABET, owned(1, 'o', 1), owned(2, 'o', 1))
    assert independent(ALPHABET, common('c', 1), owned(1, 'o', 1))
    assert independent(ALPHABET, common('c', 1), common('c', 1))
    assert not independent(ALPHABET, owned(1, 'o', 1), owned(1, 'o', 2))

def test_queries_never_enter_traces():
    with pytest.raises(AlphabetError):
        Trace(2).concat(query('q'))
    with pytest.raises(AlphabetError):
        word_to_trace(ALPHABET, [query('q')])

def test_commuting_words_give_one_trace():
    a, b = owned(1, 'o', 1), owned(2, 'o', 1)
    assert word_to_trace(ALPHABET, [a, b]) == word_to_trace(ALPHABET, [b, a])
    x, y = owned(1, 'o', 1), owned(1, 'o', 2)
    assert word_to_trace(ALPHABET, [x, y]) != word_to_trace(ALPHABET, [y, x])

def test_common_multiplicity():
    t = word_to_trace(ALPHABET, [common('c', 1), common('c', 1)])
    assert t.common[common('c', 1)] == 2
    assert count_matching(t, lambda op: op.name == 'c') == 2

def test_prefix():
    u = word_to_trace(ALPHABET, [owned(1, 'o', 1), common('c', 1)])
    v = word_to_trace(ALPHABET, [common('c', 1), owned(2, 'o', 1), owned(1, 'o', 1), owned(1, 'o', 2)])
    assert is_trace_prefix(u, v)
    assert not is_trace_prefix(v, u)
    w = word_to_trace(ALPHABET, [owned(1, 'o', 2)])
    assert not is_trace_prefix(w, v)

def test_trace_json():
    t = word_to_trace(ALPHABET, [common('c', 1), owned(2, 'o', 1), common('c', 1)])
    assert Trace.from_json(2, t.to_json()) == t

def test_different_systems_not_comparable():
    with pytest.raises(AlphabetError):
        Trace(2) == Trace(3)

def test_interleaving_count():
    t = word_to_trace(ALPHABET, [common('c', 1), common('c', 1), owned(1, 'o', 1)])
    assert interleaving_count(t) == 3
    assert len(enumerate_representatives(t, 10)) == 3

def test_token_ring_representatives():
    ab, ba = owned(1, 't_AB'), owned(2, 't_BA')
    u5 = Trace(2).concat(ab).concat(ba).concat(ab).concat(ba).concat(ab)
    reps = enumerate_representatives(u5, 100)
    assert len(reps) == 10
    assert (ab, ba, ab, ba, ab) in reps
    with pytest.raises(TraceExplosion):
        enumerate_representatives(u5, 9)

@given(words, st.integers(min_value=0, max_value=7))
@settings(max_examples=200, deadline=None)
def test_swapping_independent_neighbours_keeps_trace(word, k):
    if k + 1 >= len(word):
        return
    swapped = list(word)
    swapped[k], swapped[k + 1] = swapped[k + 1], swapped[k]
    original = word_to_trace(ALPHABET, word)
    if independent(ALPHABET, word[k], word[k + 1]):
        assert word_to_trace(ALPHABET, swapped) == original
    elif word[k] != word[k + 1]:
        assert word_to_trace(ALPHABET, swapped) != original

@given(words, st.sampled_from(POOL), st.sampled_from(POOL))
@settings(max_examples=200, deadline=None)
def test_independent_appends_commute(word, a, b):
    t = word_to_trace(ALPHABET, word)
    if independent(ALPHABET, a, b):
        assert t.concat(a).concat(b) == t.concat(b).concat(a)

@given(words)
@settings(max_examples=50, deadline=None)
def test_every_representative_rebuilds_the_trace(word):
    t = word_to_trace(ALPHABET, word)
    for w in enumerate_representatives(t, 100000):
        assert word_to_trace(ALPHABET, w) == t
