import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from traintrack.errors import UnknownLetter
from traintrack.words import (
    Alphabet,
    Endomorphism,
    apply_endo,
    are_conjugate,
    conjugacy_length,
    cyclic_reduce,
    inverse,
    is_injective_on_ball,
    multiply,
    reduce,
    reduced_words,
)

A2 = Alphabet(2)
P = A2.parse

letters2 = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=30)


def naive_reduce(seq):
    """Delete one cancelling pair at a time until none is left."""
    w = list(seq)
    changed = True
    while changed:
        changed = False
        for i in range(len(w) - 1):
            if w[i] == -w[i + 1]:
                del w[i:i + 2]
                changed = True
                break
    return tuple(w)


@pytest.mark.parametrize("text, expected", [("a a^-1 b", "b"), ("", ""), ("a b b^-1 a", "a a")])
def test_reduce_examples(text, expected):
    assert A2.format(reduce([x for t in text.split() for x in A2.parse(t)])) == expected


def test_parse_unicode_inverse_and_powers():
    assert P("a⁻¹ b^2") == (-1, 2, 2)
    with pytest.raises(UnknownLetter):
        P("a z")


def test_reduce_rejects_letters_outside_alphabet():
    with pytest.raises(UnknownLetter):
        reduce([1, 3], A2)


@given(letters2)
def test_reduce_matches_pairwise_deletion(seq):
    assert reduce(seq) == naive_reduce(seq)


@given(letters2, letters2)
def test_inverse_cancels(u, v):
    w = reduce(u)
    assert multiply(w, inverse(w)) == ()
    assert multiply(reduce(u), reduce(v)) == reduce(u + v)


@pytest.mark.parametrize("text, core, conj", [
    ("a b a^-1", "b", "a"),
    ("a b", "a b", ""),
    ("a^-1 b a", "b", "a^-1"),
])
def test_cyclic_reduce_examples(text, core, conj):
    c, g = cyclic_reduce(P(text))
    assert (A2.format(c), A2.format(g)) == (core, conj)


def test_cyclic_length_minimal_over_short_conjugators():
    w = P("a^-1 b a a")
    # brute force: no conjugate by a word of length <= 3 is shorter than 2
    shortest = min(len(multiply(g, w, inverse(g))) for n in range(4) for g in reduced_words(A2, n))
    assert conjugacy_length(w) == shortest == 2


@given(letters2)
def test_cyclic_reduce_recomposes(seq):
    w = reduce(seq)
    core, g = cyclic_reduce(w)
    assert multiply(g, core, inverse(g)) == w
    if len(core) > 1:
        assert core[0] != -core[-1]


@given(letters2, st.lists(st.sampled_from([1, -1, 2, -2]), max_size=5))
def test_conjugates_are_conjugate(seq, g):
    w = reduce(seq)
    assert are_conjugate(w, multiply(g, w, inverse(g)))


def test_reduced_words_count():
    # 4 * 3^(n-1) reduced words of length n in rank 2
    for n in range(1, 6):
        words = list(reduced_words(A2, n))
        assert len(words) == 4 * 3 ** (n - 1) == len(set(words))
        assert all(reduce(w) == w for w in words)


FIB = Endomorphism.from_strings(A2, {"a": "b", "b": "a b"})


def compose_letters(phi, w):
    # oracle: concatenate the letter images, then reduce
    out = []
    for x in w:
        im = phi.images[abs(x) - 1]
        out.extend(im if x > 0 else inverse(im))
    return naive_reduce(out)


def test_apply_examples():
    assert A2.format(apply_endo(FIB, P("a b"))) == "b a b"
    ident = Endomorphism.identity(A2)
    assert apply_endo(ident, P("a b^-1 a")) == P("a b^-1 a")
    A1 = Alphabet(1)
    dbl = Endomorphism.from_strings(A1, {"a": "a a"})
    assert A1.format(apply_endo(dbl, A1.parse("a"))) == "a a"


@given(letters2)
def test_apply_matches_letter_substitution(seq):
    w = reduce(seq)
    assert apply_endo(FIB, w) == compose_letters(FIB, w)


def test_power_and_compose():
    assert FIB.power(2).to_strings() == {"a": "a b", "b": "b a b"}
    assert FIB.compose(FIB).images == FIB.power(2).images
    assert FIB.power(0).is_identity()


def test_injectivity_on_ball():
    collapse = Endomorphism.from_strings(A2, {"a": "a b", "b": "a b"})
    assert A2.format(is_injective_on_ball(collapse, 2)) == "a b^-1"
    assert is_injective_on_ball(FIB, 6) is True
    assert is_injective_on_ball(Endomorphism.identity(A2), 10) is True


def test_injectivity_counterexample_is_shortest():
    collapse = Endomorphism.from_strings(A2, {"a": "a b", "b": "a b"})
    dead = [w for n in (1, 2) for w in reduced_words(A2, n) if not collapse(w)]
    assert is_injective_on_ball(collapse, 2) == dead[0]
    assert list(itertools.islice(reduced_words(A2, 1), 4)) == [(1,), (-1,), (2,), (-2,)]
