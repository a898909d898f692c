import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from traintrack.errors import EmptyGeneratorSet
from traintrack.graphs import MarkedGraph, rose, stallings_core, subgroup_conjugate_into, tighten
from traintrack.words import Alphabet, inverse, multiply, reduced_words

A2 = Alphabet(2)
P = A2.parse


def single_pass_fixpoint(path):
    """Oracle: one left-to-right cancellation sweep, repeated until nothing changes."""
    cur = list(path)
    while True:
        out = []
        i = 0
        while i < len(cur):
            if i + 1 < len(cur) and cur[i] == -cur[i + 1]:
                i += 2
            else:
                out.append(cur[i])
                i += 1
        if out == cur:
            return tuple(cur)
        cur = out


def test_tighten_examples():
    assert tighten([1, -1, 2]) == (2,)
    assert tighten([1, 2, 3]) == (1, 2, 3)
    assert tighten([1, 2, -2, -1, 3]) == (3,)


@given(st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=30))
def test_tighten_is_idempotent_and_matches_sweeps(path):
    t = tighten(path)
    assert tighten(t) == t
    assert t == single_pass_fixpoint(path)


@pytest.mark.parametrize("rank", [1, 2, 5])
def test_rose_shape(rank):
    g = rose(Alphabet(rank))
    assert len(g.vertices) == 1 and len(g.edges) == rank
    assert g.rank() == rank
    assert all(loop == (i + 1,) for i, loop in enumerate(g.marking))
    g.validate()
    assert g.marking_is_identity()


def test_graph_round_trips_through_dict():
    g = rose(A2).with_lengths({1: 1.0, 2: 1.5})
    h = MarkedGraph.from_dict(g.to_dict())
    assert h.edges == g.edges and h.marking == g.marking
    assert h.path_length((1, -2)) == pytest.approx(2.5)


def basis_words(gens, n):
    """Reduced words in the free basis ``gens`` with at most ``n`` syllables."""
    letters = [g for g in gens] + [inverse(g) for g in gens]
    out = {()}
    layer = [((), None)]
    for _ in range(n):
        nxt = []
        for w, last in layer:
            for k, x in enumerate(letters):
                if last is not None and k == (last + len(gens)) % (2 * len(gens)):
                    continue
                nxt.append((multiply(w, x), k))
        out |= {w for w, _ in nxt}
        layer = nxt
    return out


@pytest.mark.parametrize("gens", [["a b a^-1 b^-1"], ["a a", "b"], ["a"]])
def test_core_membership_against_basis_products(gens):
    words = [P(g) for g in gens]
    core = stallings_core(words)
    members = basis_words(words, 6)
    for n in range(0, 6):
        for w in reduced_words(A2, n) if n else [()]:
            assert core.contains(w) == (w in members), A2.format(w)


def test_core_shapes():
    assert (stallings_core([P("a")]).num_vertices, stallings_core([P("a")]).num_edges()) == (1, 1)
    comm = stallings_core([P("a b a^-1 b^-1")])
    assert (comm.num_vertices, comm.num_edges(), comm.rank()) == (4, 4, 1)
    wedge = stallings_core([P("a a"), P("b")])
    assert (wedge.num_vertices, wedge.num_edges(), wedge.rank()) == (2, 3, 2)
    assert wedge.contains(P("a a b")) and not wedge.contains(P("a"))


def test_commutator_membership_on_random_words():
    rng = random.Random(4)
    c = P("a b a^-1 b^-1")
    comm = stallings_core([c])
    for _ in range(100):
        k = rng.randint(-3, 3)
        w = multiply(*([c] * k)) if k >= 0 else multiply(*([inverse(c)] * -k))
        if rng.random() < 0.5:
            w = multiply(w, (rng.choice([1, -1, 2, -2]),))
        # normal form check: w is a power of c exactly when it equals c^(len/4) or its inverse
        n = len(w) // 4
        expected = len(w) % 4 == 0 and w in (multiply(*([c] * n)), multiply(*([inverse(c)] * n)))
        assert comm.contains(w) == expected


def test_empty_generator_set():
    with pytest.raises(EmptyGeneratorSet):
        stallings_core([])


def brute_conjugator(Pw, Qcore, n):
    for m in range(n + 1):
        for g in reduced_words(A2, m) if m else [()]:
            if all(Qcore.contains(multiply(inverse(g), w, g)) for w in Pw):
                return g
    return None


@pytest.mark.parametrize("p, q, expected", [("a a", "a", ""), ("b a b^-1", "a", "b"), ("a", "b", None)])
def test_conjugate_into(p, q, expected):
    Pc, Qc = stallings_core([P(p)]), stallings_core([P(q)])
    g = subgroup_conjugate_into(Pc, Qc)
    if expected is None:
        assert g is None
        assert brute_conjugator([P(p)], Qc, 2) is None
    else:
        assert A2.format(g) == expected
        assert g == brute_conjugator([P(p)], Qc, 2)
