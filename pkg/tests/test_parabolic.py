import functools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import DOUBLING, FIBONACCI, REDUCIBLE, endo
from traintrack.errors import DepthExhausted, LegalCycleInParabolic, NotTypePreserving
from traintrack.gates import gate_structure, is_legal
from traintrack.graphs import rose
from traintrack.maps import rose_representative
from traintrack.parabolic import (
    ParabolicFamily,
    check_strictly_type_preserving,
    coned_length,
    find_invariant_factor_system,
    malnormality,
    orbit_by_iteration,
    parabolic_orbits,
    transversality_constant,
)
from traintrack.spectral import assign_metric
from traintrack.words import Alphabet, inverse, multiply

A2 = Alphabet(2)
P = A2.parse
FIB_PHI = endo(*FIBONACCI)
FIB = assign_metric(rose_representative(FIB_PHI))
COMM = ParabolicFamily(A2, ((P("a b a^-1 b^-1"),),))
CYCLIC_A = ParabolicFamily(A2, ((P("a"),),))
GOLDEN = (1 + 5 ** 0.5) / 2


def brute_coned(path, family, graph):
    """Oracle: try every split of the path into single edges and core-readable runs."""
    cores = family.cores_in(graph)

    def readable(piece):
        return any(c.read(v, piece, core_only=True) is not None for c in cores for v in c.core)

    @functools.lru_cache(maxsize=None)
    def best(i):
        if i == len(path):
            return 0.0
        out = graph.edge_length(path[i]) + best(i + 1)
        for j in range(i + 1, len(path) + 1):
            if readable(path[i:j]):
                out = min(out, 1 + best(j))
        return out

    return best(0)


def test_coned_length_examples():
    g = rose(A2)
    assert coned_length(P("a a a b a a"), CYCLIC_A, g) == 3
    assert coned_length(P("a b a"), None, g) == 3
    assert coned_length(P("a b a"), ParabolicFamily.trivial(A2), g) == 3
    assert coned_length(P("a b a^-1 b^-1 a b"), COMM, g) == 1


@given(st.lists(st.sampled_from([1, -1, 2, -2]), min_size=1, max_size=10))
def test_coned_length_matches_exhaustive_parsing(seq):
    w = multiply(seq)
    if not w:
        return
    for fam in (COMM, CYCLIC_A, ParabolicFamily(A2, ((P("a a"), P("b")),))):
        assert coned_length(w, fam, FIB.graph) == pytest.approx(brute_coned(w, fam, FIB.graph))


def test_transversality_examples():
    assert transversality_constant(FIB, None) == 1.0
    assert transversality_constant(FIB, ParabolicFamily.trivial(A2)) == 1.0
    with pytest.raises(LegalCycleInParabolic):
        transversality_constant(FIB, CYCLIC_A)


def test_transversality_of_commutator_matches_cycle_scan():
    # oracle: legal subwords of the commutator cycle read either way, up to two turns around
    gs = gate_structure(FIB)
    c = P("a b a^-1 b^-1")
    best = 0.0
    for loop in (c, inverse(c)):
        for r in range(4):
            word = (loop[r:] + loop[:r]) * 2
            for i in range(len(word)):
                for j in range(i + 1, len(word) + 1):
                    if is_legal(word[i:j], gs):
                        best = max(best, FIB.graph.path_length(word[i:j]))
    assert transversality_constant(FIB, COMM) == pytest.approx(1 + best)
    # the longest legal piece is a^-1 b^-1 a b, of length 2 + 2 * golden
    assert transversality_constant(FIB, COMM) == pytest.approx(3 + 2 * GOLDEN)


def test_type_preservation():
    res = check_strictly_type_preserving(FIB_PHI, COMM)
    assert res.ok and res.targets == ((1, ()),)
    # direct: phi([a,b]) = [a,b]^-1
    assert FIB_PHI(P("a b a^-1 b^-1")) == inverse(P("a b a^-1 b^-1"))
    bad = check_strictly_type_preserving(FIB_PHI, CYCLIC_A)
    assert not bad.ok and bad.failing == 1
    assert check_strictly_type_preserving(FIB_PHI, ParabolicFamily.trivial(A2)).ok


def test_fibonacci_orbit():
    rep = parabolic_orbits(FIB_PHI, COMM)
    assert rep.K == 1 and rep.periodic == (1,)
    (entry,) = rep.entries
    assert entry["period"] == 1 and entry["conjugator"] == ""
    assert entry["hnn"] == "<P1, t>"
    assert entry["relation"] == "t [a b a^-1 b^-1] t^-1 = [b a b^-1 a^-1]"


def test_preperiodic_chain():
    A3 = Alphabet(3)
    phi = endo(3, {"a": "c b c^-1", "b": "b", "c": "a c"})
    fam = ParabolicFamily(A3, ((A3.parse("a"),), (A3.parse("b"),)))
    rep = parabolic_orbits(phi, fam)
    assert rep.K == 1 and rep.periodic == (2,)
    first, second = rep.entries
    assert first == {"index": 1, "case": "preperiodic", "steps": 1, "lands_in": 2}
    assert second["period"] == 1


def test_orbit_conjugators_against_iteration():
    # P1 -> P2 -> P1 with a twist: a -> b, b -> a^-1 ... on rank 2 with family <a>, <b>
    phi = endo(2, {"a": "b", "b": "b a b^-1"})
    fam = ParabolicFamily(A2, ((P("a"),), (P("b"),)))
    rep = parabolic_orbits(phi, fam)
    for e in rep.entries:
        if e["case"] != "periodic":
            continue
        i, p = e["index"], e["period"]
        g = P(e["conjugator"])
        # oracle: phi^p(P_i) lies in g P_i g^-1, checked by membership
        x = fam.generators[i - 1][0]
        assert fam.cores[i - 1].contains(multiply(inverse(g), phi.power(p)(x), g))
        assert any(j == i for j, _ in orbit_by_iteration(phi, fam, i, p))


def test_empty_family_orbits():
    rep = parabolic_orbits(FIB_PHI, ParabolicFamily.trivial(A2))
    assert rep.K == 1 and rep.entries == ()


def test_not_type_preserving_rejected():
    with pytest.raises(NotTypePreserving):
        parabolic_orbits(FIB_PHI, CYCLIC_A)


def test_invariant_factor_system():
    chain = find_invariant_factor_system(endo(*REDUCIBLE), depth=3)
    assert chain.family.to_dict() == {"subgroups": [["a"]]}
    sizes = [len(before) for _, before, _ in chain.steps] + [len(chain.steps[-1][2])]
    assert all(x > y for x, y in zip(sizes, sizes[1:]))
    assert find_invariant_factor_system(FIB_PHI, depth=6).family is None
    assert find_invariant_factor_system(endo(*DOUBLING), depth=3).family is None


def test_invariant_factor_system_depth():
    # a and b swap, so the invariant pair {a, b} only splits at the second power
    phi = endo(3, {"a": "b", "b": "a", "c": "c a"})
    with pytest.raises(DepthExhausted) as info:
        find_invariant_factor_system(phi, depth=1)
    assert [sorted(after) for _, _, after in info.value.chain] == [[1, 2]]
    chain = find_invariant_factor_system(phi, depth=3)
    assert [m for m, _, _ in chain.steps] == [1, 2]
    assert chain.family.to_dict() == {"subgroups": [["a"]]}


def test_malnormality():
    assert malnormality(COMM) == []
    assert malnormality(ParabolicFamily(A2, ((P("a"),), (P("b"),)))) == []
    fam = ParabolicFamily(A2, ((P("a"),), (P("b a b^-1"),)))
    (i, j, w), = malnormality(fam)
    assert (i, j) == (1, 2)
    assert fam.cores[0].contains(w) and fam.cores[1].cyclically_readable(w)
    assert [v[:2] for v in malnormality(ParabolicFamily(A2, ((P("a a"),),)))] == [(1, 1)]
