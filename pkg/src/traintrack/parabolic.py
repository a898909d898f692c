"""Subgroup families: coned-off length, transversality, type preservation, orbits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import (
    DepthExhausted,
    HorizonExceeded,
    LegalCycleInParabolic,
    NotTypePreserving,
    ZeroMatrix,
)
from .graphs import CoreGraph, MarkedGraph, stallings_core, subgroup_conjugate_into, fiber_product_loops
from .maps import is_irreducible, rose_representative, transition_matrix
from .words import Alphabet, Endomorphism, inverse, word_key


@dataclass
class ParabolicFamily:
    """Finitely many subgroups ``P_1 .. P_q`` given by generating words."""

    alphabet: Alphabet
    generators: tuple                       # one tuple of words per subgroup
    names: tuple = ()
    cores: tuple = field(init=False, repr=False)
    _pushed: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.generators = tuple(tuple(kernels.free_reduce(tuple(w)) for w in gens) for gens in self.generators)
        if not self.names:
            self.names = tuple(f"P{i}" for i in range(1, len(self.generators) + 1))
        self.cores = tuple(stallings_core(g) for g in self.generators)

    def __len__(self):
        return len(self.generators)

    @classmethod
    def trivial(cls, alphabet: Alphabet) -> "ParabolicFamily":
        return cls(alphabet, ())

    @classmethod
    def from_dict(cls, alphabet: Alphabet, doc: dict) -> "ParabolicFamily":
        subs = doc.get("subgroups", [])
        gens = tuple(tuple(alphabet.parse(s) for s in sub) for sub in subs)
        return cls(alphabet, gens)

    def to_dict(self) -> dict:
        return {"subgroups": [[self.alphabet.format(w) for w in gens] for gens in self.generators]}

    def cores_in(self, graph: MarkedGraph) -> list:
        """Core graphs of the subgroups drawn in ``graph`` (labels are oriented edges)."""
        key = id(graph)
        hit = self._pushed.get(key)
        if hit is not None and hit[0] is graph:
            return hit[1]
        cores = [CoreGraph.from_words([graph.marking_path(w) for w in gens]) for gens in self.generators]
        self._pushed[key] = (graph, cores)
        return cores


def _run_ends(path: Sequence[int], core: CoreGraph) -> list:
    """For each start ``j``, the furthest ``i`` with ``path[j:i]`` read inside the core."""
    n = len(path)
    ends = [j for j in range(n)]
    for v in sorted(core.core):
        for j in range(n):
            u, i = v, j
            while i < n:
                u2 = core.out[u].get(path[i])
                if u2 is None or u2 not in core.core:
                    break
                u, i = u2, i + 1
            if i > ends[j]:
                ends[j] = i
    return ends


def coned_length(path: Sequence[int], family: ParabolicFamily | None, graph: MarkedGraph) -> float:
    """Length after replacing each stretch inside a subgroup core by a unit cone crossing.

    Minimal over all ways of choosing the coned stretches (dynamic
    programming); touching a core at a single vertex costs nothing.
    """
    path = tuple(path)
    if family is None or len(family) == 0 or not path:
        return graph.path_length(path)
    n = len(path)
    reach = [max(col) for col in zip(*[_run_ends(path, c) for c in family.cores_in(graph)])]
    best = [math.inf] * (n + 1)
    best[0] = 0.0
    for j in range(n):
        if best[j] == math.inf:
            continue
        step = best[j] + graph.edge_length(path[j])
        if step < best[j + 1]:
            best[j + 1] = step
        for i in range(j + 1, reach[j] + 1):
            if best[j] + 1.0 < best[i]:
                best[i] = best[j] + 1.0
    return best[n]


def transversality_constant(f, family: ParabolicFamily | None, gates=None) -> float:
    """``1 +`` the longest legal path running inside a subgroup core.

    Searches states (core vertex, last edge) depth first; a state reached
    again while still on the stack is a legal loop inside a core.
    """
    if family is None or len(family) == 0:
        return 1.0
    from .gates import gate_structure
    gs = gates or gate_structure(f)
    g = f.graph
    longest = 0.0
    for core in family.cores_in(g):
        memo: dict = {}
        stack: list = []
        on_stack: set = set()

        def walk(v, last):
            state = (v, last)
            if state in memo:
                return memo[state]
            if state in on_stack:
                loop = tuple(s[1] for s in stack[stack.index(state) + 1:]) + (last,)
                raise LegalCycleInParabolic("a legal loop lies inside a subgroup core", loop=loop)
            on_stack.add(state)
            stack.append(state)
            best = 0.0
            for x, u in sorted(core.out[v].items()):
                if u not in core.core or x == -last:
                    continue
                if not gs.is_legal_turn(-last, x):
                    continue
                best = max(best, g.edge_length(x) + walk(u, x))
            stack.pop()
            on_stack.discard(state)
            memo[state] = best
            return best

        for v in sorted(core.core):
            for x, u in sorted(core.out[v].items()):
                if u in core.core:
                    longest = max(longest, g.edge_length(x) + walk(u, x))
    return 1.0 + longest


@dataclass(frozen=True)
class TypePreservation:
    ok: bool
    targets: tuple           # per subgroup: (j, g) with 1-based j, or None
    failing: int | None = None

    def __bool__(self):
        return self.ok

    def to_dict(self, alphabet: Alphabet) -> dict:
        return {
            "ok": self.ok,
            "failing": self.failing,
            "targets": [None if t is None else {"index": t[0], "conjugator": alphabet.format(t[1])}
                        for t in self.targets],
        }


def _image_core(phi: Endomorphism, gens) -> CoreGraph:
    return stallings_core([phi(w) for w in gens])


def conjugate_target(phi: Endomorphism, family: ParabolicFamily, i: int):
    """``(j, g)`` with ``phi(P_i) <= g P_j g^-1``, least ``j`` then shortest ``g``; or ``None``."""
    image = _image_core(phi, family.generators[i])
    for j, core in enumerate(family.cores):
        g = subgroup_conjugate_into(image, core)
        if g is not None:
            return (j + 1, g)
    return None


def check_strictly_type_preserving(phi: Endomorphism, family: ParabolicFamily) -> TypePreservation:
    targets = []
    failing = None
    for i in range(len(family)):
        t = conjugate_target(phi, family, i)
        targets.append(t)
        if t is None and failing is None:
            failing = i + 1
    return TypePreservation(failing is None, tuple(targets), failing)


@dataclass(frozen=True)
class OrbitReport:
    K: int
    periodic: tuple           # 1-based indices forming the periodic subfamily
    entries: tuple            # per subgroup dicts

    def to_dict(self) -> dict:
        return {"K": self.K, "periodic": list(self.periodic), "subgroups": list(self.entries)}


def parabolic_orbits(phi: Endomorphism, family: ParabolicFamily, k_max: int = 16,
                     check: TypePreservation | None = None) -> OrbitReport:
    """Follow ``P_i -> P_j`` under ``phi`` until it cycles.

    For a periodic ``P`` with period ``p`` and accumulated conjugator ``g``
    (so ``phi^p(P) <= g P g^-1``) the subgroup ``<P, g^-1 t^p>`` of the
    mapping torus is reported; pre-periodic ones point at the periodic
    subgroup they fall into.
    """
    if len(family) == 0:
        return OrbitReport(1, (), ())
    check = check or check_strictly_type_preserving(phi, family)
    if not check.ok:
        raise NotTypePreserving(f"subgroup {check.failing} has no image target")
    A = family.alphabet
    step = {i + 1: check.targets[i] for i in range(len(family))}
    periodic = set()
    period_of = {}
    for i in step:
        seen = [i]
        while True:
            if len(seen) > k_max:
                raise HorizonExceeded(f"orbit of P{i} did not close within {k_max} steps")
            nxt = step[seen[-1]][0]
            if nxt in seen:
                cyc = seen[seen.index(nxt):]
                for c in cyc:
                    periodic.add(c)
                    period_of[c] = len(cyc)
                break
            seen.append(nxt)
    entries = []
    for i in sorted(step):
        if i in periodic:
            p = period_of[i]
            g = _accumulated_conjugator(phi, step, i, p)
            stable = "t" if p == 1 else f"t^{p}"
            letter = stable if not g else f"({A.format(inverse(g))}) {stable}"
            entries.append({
                "index": i,
                "case": "periodic",
                "period": p,
                "conjugator": A.format(g),
                "hnn": f"<{family.names[i - 1]}, {letter}>",
                "relation": _relation_text(A, family, i, g, phi, p, letter),
            })
        else:
            j, walk = i, 0
            while j not in periodic:
                j = step[j][0]
                walk += 1
            entries.append({"index": i, "case": "preperiodic", "steps": walk, "lands_in": j})
    K = 1
    for i in periodic:
        K = K * period_of[i] // math.gcd(K, period_of[i])
    return OrbitReport(K, tuple(sorted(periodic)), tuple(entries))


def _accumulated_conjugator(phi, step, i, p):
    g = ()
    j = i
    for _ in range(p):
        tj, gj = step[j]
        g = kernels.free_reduce(phi(g) + gj)
        j = tj
    return g


def _relation_text(A, family, i, g, phi, p, letter):
    gens = family.generators[i - 1]
    if len(gens) != 1:
        return f"{letter} x {letter}^-1 = {A.format(inverse(g))} phi^{p}(x) {A.format(g)} for x in {family.names[i - 1]}"
    x = gens[0]
    img = kernels.free_reduce(inverse(g) + phi.power(p)(x) + g)
    return f"{letter} [{A.format(x)}] {letter}^-1 = [{A.format(img)}]"


def orbit_by_iteration(phi: Endomorphism, family: ParabolicFamily, i: int, k: int):
    """Brute force: ``g`` with ``phi^k(P_i) <= g P_j g^-1`` found directly for each ``j``."""
    image = _image_core(phi.power(k), family.generators[i - 1])
    hits = []
    for j, core in enumerate(family.cores):
        g = subgroup_conjugate_into(image, core)
        if g is not None:
            hits.append((j + 1, g))
    return hits


# ---------------------------------------------------------------------------
# invariant subgraphs and malnormality


@dataclass(frozen=True)
class FactorChain:
    steps: tuple          # (power, edges before, invariant edges found)
    family: ParabolicFamily | None

    def to_dict(self) -> dict:
        return {
            "steps": [{"power": m, "edges": sorted(before), "invariant": sorted(after)}
                      for (m, before, after) in self.steps],
            "family": None if self.family is None else self.family.to_dict(),
        }


def find_invariant_factor_system(phi: Endomorphism, depth: int = 3) -> FactorChain:
    """Descend through invariant petal sets of the rose maps of ``phi^m``, ``m <= depth``.

    Each step records the petal set before and after; the count strictly
    drops, so at most ``rank`` steps happen.  The result counts as stable
    when the last power tested found nothing new (or one petal is left);
    otherwise ``DepthExhausted`` carries the partial chain.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    A = phi.alphabet
    current = frozenset(range(1, A.rank + 1))
    steps = []
    for m in range(1, depth + 1):
        f = rose_representative(phi.power(m))
        full = transition_matrix(f).data
        while True:
            idx = sorted(current)
            sub = full[np.ix_([i - 1 for i in idx], [i - 1 for i in idx])]
            if not sub.any():
                break
            try:
                ok, witness = is_irreducible(sub)
            except ZeroMatrix:
                break
            if ok:
                break
            found = frozenset(idx[i - 1] for i in witness)
            steps.append((m, current, found))
            current = found
    if steps and steps[-1][0] == depth and len(current) > 1:
        raise DepthExhausted(f"invariant petals still shrinking at power {depth}", chain=tuple(steps))
    if not steps:
        return FactorChain((), None)
    fam = ParabolicFamily(A, (tuple((i,) for i in sorted(current)),))
    return FactorChain(tuple(steps), fam)


def malnormality(family: ParabolicFamily) -> list:
    """Violations ``(i, j, word)``: ``word`` lies in ``P_i`` and a conjugate of ``P_j`` (or twice in ``P_i``)."""
    out = []
    cores = family.cores
    for i in range(len(cores)):
        for j in range(i, len(cores)):
            if i == j:
                loops = fiber_product_loops(cores[i], cores[i], skip_diagonal=True)
            else:
                loops = fiber_product_loops(cores[i], cores[j])
            if loops:
                w = min(loops, key=word_key)
                out.append((i + 1, j + 1, w))
    return out
