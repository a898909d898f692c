"""Growth of elements, Nielsen paths, atoroidal scans and the flaring check."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from . import kernels
from .errors import GroupIsZ, NoCriticalConstant, NonExpanding, TrivialElement
from .gates import Constants, gate_structure, illegal_count, illegal_turns, is_legal
from .graphs import tighten
from .maps import GraphMap, power
from .parabolic import ParabolicFamily, _run_ends, coned_length
from .words import Endomorphism, cyclic_reduce, cyclic_words, inverse, power as word_power

FLARE_EPSILON = 0.1
STABILIZE = 0.1
LENGTH_CAP = 200_000


def loop_of(f: GraphMap, g: Sequence[int]):
    """Cyclically tight loop in the domain graph representing the class of ``g``."""
    core, _ = cyclic_reduce(g)
    if not core:
        raise TrivialElement("the identity has no loop")
    return kernels.cyclic_reduce(f.graph.marking_path(core))[0]


def iterate_loop(f: GraphMap, loop):
    return kernels.cyclic_reduce(f.apply(loop))[0]


def cyclic_legal_segments(loop, gates):
    """Maximal legal pieces of a cyclic loop as index lists (a fully legal loop is one piece)."""
    n = len(loop)
    bad = illegal_turns(loop, gates, cyclic=True)
    if not bad:
        return [list(range(n))]
    cuts = sorted(bad)
    out = []
    for a, b in zip(cuts, cuts[1:] + [cuts[0] + n]):
        out.append([k % n for k in range(a, b)])
    return out


# ---------------------------------------------------------------------------
# growth


@dataclass(frozen=True)
class GrowthVerdict:
    kind: str                     # "exponential" or "polynomial_up_to_horizon"
    lengths: tuple                # ||phi^n(g)|| for n = 0..horizon (word lengths)
    loop_lengths: tuple           # metric lengths of the loops f^n(g)
    iterate: int | None = None
    segment: tuple | None = None
    segment_length: float | None = None
    horizon: int | None = None
    degree: int | None = None

    def to_dict(self, graph=None) -> dict:
        out = {"kind": self.kind, "lengths": list(self.lengths),
               "loop_lengths": [f"{x:.12f}" for x in self.loop_lengths]}
        if self.kind == "exponential":
            seg = graph.format_path(self.segment) if graph is not None else list(self.segment)
            out.update(iterate=self.iterate, segment=seg, segment_length=f"{self.segment_length:.12f}",
                       horizon=self.horizon, computed_to=len(self.lengths) - 1)
        else:
            out.update(horizon=self.horizon, degree=self.degree)
        return out


def fit_degree(seq: Sequence[int], threshold: float = STABILIZE):
    """Polynomial degree from iterated differences.

    Degree ``d`` is the least one whose ``(d+1)``-st differences, on the last
    three terms, are within ``threshold`` of the ``d``-th differences in size
    (zero for exact polynomial sequences).  ``None`` when no level settles.
    """
    diffs = [list(seq)]
    while len(diffs[-1]) > 3:
        d = diffs[-1]
        diffs.append([b - a for a, b in zip(d, d[1:])])
    for k in range(len(diffs) - 1):
        cur, nxt = diffs[k][-3:], diffs[k + 1][-3:]
        if len(nxt) < 3:
            break
        size = max(abs(x) for x in cur) or 1
        if all(abs(x) <= threshold * size for x in nxt):
            return k
    return None


def classify_growth(f: GraphMap, g: Sequence[int], horizon: int, consts: Constants,
                    family: ParabolicFamily | None = None) -> GrowthVerdict:
    """Iterate the loop of ``g``; a long legal piece certifies exponential growth.

    ``f`` may be the unpowered train track map even when ``consts`` belong
    to a power: both have the same gates, so a legal piece of ``f`` is legal
    for every power.  Once a certificate exists the iteration stops early if
    the words pass ``LENGTH_CAP`` letters.
    """
    if horizon < 4:
        raise ValueError("horizon must be at least 4")
    loop = loop_of(f, g)
    gates = gate_structure(f)
    phi = f.endo
    graph = f.graph
    word = cyclic_reduce(g)[0]
    lengths = [len(word)]
    loop_lengths = [graph.path_length(loop)]
    cert = None
    for n in range(0, horizon + 1):
        if n > 0:
            if cert is not None and max(len(word), len(loop)) > LENGTH_CAP:
                break
            word = cyclic_reduce(phi(word))[0]
            loop = iterate_loop(f, loop)
            lengths.append(len(word))
            loop_lengths.append(graph.path_length(loop))
        if cert is None and consts.critical is not None and loop:
            for piece in cyclic_legal_segments(loop, gates):
                seg = tuple(loop[k] for k in piece)
                size = coned_length(seg, family, graph)
                if size >= consts.critical and size > 0:
                    cert = (n, seg, size)
                    break
    if cert is not None:
        n, seg, size = cert
        return GrowthVerdict("exponential", tuple(lengths), tuple(loop_lengths), n, seg, size, horizon)
    return GrowthVerdict("polynomial_up_to_horizon", tuple(lengths), tuple(loop_lengths),
                         horizon=horizon, degree=fit_degree(lengths))


# ---------------------------------------------------------------------------
# Nielsen paths


@dataclass(frozen=True)
class NielsenPath:
    path: tuple
    period: int
    translation: tuple        # group element g with f^N(rho~) = g rho~

    def to_dict(self, graph, alphabet) -> dict:
        return {"path": graph.format_path(self.path), "period": self.period,
                "translation": alphabet.format(self.translation)}


@dataclass(frozen=True)
class NielsenReport:
    paths: tuple
    bound: float
    candidates: int
    M_nielsen: int | None

    def to_dict(self, graph, alphabet) -> dict:
        return {"paths": [p.to_dict(graph, alphabet) for p in self.paths],
                "bound": f"{self.bound:.12f}", "candidates": self.candidates, "M_nielsen": self.M_nielsen}


def _legal_rays(f, gates, first, limit):
    """Legal paths starting with edge ``first`` of length at most ``limit``."""
    g = f.graph
    out = []
    stack = [(first,)]
    while stack:
        p = stack.pop()
        if g.path_length(p) > limit + 1e-9:
            continue
        out.append(p)
        last = p[-1]
        for d in g.directions(g.terminus(last)):
            if d != -last and gates.is_legal_turn(-last, d):
                stack.append(p + (d,))
    return out


def _tree_paths(g):
    """Path from the base to each vertex along a breadth-first spanning tree."""
    paths = {g.base: ()}
    queue = [g.base]
    while queue:
        v = queue.pop(0)
        for d in sorted(g.directions(v), key=lambda x: (abs(x), x < 0)):
            w = g.terminus(d)
            if w not in paths:
                paths[w] = paths[v] + (d,)
                queue.append(w)
    return paths


def nielsen_candidates(f: GraphMap, bound: float, gates=None):
    """Paths ``reverse(beta) . beta'`` with legal legs meeting at one illegal turn, length <= bound."""
    gs = gates or gate_structure(f)
    g = f.graph
    seen = set()
    for v in sorted(g.vertices):
        dirs = g.directions(v)
        for x in dirs:
            for y in dirs:
                if x == y or not gs.same_gate(x, y):
                    continue
                left = _legal_rays(f, gs, x, bound)
                right = _legal_rays(f, gs, y, bound)
                for a in left:
                    la = g.path_length(a)
                    for b in right:
                        if la + g.path_length(b) > bound + 1e-9:
                            continue
                        rho = inverse(a) + b
                        key = min(rho, inverse(rho))
                        if key in seen:
                            continue
                        seen.add(key)
                        yield rho


def _fixed_legs(fN: GraphMap, gates, bound: float):
    """Legal paths ``a`` with ``[f^N(a)] = c . a``, as ``(a, c)`` pairs, length <= bound.

    Such an ``a`` ends with an edge ``d`` whose image ends with ``d``, and
    reading the image of ``a`` backwards from there spells ``a`` backwards,
    so ``d`` and the length determine ``a`` completely.
    """
    g = fN.graph
    for d in [x for e in g.edge_ids for x in (e, -e)]:
        im = fN.image(d)
        if not im or im[-1] != d:
            continue
        back = [d]
        stream = list(reversed(im))
        fed = 1
        while True:
            a = tuple(reversed(back))
            if g.path_length(a) > bound + 1e-9 or not is_legal(a, gates):
                break
            img = fN.apply(a)
            yield a, img[:len(img) - len(a)]
            j = len(back)
            while len(stream) <= j and fed < len(back):
                stream.extend(reversed(fN.image(back[fed])))
                fed += 1
            if len(stream) <= j:
                break
            back.append(stream[j])


def enumerate_nielsen_paths(f: GraphMap, consts: Constants, period_max: int = 4) -> NielsenReport:
    """Periodic paths with a single illegal turn and length at most ``2 C_bcl``.

    Endpoints are vertices of the domain graph.  Writing ``rho = a^-1 b`` at
    its illegal turn, ``[f^N(rho)] = rho`` holds exactly when ``f^N(a) = c a``
    and ``f^N(b) = c b`` for one common ``c``, so fixed legs are found one at
    a time and paired by ``c``.  ``candidates`` counts the legs that start in
    a gate with more than one direction.  The translation is read through a
    spanning tree and the base path of ``f^N``.
    """
    if not consts.expanding:
        raise NonExpanding("Nielsen paths need a stretch factor above 1")
    gs = gate_structure(f)
    g = f.graph
    bound = 2 * consts.C_bcl
    tree = _tree_paths(g)
    powers = [power(f, N) for N in range(1, period_max + 1)]
    found = {}
    count = 0
    for N, fN in enumerate(powers, 1):
        groups = {}
        for a, c in _fixed_legs(fN, gs, bound):
            x = a[0]
            v = g.origin(x)
            if not any(y != x and gs.same_gate(x, y) for y in g.directions(v)):
                continue
            if N == 1:
                count += 1
            groups.setdefault((v, c), []).append(a)
        for (v, _), legs in groups.items():
            for a in legs:
                for b in legs:
                    if a[0] == b[0] or not gs.same_gate(a[0], b[0]):
                        continue
                    if g.path_length(a) + g.path_length(b) > bound + 1e-9:
                        continue
                    rho = inverse(a) + b
                    key = min(rho, inverse(rho))
                    if key in found:
                        continue
                    pv = tree[v]
                    trans = kernels.free_reduce(fN.base_path + fN.apply(pv) + inverse(pv))
                    found[key] = NielsenPath(rho, N, g.label(trans))
    found = sorted(found.values(), key=lambda p: (len(p.path), [(abs(d), d < 0) for d in p.path]))
    return NielsenReport(tuple(found), bound, count, nielsen_concatenation_bound(g, [p.path for p in found]))


def nielsen_concatenation_bound(graph, paths) -> int | None:
    """One more than the longest tight chain of the given paths; ``None`` if chains close up."""
    pieces = list(paths) + [inverse(p) for p in paths if inverse(p) not in paths]
    nxt = {i: [j for j, q in enumerate(pieces)
               if graph.terminus(p[-1]) == graph.origin(q[0]) and q[0] != -p[-1]]
           for i, p in enumerate(pieces)}
    memo: dict = {}
    active: set = set()

    def longest(i):
        if i in memo:
            return memo[i]
        if i in active:
            raise _Closed()
        active.add(i)
        best = 1 + max((longest(j) for j in nxt[i]), default=0)
        active.discard(i)
        memo[i] = best
        return best

    try:
        chain = max((longest(i) for i in range(len(pieces))), default=0)
    except _Closed:
        return None
    return chain + 1


class _Closed(Exception):
    pass


# ---------------------------------------------------------------------------
# atoroidal scan


@dataclass(frozen=True)
class AtoroidalWitness:
    g: tuple
    k: int
    d: int

    @property
    def baumslag_solitar(self) -> bool:
        return self.d >= 2

    def to_dict(self, alphabet) -> dict:
        return {"g": alphabet.format(self.g), "k": self.k, "d": self.d, "BS": self.baumslag_solitar}


def atoroidal_scan(phi: Endomorphism, k_max: int, d_max: int, len_max: int) -> AtoroidalWitness | None:
    """First ``(g, k, d)`` in (length, k, d) order with ``phi^k(g)`` conjugate to ``g^d``."""
    if min(k_max, d_max, len_max) < 1:
        raise ValueError("scan bounds must be at least 1")
    A = phi.alphabet
    for L in range(1, len_max + 1):
        for g in cyclic_words(A, L):
            img = g
            for k in range(1, k_max + 1):
                img = cyclic_reduce(phi(img))[0]
                for d in range(1, d_max + 1):
                    if _conjugate(img, word_power(g, d)):
                        return AtoroidalWitness(g, k, d)
    return None


def _conjugate(u, v) -> bool:
    cu, _ = cyclic_reduce(u)
    cv, _ = cyclic_reduce(v)
    if len(cu) != len(cv):
        return False
    if not cu:
        return True
    doubled = cu + cu
    n = len(cu)
    return any(doubled[i:i + n] == cv for i in range(n))


# ---------------------------------------------------------------------------
# flaring


@dataclass(frozen=True)
class FlareCertificate:
    lambda_flare: float
    M: int | None
    max_length: int
    candidates: int
    failures: tuple              # (word, M) pairs failing at the reported/maximal M
    cases: dict
    per_candidate: tuple = field(default=(), repr=False)
    label: str = "evidence over a bounded class of words, not a proof"

    @property
    def valid(self) -> bool:
        return self.M is not None and not self.failures

    def to_dict(self, alphabet) -> dict:
        return {
            "lambda_flare": f"{self.lambda_flare:.12f}",
            "M": self.M,
            "max_length": self.max_length,
            "candidates": self.candidates,
            "valid": self.valid,
            "failures": [alphabet.format(w) for w, _ in self.failures],
            "cases": dict(self.cases),
            "label": self.label,
        }


def cyclic_coned_length(loop, family: ParabolicFamily | None, graph) -> float:
    """Coned length of a cyclic loop, cutting it where no core stretch crosses."""
    loop = tuple(loop)
    if family is None or len(family) == 0 or not loop:
        return graph.path_length(loop)
    n = len(loop)
    cores = family.cores_in(graph)
    if any(c.cyclically_readable(loop) for c in cores):
        return 1.0
    doubled = loop + loop
    covered = [False] * n
    for c in cores:
        ends = _run_ends(doubled, c)
        for j in range(n):
            for b in range(j + 1, min(ends[j], j + n)):
                covered[b % n] = True
    free = [b for b in range(n) if not covered[b]]
    if free:
        r = free[0]
        return coned_length(loop[r:] + loop[:r], family, graph)
    return min(coned_length(loop[r:] + loop[:r], family, graph) for r in range(n))


def _is_parabolic(word, family: ParabolicFamily | None) -> bool:
    if family is None:
        return False
    return any(c.cyclically_readable(word) for c in family.cores)


class _Orbit:
    """Cached iterates ``f^i(loop)`` and their coned lengths."""

    def __init__(self, f, loop, family):
        self.f, self.family = f, family
        self.loops = [loop]
        self.sizes = [cyclic_coned_length(loop, family, f.graph)]

    def size(self, i):
        while len(self.loops) <= i:
            nxt = iterate_loop(self.f, self.loops[-1])
            self.loops.append(nxt)
            self.sizes.append(cyclic_coned_length(nxt, self.family, self.f.graph))
        return self.sizes[i]


def _flares(orbit, M, lam) -> bool:
    return lam * orbit.size(M) <= max(orbit.size(0), orbit.size(2 * M)) + 1e-9


def flare_words(alphabet, max_length: int, family=None):
    for L in range(1, max_length + 1):
        for w in cyclic_words(alphabet, L):
            if not _is_parabolic(w, family):
                yield w


def flare_certificate(f: GraphMap, family: ParabolicFamily | None, lambda_flare: float, M_max: int,
                      max_length: int, consts: Constants, epsilon: float = FLARE_EPSILON) -> FlareCertificate:
    """Least ``M <= M_max`` with the flaring inequality for every hyperbolic class up to ``max_length``.

    ``f`` should be the (possibly powered) map the constants were computed
    for.  Classes conjugate into a family subgroup are parabolic and skipped.
    """
    A = f.endo.alphabet
    if A.rank == 1 and (family is None or len(family) == 0):
        raise GroupIsZ("the group is infinite cyclic")
    if lambda_flare <= 1:
        raise ValueError("lambda_flare must exceed 1")
    if consts.critical is None:
        raise NoCriticalConstant("stretch factor does not beat the transversality constant")
    words = list(flare_words(A, max_length, family))
    orbits = [_Orbit(f, loop_of(f, w), family) for w in words]
    chosen = None
    failures: list = []
    for M in range(1, M_max + 1):
        bad = [(w, M) for w, o in zip(words, orbits) if not _flares(o, M, lambda_flare)]
        if not bad:
            chosen = M
            break
        failures = bad
    cases = {"1": 0, "2": 0, "3": 0, "4": 0}
    rows = []
    if chosen is not None:
        failures = []
        gs = gate_structure(f)
        for w, o in zip(words, orbits):
            mid = o.loops[chosen]
            leg = _cyclic_leg(mid, f, consts, gs, family)
            forward = o.size(2 * chosen) >= lambda_flare * o.size(chosen) - 1e-9
            if leg >= epsilon:
                case = "1" if forward else "2"
            else:
                case = "4" if forward else "3"
            cases[case] += 1
            rows.append((w, leg, case))
    return FlareCertificate(lambda_flare, chosen, max_length, len(words), tuple(failures), cases, tuple(rows))


def _cyclic_leg(loop, f, consts, gates, family) -> float:
    total = cyclic_coned_length(loop, family, f.graph)
    if total <= 0:
        return 0.0
    good = 0.0
    for piece in cyclic_legal_segments(loop, gates):
        seg = tuple(loop[k] for k in piece)
        if f.graph.path_length(seg) >= consts.critical - 1e-12:
            good += coned_length(seg, family, f.graph)
    return min(1.0, good / total)


def resample_flare(f: GraphMap, family, cert: FlareCertificate, count: int, seed: int = 0) -> list:
    """Random hyperbolic words that violate the certificate's ``M``.

    Lengths are drawn from ``max_length + 1 .. 2 max_length``: every shorter
    class was already checked exhaustively.
    """
    A = f.endo.alphabet
    rng = random.Random(seed)
    bad = []
    n = 0
    while n < count:
        L = rng.randint(cert.max_length + 1, 2 * cert.max_length)
        w = []
        while len(w) < L:
            x = rng.choice(A.letters)
            if w and w[-1] == -x:
                continue
            w.append(x)
        w = tuple(w)
        if L > 1 and w[0] == -w[-1]:
            continue
        if _is_parabolic(w, family):
            continue
        n += 1
        if not _flares(_Orbit(f, loop_of(f, w), family), cert.M, cert.lambda_flare):
            bad.append(w)
    return bad


def illegal_turns_nonincreasing(f: GraphMap, path, steps: int = 3, gates=None) -> bool:
    """``i([f(rho)]) <= i(rho)`` along a few iterates."""
    gs = gates or gate_structure(f)
    cur = tighten(tuple(path))
    for _ in range(steps):
        nxt = f.apply(cur)
        if illegal_count(nxt, gs) > illegal_count(cur, gs):
            return False
        cur = nxt
    return True
