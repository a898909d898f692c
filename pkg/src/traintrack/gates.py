"""Gate structures, legality, and the cancellation and growth constants."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from . import kernels
from .errors import CollapsedEdgeImage, NoCriticalConstant, NonExpanding, PowerBudgetExhausted, ZeroLength
from .maps import GraphMap, power, transition_matrix
from .words import inverse


def stable_gate_keys(directions: Sequence[int], df: Mapping[int, int]) -> dict:
    """``d -> Df^n(d)`` with ``n`` the number of directions.

    Two directions are identified by some power of ``Df`` exactly when they
    are identified by the ``n``-th power: before both land on cycles of the
    direction map they need at most ``n`` steps, and on cycles ``Df`` is
    injective.
    """
    n = len(directions)
    out = {}
    for d in directions:
        x = d
        for _ in range(n):
            x = df[x]
        out[d] = x
    return out


@dataclass(frozen=True)
class GateStructure:
    gates: Mapping[int, tuple]          # vertex -> tuple of gates (tuples of directions)
    df: Mapping[int, int]
    key: Mapping[int, tuple] = field(repr=False)

    def gate_of(self, d: int) -> tuple:
        return self.key[d]

    def same_gate(self, d1: int, d2: int) -> bool:
        return self.key[d1] == self.key[d2]

    def is_legal_turn(self, d1: int, d2: int) -> bool:
        return d1 != d2 and self.key[d1] != self.key[d2]

    def num_gates(self, v: int) -> int:
        return len(self.gates[v])

    def to_dict(self, graph=None) -> dict:
        name = graph.name if graph is not None else str
        return {
            "gates": {str(v): [[name(d) for d in g] for g in gs] for v, gs in sorted(self.gates.items())},
            "df": {name(d): name(x) for d, x in sorted(self.df.items(), key=lambda kv: (abs(kv[0]), kv[0] < 0))},
        }


def direction_map(f: GraphMap) -> dict:
    df = {}
    for e, im in f.edge_images.items():
        if not im:
            raise CollapsedEdgeImage(f"edge {e} maps to a vertex")
        df[e] = im[0]
        df[-e] = -im[-1]
    return df


def gate_structure(f: GraphMap) -> GateStructure:
    """Gates of ``f``: directions at a vertex eventually identified by ``Df``."""
    g = f.graph
    df = direction_map(f)
    dirs = sorted(df, key=lambda d: (abs(d), d < 0))
    stable = stable_gate_keys(dirs, df)
    key = {d: (g.origin(d), stable[d]) for d in dirs}
    gates = {}
    for v in sorted(g.vertices):
        groups: dict = {}
        for d in g.directions(v):
            groups.setdefault(key[d], []).append(d)
        gates[v] = tuple(sorted((tuple(x) for x in groups.values()), key=lambda t: (abs(t[0]), t[0] < 0)))
    return GateStructure(gates, df, key)


def path_turns(path: Sequence[int], cyclic: bool = False):
    """Turns crossed by a path as ``(position, d1, d2)``; ``position`` is the index after the turn."""
    out = [(k, -path[k - 1], path[k]) for k in range(1, len(path))]
    if cyclic and len(path) > 1:
        out.append((0, -path[-1], path[0]))
    elif cyclic and len(path) == 1:
        out.append((0, -path[0], path[0]))
    return out


def illegal_turns(path: Sequence[int], gates: GateStructure, cyclic: bool = False) -> list:
    """Positions ``k`` where the turn between ``path[k-1]`` and ``path[k]`` is illegal."""
    return [k for k, a, b in path_turns(path, cyclic) if a != b and gates.same_gate(a, b)]


def illegal_count(path: Sequence[int], gates: GateStructure, cyclic: bool = False) -> int:
    """Number of illegal turns ``i(path)``."""
    return len(illegal_turns(path, gates, cyclic))


def is_legal(path: Sequence[int], gates: GateStructure, cyclic: bool = False) -> bool:
    return not illegal_turns(path, gates, cyclic)


def legal_segments(path: Sequence[int], gates: GateStructure):
    """Split a path at its illegal turns into maximal legal pieces ``(start, stop)``."""
    cuts = [0] + illegal_turns(path, gates) + [len(path)]
    return [(a, b) for a, b in zip(cuts, cuts[1:]) if b > a]


def train_track_report(f: GraphMap, gates: GateStructure | None = None) -> dict:
    """Check the train track conditions; returns the failures found (empty lists when fine)."""
    gs = gates or gate_structure(f)
    g = f.graph
    illegal_edges = [e for e in g.edge_ids if illegal_turns(f.edge_images[e], gs)]
    one_gate = [v for v in sorted(g.vertices) if gs.num_gates(v) < 2]
    collisions = []
    for v in sorted(g.vertices):
        groups = gs.gates[v]
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                a, b = gs.df[groups[i][0]], gs.df[groups[j][0]]
                if gs.same_gate(a, b):
                    collisions.append((v, groups[i][0], groups[j][0]))
    return {"illegal_edges": illegal_edges, "one_gate_vertices": one_gate, "gate_collisions": collisions}


def is_train_track(f: GraphMap, gates: GateStructure | None = None) -> bool:
    rep = train_track_report(f, gates)
    return not any(rep.values())


# ---------------------------------------------------------------------------
# bounded cancellation and the derived constants

MAX_POWER = 8


def _is_isometric(f: GraphMap) -> bool:
    return all(len(im) == 1 for im in f.edge_images.values())


_BOTTOM = 0     # stack bottom; edge letters are nonzero
_EPS = None


def _reachable_stacks(f: GraphMap, d: int):
    """Automaton for the image subtree of everything leaving through ``d``.

    Tracing ``f`` along a path is a pushdown system: the control state is a
    position inside an edge image and the stack holds the reduced image so
    far, last edge on top.  Reachable stacks form a regular language, built
    here by post* saturation.  Returns ``(starts, out)``: ``out[s]`` lists
    ``(letter, target)`` pairs and every accepted word (top first) ends in
    ``_BOTTOM`` at ``"F"``.
    """
    g = f.graph

    def rules(p, top):
        e, i = p
        im = f.image(e)
        if i < len(im):
            x = im[i]
            nxt = (e, i + 1)
            if top == -x:
                return [(nxt, ())]
            return [(nxt, (x, top))]
        return [((z, 0), (top,)) for z in g.directions(g.terminus(e)) if z != -e]

    rel = set()
    out: dict = {}
    eps: dict = {}
    eps_into: dict = {}
    work = [((d, 0), _BOTTOM, "F")]
    while work:
        t = work.pop()
        if t in rel:
            continue
        rel.add(t)
        p, top, q = t
        if top is _EPS:
            eps.setdefault(p, set()).add(q)
            eps_into.setdefault(q, set()).add(p)
            for x, q2 in list(out.get(q, ())):
                work.append((p, x, q2))
            continue
        out.setdefault(p, set()).add((top, q))
        for p2, w in rules(p, top):
            if not w:
                work.append((p2, _EPS, q))
            elif len(w) == 1:
                work.append((p2, w[0], q))
            else:
                mid = ("m", p2, w[0])
                work.append((p2, w[0], mid))
                t2 = (mid, w[1], q)
                if t2 not in rel:
                    rel.add(t2)
                    out.setdefault(mid, set()).add((w[1], q))
                    for p3 in eps_into.get(mid, ()):
                        work.append((p3, w[1], q))
    # control states appear only as sources; one epsilon step may follow
    starts = set()
    for p in {t[0] for t in rel if not (isinstance(t[0], tuple) and t[0][0] == "m")}:
        starts.add(p)
        starts.update(eps.get(p, ()))
    return starts, out


def _reversed(auto):
    """Read the stack automaton from the bottom up, i.e. along the path from the root."""
    _, out = auto
    rev: dict = {}
    for s, arrows in out.items():
        for x, t in arrows:
            rev.setdefault(t, {}).setdefault(x, set()).add(s)
    return rev


def _step(rev, states, x):
    nxt = set()
    for s in states:
        nxt.update(rev.get(s, {}).get(x, ()))
    return frozenset(nxt)


def _deepest_common(g, ra, rb) -> float:
    """Longest path word in both image subtrees, in metric length.

    Both languages are closed under prefixes, so a word belongs to one
    exactly when its subset (reading from the root) is non-empty.
    """
    start = (_step(ra, {"F"}, _BOTTOM), _step(rb, {"F"}, _BOTTOM))
    letters = sorted({x for r in (ra, rb) for m in r.values() for x in m if x != _BOTTOM})
    succ: dict = {}
    stack = [start]
    while stack:
        u = stack.pop()
        if u in succ:
            continue
        nbrs = []
        for x in letters:
            a = _step(ra, u[0], x)
            if not a:
                continue
            b = _step(rb, u[1], x)
            if b:
                nbrs.append(((a, b), g.edge_length(x)))
        succ[u] = nbrs
        stack.extend(v for v, _ in nbrs if v not in succ)
    indeg = dict.fromkeys(succ, 0)
    for nbrs in succ.values():
        for v, _ in nbrs:
            indeg[v] += 1
    order = [u for u in succ if indeg[u] == 0]
    best = dict.fromkeys(succ, 0.0)
    k = 0
    while k < len(order):
        u = order[k]
        k += 1
        for v, w in succ[u]:
            best[v] = max(best[v], best[u] + w)
            indeg[v] -= 1
            if indeg[v] == 0:
                order.append(v)
    if len(order) < len(succ):
        raise NonExpanding("cancellation grows without bound")
    return max(best.values())


def bcc_constant(f: GraphMap) -> float:
    """Largest metric length cancelled where ``[f(alpha)]`` meets ``[f(beta)]``.

    For a turn ``(x, y)`` at a vertex, the cancellation over all tight
    ``alpha``, ``beta`` leaving through ``x`` and ``y`` is the depth of the
    overlap of the two image subtrees, read off the product of their stack
    automata.  A cycle in that product means cancellation is unbounded.
    """
    if _is_isometric(f):
        return 0.0
    g = f.graph
    M = transition_matrix(f)
    from .spectral import pf_eigen
    if pf_eigen(M).lambda_ <= 1.0 + 1e-12:
        raise NonExpanding("bounded cancellation needs a stretch factor above 1")
    autos = {}
    best = 0.0
    for v in sorted(g.vertices):
        dirs = g.directions(v)
        for x in dirs:
            if x not in autos:
                autos[x] = _reversed(_reachable_stacks(f, x))
        for i, x in enumerate(dirs):
            for y in dirs[i + 1:]:
                if x != y:
                    best = max(best, _deepest_common(g, autos[x], autos[y]))
    return best


def _short_cancellation(f: GraphMap) -> float:
    """Cancellation realised by legs of at most two edges: a cheap lower bound for ``bcc_constant``."""
    g = f.graph
    best = 0.0
    for v in sorted(g.vertices):
        dirs = g.directions(v)
        imgs = {}
        for x in dirs:
            legs = [(x,)] + [(x, z) for z in g.directions(g.terminus(x)) if z != -x]
            imgs[x] = [f.apply(leg) for leg in legs]
        for i, x in enumerate(dirs):
            for y in dirs[i + 1:]:
                for a in imgs[x]:
                    for b in imgs[y]:
                        c = kernels.common_prefix(a, b)
                        if c:
                            best = max(best, g.path_length(b[:c]))
    return best


def junction_cancellation(f: GraphMap, alpha, beta) -> float:
    """Metric length cancelled between ``[f(alpha)]`` and ``[f(beta)]``."""
    fa = f.apply(alpha)
    fb = f.apply(beta)
    c = kernels.common_prefix(inverse(fa), fb)
    return f.graph.path_length(fb[:c])


@dataclass(frozen=True)
class Constants:
    lambda_: float
    C_bcl: float
    C_transversality: float = 1.0
    critical: float | None = None
    nu: float | None = None
    K_li: float | None = None
    M_nielsen: int | None = None
    power: int = 1
    expanding: bool = True
    map: GraphMap | None = field(default=None, repr=False, compare=False)
    power_ok: bool = True

    def to_dict(self) -> dict:
        def dec(x):
            return None if x is None else f"{x:.12f}"

        return {
            "lambda": dec(self.lambda_),
            "C_bcl": dec(self.C_bcl),
            "C_transversality": dec(self.C_transversality),
            "critical": dec(self.critical),
            "nu": dec(self.nu),
            "K_li": dec(self.K_li),
            "M_nielsen": self.M_nielsen,
            "power": self.power,
            "expanding": self.expanding,
            "power_ok": self.power_ok,
        }


def _derived(lam: float, C: float, c_tr: float):
    K = lam / c_tr
    if K <= 1:
        return None, None
    return 2 * C / (K - 1), 1 - 2 * C / (K - 1)


def length_illegal_constant(critical: float, min_length: float) -> float:
    """Two-sided constant relating length to illegal-turn count.

    A path with ``i`` illegal turns and every legal piece shorter than the
    critical length has at most ``i + 1 <= 2i`` pieces, so its length is
    below ``2 i C(f)``; it also crosses more than ``i`` edges.
    """
    return max(2 * critical, 1.0 / min_length, 1.0)


def length_illegal_ratio(path: Sequence[int], graph, gates: GateStructure) -> float | None:
    """Smallest ``K`` with ``i/K <= l <= K i`` for this path, or None when ``i = 0``."""
    i = illegal_count(path, gates)
    if i == 0:
        return None
    l = graph.path_length(path)
    return max(l / i, i / l)


def verify_length_illegal(consts: Constants, paths, threshold: float | None = None):
    """Check the length/illegal-turn bound on paths with only short legal pieces.

    Paths with no illegal turn, or with a legal piece at least ``threshold``
    long (default: the critical constant), are skipped.  On a violation
    ``K_li`` is raised to the worst observed ratio and everything is checked
    again.  Returns ``(constants, checked, violations before tightening)``.
    """
    f = consts.map
    gates = gate_structure(f)
    graph = f.graph
    limit = consts.critical if threshold is None else threshold
    if limit is None:
        raise NoCriticalConstant("critical constant undefined")
    ratios = []
    for path in paths:
        if any(graph.path_length(path[a:b]) >= limit for a, b in legal_segments(path, gates)):
            continue
        r = length_illegal_ratio(path, graph, gates)
        if r is not None:
            ratios.append(r)
    bad = [r for r in ratios if r > consts.K_li]
    if bad:
        consts = replace(consts, K_li=max(bad))
    return consts, len(ratios), bad


def constants(f: GraphMap, C_tr: float = 1.0, M_nielsen: int | None = None,
              max_power: int = MAX_POWER, strict: bool = True) -> Constants:
    """All constants for a train track map, raising its power when needed.

    When ``lambda / C_tr <= 1`` or ``nu <= 0`` the map is replaced by the
    least power ``f^k`` (``k <= max_power``) with
    ``lambda^k > max(C_tr, 2 C_bcl(f^k) + 1)`` and ``nu > 0``; the metric is
    kept, since ``f^k`` stretches it by ``lambda^k``.

    If no power qualifies, ``PowerBudgetExhausted`` carries a ``fallback``:
    the least power with ``lambda^k > C_tr`` (critical constant defined,
    ``nu`` possibly negative), flagged ``power_ok=False``.  With
    ``strict=False`` that fallback is returned instead of raising.
    """
    if C_tr < 1:
        raise ValueError("transversality constant must be at least 1")
    from .spectral import assign_metric, metric_perron
    if _is_isometric(f):
        return Constants(1.0, 0.0, C_tr, None, None, None, M_nielsen, 1, False, f)
    pf = metric_perron(f)
    lam = pf.lambda_
    if lam <= 1.0 + 1e-12:
        return Constants(lam, 0.0, C_tr, None, None, None, M_nielsen, 1, False, f)
    f = assign_metric(f, pf)
    fallback = None
    for k in range(1, max_power + 1):
        fk = power(f, k)
        lam_k = lam ** k
        if lam_k <= C_tr:
            continue
        if fallback is not None:
            # skip the exact constant when a lower bound already rules this power out
            lb = _short_cancellation(fk)
            if not (lam_k > 2 * lb + 1 and lam_k / C_tr - 1 > 2 * lb):
                continue
        C = bcc_constant(fk)
        critical, nu = _derived(lam_k, C, C_tr)
        K_li = length_illegal_constant(critical, fk.graph.min_edge_length())
        found = Constants(lam_k, C, C_tr, critical, nu, K_li, M_nielsen, k, True, fk)
        if fallback is None:
            fallback = replace(found, power_ok=False)
        if nu <= 0:
            continue
        if k > 1 and not lam_k > max(C_tr, 2 * C + 1):
            continue
        return found
    if fallback is None:
        fallback = Constants(lam, bcc_constant(f), C_tr, None, None, None, M_nielsen, 1, True, f, power_ok=False)
    if not strict:
        return fallback
    err = PowerBudgetExhausted(f"no power up to {max_power} makes the critical constant usable")
    err.fallback = fallback
    raise err


def leg_fraction(path: Sequence[int], f: GraphMap, consts: Constants, gates: GateStructure | None = None,
                 family=None) -> float:
    """Share of the (coned) length of ``path`` lying in legal pieces at least ``C(f)`` long."""
    if not path:
        raise ZeroLength("empty path has no length")
    if consts.critical is None:
        raise NoCriticalConstant("critical constant undefined")
    gs = gates or gate_structure(f)
    if family is None:
        measure = f.graph.path_length
    else:
        from .parabolic import coned_length

        def measure(p):
            return coned_length(p, family, f.graph)
    total = measure(path)
    if total <= 0:
        raise ZeroLength("path has zero coned length")
    good = 0.0
    for a, b in legal_segments(path, gs):
        piece = tuple(path[a:b])
        if f.graph.path_length(piece) >= consts.critical - 1e-12:
            good += measure(piece)
    return min(1.0, good / total)
