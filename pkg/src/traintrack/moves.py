"""Subdivision, folding, valence reductions and the train track driver.

All moves work on a private mutable copy of a graph map (``_Work``) and hand
back fresh ``GraphMap`` values, so callers only ever see immutable data.

Edge labels are kept exact through every move with a gauge: when vertices
are merged the labels of edges at the vanishing vertex are conjugated so
that every loop at the base vertex still reads the same group element.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    BudgetExhausted,
    IllegalFoldRequest,
    NotAVertexImage,
    NotInjective,
    NotIrreducible,
    NotOneGate,
    NotValenceOne,
    NotValenceTwo,
    ZeroMatrix,
)
from .gates import stable_gate_keys
from .graphs import MarkedGraph
from .maps import GraphMap, TransitionMatrix, is_irreducible, rose_representative, terminal_components, transition_matrix
from .spectral import DEFAULT_TOL, PerronData, assign_metric, metric_perron, pf_eigen
from .words import Endomorphism, inverse, is_injective_on_ball

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10_000
STAGNATION_LIMIT = 50
MAX_STALLS = 4


# ---------------------------------------------------------------------------
# move log


@dataclass(frozen=True)
class Move:
    kind: str
    location: dict
    before: tuple | None
    after: tuple | None

    def to_dict(self) -> dict:
        fmt = lambda b: None if b is None else [f"{b[0]:.12f}", f"{b[1]:.12f}"]
        return {"kind": self.kind, "location": self.location, "before": fmt(self.before), "after": fmt(self.after)}


@dataclass
class MoveLog:
    moves: list = field(default_factory=list)

    def __len__(self):
        return len(self.moves)

    def __iter__(self):
        return iter(self.moves)

    def append(self, move: Move):
        self.moves.append(move)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(m.to_dict(), sort_keys=True) + "\n" for m in self.moves)

    def to_list(self) -> list:
        return [m.to_dict() for m in self.moves]


def _lambda_bounds(a: np.ndarray):
    """Enclosure of the spectral radius; Collatz-Wielandt bounds when irreducible."""
    if a.size == 0 or not a.any():
        return (0.0, 0.0)
    ok, _ = is_irreducible(TransitionMatrix.from_array(a))
    if ok:
        p = pf_eigen(a)
        return (p.lower, p.upper)
    rho = float(max(abs(np.linalg.eigvals(a.astype(float)))))
    return (rho - DEFAULT_TOL, rho + DEFAULT_TOL)


# ---------------------------------------------------------------------------
# mutable working copy


class _Work:
    def __init__(self, f: GraphMap):
        g = f.graph
        self.alphabet = g.alphabet
        self.vertices = dict(g.vertices)
        self.edges = dict(g.edges)
        self.labels = dict(g.labels)
        self.names = dict(g.edge_names)
        self.base = g.base
        self.marking = list(g.marking)
        self.images = dict(f.edge_images)
        self.vimg = dict(f.vertex_images)
        self.base_path = tuple(f.base_path)
        self.endo = f.endo
        self.next_edge = max(self.edges, default=0) + 1
        self.next_vertex = max(self.vertices, default=-1) + 1
        self.alias: dict = {}
        self.log = MoveLog()
        self.track_lambda = True
        self.watch: list = []   # directions followed through renamings

    # --- conversion -----------------------------------------------------
    def to_map(self) -> GraphMap:
        g = MarkedGraph(
            alphabet=self.alphabet,
            vertices=dict(sorted(self.vertices.items())),
            edges=dict(sorted(self.edges.items())),
            base=self.base,
            marking=tuple(self.marking),
            labels={e: self.labels[e] for e in sorted(self.edges)},
            lengths=None,
            edge_names={e: self.names.get(e, f"e{e}") for e in sorted(self.edges)},
        )
        return GraphMap(g, dict(sorted(self.vimg.items())), {e: self.images[e] for e in sorted(self.edges)},
                        self.endo, self.base_path)

    # --- incidence --------------------------------------------------------
    def origin(self, d):
        o, t = self.edges[abs(d)]
        return o if d > 0 else t

    def terminus(self, d):
        o, t = self.edges[abs(d)]
        return t if d > 0 else o

    def directions(self, v):
        out = []
        for e in sorted(self.edges):
            o, t = self.edges[e]
            if o == v:
                out.append(e)
            if t == v:
                out.append(-e)
        return out

    def image(self, d):
        im = self.images[abs(d)]
        return im if d > 0 else inverse(im)

    def label(self, d):
        w = self.labels[abs(d)]
        return w if d > 0 else inverse(w)

    def path_label(self, path):
        out = []
        for d in path:
            out.extend(self.label(d))
        return kernels.free_reduce(out)

    def resolve(self, v):
        while v in self.alias:
            v = self.alias[v]
        return v

    def matrix(self) -> np.ndarray:
        edges = sorted(self.edges)
        pos = {e: i for i, e in enumerate(edges)}
        a = np.zeros((len(edges), len(edges)), dtype=np.int64)
        for j, e in enumerate(edges):
            for d in self.images[e]:
                a[pos[abs(d)], j] += 1
        return a

    def tree_path(self, target):
        """Some edge path from the base vertex to ``target``."""
        prev = {self.base: None}
        todo = [self.base]
        while todo:
            v = todo.pop(0)
            if v == target:
                break
            for d in self.directions(v):
                u = self.terminus(d)
                if u not in prev:
                    prev[u] = d
                    todo.append(u)
        path = []
        v = target
        while prev[v] is not None:
            d = prev[v]
            path.append(d)
            v = self.origin(d)
        return tuple(reversed(path))

    def loop_witness(self, loop):
        """Group element of a loop, transported to the base vertex."""
        tp = self.tree_path(self.origin(loop[0]))
        return self.path_label(tp + tuple(loop) + inverse(tp))

    # --- bookkeeping --------------------------------------------------------
    def _identity_table(self):
        table = [()] * (self.next_edge + 1)
        for e in self.edges:
            table[e] = (e,)
        return table

    def _substitute_all(self, table):
        sub = kernels.substitute
        self.marking = [sub(m, table) for m in self.marking]
        self.images = {e: sub(im, table) for e, im in self.images.items()}
        self.base_path = sub(self.base_path, table)

    def _regauge(self, potential: dict):
        """Relabel ``w(x) -> P(o) w(x) P(t)^-1``; the base vertex must have trivial potential."""
        for x, (o, t) in self.edges.items():
            if o in potential or t in potential:
                self.labels[x] = kernels.free_reduce(
                    potential.get(o, ()) + self.labels[x] + inverse(potential.get(t, ())))

    def _merge_vertex(self, r, k):
        for e, (o, t) in list(self.edges.items()):
            self.edges[e] = (k if o == r else o, k if t == r else t)
        for v, w in list(self.vimg.items()):
            if w == r:
                self.vimg[v] = k
        del self.vimg[r]
        del self.vertices[r]
        self.alias[r] = k

    def record(self, kind, location, before):
        after = _lambda_bounds(self.matrix()) if self.track_lambda else None
        self.log.append(Move(kind, location, before, after))
        log.debug("%s %s %s -> %s", kind, location, before, after)

    def lam(self):
        return _lambda_bounds(self.matrix()) if self.track_lambda else None

    # --- primitive moves ------------------------------------------------------
    def subdivide(self, e, pos):
        """Split edge ``e`` so its first piece maps onto the first ``pos`` edges of its image."""
        P = self.images[e]
        if not 0 < pos < len(P):
            raise NotAVertexImage(f"position {pos} is not interior to an image of length {len(P)}")
        before = self.lam()
        o, t = self.edges[e]
        v, j = self.next_vertex, self.next_edge
        self.next_vertex += 1
        self.next_edge += 1
        self.vertices[v] = None
        self.vimg[v] = self.terminus(P[pos - 1])
        self.edges[e] = (o, v)
        self.edges[j] = (v, t)
        self.labels[j] = ()
        self.images[e] = P[:pos]
        self.images[j] = P[pos:]
        table = self._identity_table()
        table[e] = (e, j)
        self._substitute_all(table)
        self.watch = [-j if x == -e else x for x in self.watch]
        self.record("subdivide", {"edge": e, "position": pos, "new_edge": j, "new_vertex": v}, before)
        return j, v

    def split_direction(self, d, p):
        """Subdivide so that direction ``d`` maps onto exactly the first ``p`` edges of its image.

        Returns the direction now playing the role of ``d`` and the new edge.
        """
        e = abs(d)
        if d > 0:
            j, _ = self.subdivide(e, p)
            return d, j
        L = len(self.images[e])
        j, _ = self.subdivide(e, L - p)
        return -j, j

    def fold_full(self, d1, d2, protect=()):
        """Identify two directions with equal images."""
        e1, e2 = abs(d1), abs(d2)
        if e1 == e2:
            raise IllegalFoldRequest("a turn needs two distinct edges to fold")
        if self.origin(d1) != self.origin(d2):
            raise IllegalFoldRequest("directions do not share an origin")
        if self.image(d1) != self.image(d2):
            raise IllegalFoldRequest("full fold needs equal images")
        t1, t2 = self.terminus(d1), self.terminus(d2)
        if t1 == t2:
            raise NotInjective("folding would kill a nontrivial loop", witness=self.loop_witness((d1, -d2)))
        before = self.lam()
        delta = kernels.free_reduce(inverse(self.label(d1)) + self.label(d2))
        protected = [self.base] + [self.resolve(p) for p in protect]
        rank_of = lambda v: protected.index(v) if v in protected else len(protected)
        if rank_of(t2) < rank_of(t1):
            keep, remove, potential = t2, t1, inverse(delta)
        else:
            keep, remove, potential = t1, t2, delta
        self._regauge({remove: potential})
        del self.edges[e2], self.labels[e2], self.images[e2]
        self.names.pop(e2, None)
        table = self._identity_table()
        table[e2] = (d1,) if d2 > 0 else (-d1,)
        self._merge_vertex(remove, keep)
        self._substitute_all(table)
        rename = {d2: d1, -d2: -d1}
        self.watch = [rename.get(x, x) for x in self.watch]
        self.record("fold", {"directions": [d1, d2], "merged_vertex": remove, "into": keep}, before)
        return keep

    def fold_turn(self, d1, d2, protect=()):
        """Fold the maximal common initial segment of the images of a turn."""
        if d1 == d2:
            raise IllegalFoldRequest("degenerate turn")
        if self.origin(d1) != self.origin(d2):
            raise IllegalFoldRequest("directions do not share an origin")
        p = kernels.common_prefix(self.image(d1), self.image(d2))
        if p == 0:
            raise IllegalFoldRequest("images share no initial segment")
        # subdividing edge e turns the direction -e into -j
        if len(self.image(d1)) > p:
            old = abs(d1)
            d1, j = self.split_direction(d1, p)
            if d2 == -old:
                d2 = -j
        n = len(self.image(d1))
        if len(self.image(d2)) > n:
            old = abs(d2)
            d2, j = self.split_direction(d2, n)
            if d1 == -old:
                d1 = -j
        return self.fold_full(d1, d2, protect)

    def collapse(self, d):
        """Collapse oriented edge ``d``: its terminus is merged into its origin."""
        k, r = self.origin(d), self.terminus(d)
        if k == r:
            raise ValueError("cannot collapse a loop")
        if r == self.base:
            raise ValueError("the base vertex cannot be collapsed away")
        before = self.lam()
        e = abs(d)
        self._regauge({r: self.label(d)})
        # homotopy inverse of the collapse, on the surviving edges
        back = {}
        for x, (o, t) in self.edges.items():
            if x == e:
                continue
            back[x] = ((d,) if o == r else ()) + (x,) + ((-d,) if t == r else ())
        ftable = [()] * (self.next_edge + 1)
        for x, im in self.images.items():
            ftable[x] = im
        pi = self._identity_table()
        pi[e] = ()
        new_images = {}
        for x, pre in back.items():
            new_images[x] = kernels.substitute(kernels.substitute(pre, ftable), pi)
        del self.edges[e], self.labels[e], self.images[e]
        self.names.pop(e, None)
        self.images = new_images
        self.marking = [kernels.substitute(m, pi) for m in self.marking]
        self.base_path = kernels.substitute(self.base_path, pi)
        self._merge_vertex(r, k)
        self.watch = [None if x is not None and abs(x) == e else x for x in self.watch]
        self.record("collapse", {"edge": e, "removed_vertex": r, "into": k}, before)

    def rebase(self, sigma):
        """Move the base vertex to the end of the path ``sigma``."""
        sigma = tuple(sigma)
        b2 = self.terminus(sigma[-1])
        ftable = [()] * (self.next_edge + 1)
        for x, im in self.images.items():
            ftable[x] = im
        self._regauge({b2: self.path_label(sigma)})
        inv = inverse(sigma)
        self.marking = [kernels.free_reduce(inv + m + sigma) for m in self.marking]
        self.base_path = kernels.free_reduce(inv + self.base_path + kernels.substitute(sigma, ftable))
        self.base = b2

    # --- composite moves --------------------------------------------------
    def remove_valence_one(self, v):
        if v not in self.vertices or self.vertices[v] is not None:
            raise NotValenceOne(f"vertex {v} is not a free vertex")
        dirs = self.directions(v)
        if len(dirs) != 1:
            raise NotValenceOne(f"vertex {v} has valence {len(dirs)}")
        d = dirs[0]
        if v == self.base:
            self.rebase((d,))
        self.collapse(-d)

    def remove_valence_two(self, v, weights):
        if v not in self.vertices or self.vertices[v] is not None:
            raise NotValenceTwo(f"vertex {v} is not a free vertex")
        dirs = self.directions(v)
        if len(dirs) != 2 or abs(dirs[0]) == abs(dirs[1]):
            raise NotValenceTwo(f"vertex {v} is not a removable valence-two vertex")
        # collapse the edge with the larger entry of the right eigenvector of
        # the transition matrix; ties go to the lower edge id
        dy = max(dirs, key=lambda d: (round(weights.get(abs(d), 1.0), 9), -abs(d)))
        if v == self.base:
            self.rebase((dy,))
        self.collapse(-dy)

    def pretrivial_edges(self):
        """Edges from which no cycle of the transition digraph can be reached."""
        bad = {e for e, im in self.images.items() if not im}
        changed = True
        while changed:
            changed = False
            for e, im in self.images.items():
                if e not in bad and all(abs(x) in bad for x in im):
                    bad.add(e)
                    changed = True
        return bad

    def collapse_forest(self, edges):
        """Collapse a set of edges spanning a forest, one edge at a time."""
        todo = set(edges)
        while todo:
            e = min(todo)
            todo.discard(e)
            if e not in self.edges:
                continue
            o, t = self.edges[e]
            if o == t:
                raise NotInjective("an invariant forest contains a loop", witness=self.loop_witness((e,)))
            if t == self.base or (o != self.base and t < o):
                self.collapse(-e)
            else:
                self.collapse(e)

    def forest_components(self, edges):
        """Split an edge set into graph components; report whether each is a tree."""
        parent = {}

        def find(x):
            while parent.setdefault(x, x) != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        cyclic_edge = {}
        for e in sorted(edges):
            o, t = self.edges[e]
            a, b = find(o), find(t)
            if a == b:
                cyclic_edge[e] = True
            else:
                parent[a] = b
        comps: dict = {}
        for e in sorted(edges):
            comps.setdefault(find(self.edges[e][0]), []).append(e)
        out = []
        for es in comps.values():
            loops = [e for e in es if cyclic_edge.get(e)]
            out.append((es, loops))
        return out

    def collapse_pretrivial(self) -> bool:
        bad = self.pretrivial_edges()
        if not bad:
            return False
        for es, loops in self.forest_components(bad):
            if loops:
                cyc = self._cycle_through(es, loops[0])
                raise NotInjective("a loop is killed by a power of the map", witness=self.loop_witness(cyc))
        self.collapse_forest(bad)
        return True

    def _cycle_through(self, es, e):
        """A closed edge path through ``e`` using only edges of ``es``."""
        o, t = self.edges[e]
        if o == t:
            return (e,)
        adj: dict = {}
        for x in es:
            if x == e:
                continue
            a, b = self.edges[x]
            adj.setdefault(a, []).append((x, b))
            adj.setdefault(b, []).append((-x, a))
        prev = {t: None}
        todo = [t]
        while todo:
            v = todo.pop(0)
            for d, u in adj.get(v, []):
                if u not in prev:
                    prev[u] = (d, v)
                    todo.append(u)
        path, v = [], o
        while prev[v] is not None:
            d, v = prev[v]
            path.append(d)
        return (e,) + tuple(reversed(path))

    def remove_all_valence_one(self) -> bool:
        changed = False
        while True:
            ones = [v for v in sorted(self.vertices) if self.vertices[v] is None and len(self.directions(v)) == 1]
            if not ones:
                return changed
            self.remove_valence_one(ones[0])
            changed = True

    # --- gates --------------------------------------------------------------
    def gate_keys(self):
        df = {}
        for e, im in self.images.items():
            df[e] = im[0]
            df[-e] = -im[-1]
        dirs = sorted(df, key=lambda d: (abs(d), d < 0))
        stable = stable_gate_keys(dirs, df)
        return df, {d: (self.origin(d), stable[d]) for d in dirs}

    def illegal_image_turns(self, key):
        out = []
        for e in sorted(self.images):
            im = self.images[e]
            for k in range(1, len(im)):
                a, b = -im[k - 1], im[k]
                if a != b and key[a] == key[b]:
                    out.append((e, k, a, b))
        return out


# ---------------------------------------------------------------------------
# public single moves


def _finish(w: _Work) -> GraphMap:
    return w.to_map()


def subdivide(f: GraphMap, edge: int, position: int) -> GraphMap:
    """Subdivide ``edge`` at the point mapping to the vertex after ``position`` image edges."""
    w = _Work(f)
    w.subdivide(edge, position)
    return _finish(w)


def fold(f: GraphMap, turn) -> GraphMap:
    """Fold a turn whose images share an initial segment, then collapse pretrivial edges."""
    d1, d2 = turn
    w = _Work(f)
    w.fold_turn(d1, d2)
    w.collapse_pretrivial()
    return _finish(w)


def remove_valence_one(f: GraphMap, vertex: int) -> GraphMap:
    w = _Work(f)
    w.remove_valence_one(vertex)
    w.collapse_pretrivial()
    return _finish(w)


def collapse_weights(f: GraphMap) -> dict:
    """Right Perron-Frobenius eigenvector of the transition matrix, by edge id.

    This (not the metric, which is the left eigenvector) is what decides
    which edge at a valence-two vertex to collapse without raising the
    stretch factor.  Reducible maps get equal weights.
    """
    M = transition_matrix(f)
    try:
        p = pf_eigen(M)
    except (NotIrreducible, ZeroMatrix):
        return {e: 1.0 for e in M.edges}
    return dict(zip(M.edges, p.eigenvector))


def remove_valence_two(f: GraphMap, vertex: int) -> GraphMap:
    """Remove a valence-two vertex, collapsing the edge with the larger eigenvector entry."""
    w = _Work(f)
    w.remove_valence_two(vertex, collapse_weights(f))
    w.collapse_pretrivial()
    return _finish(w)


def fix_one_gate_vertex(f: GraphMap, vertex: int) -> GraphMap:
    """Fold together all directions at a vertex with a single gate, then drop the resulting valence-one vertex."""
    w = _Work(f)
    _fix_one_gate(w, vertex)
    w.collapse_pretrivial()
    w.remove_all_valence_one()
    return _finish(w)


def _fix_one_gate(w: _Work, v):
    _, key = w.gate_keys()
    dirs = w.directions(v)
    if len(dirs) < 2 or len({key[d] for d in dirs}) != 1:
        raise NotOneGate(f"vertex {v} does not have exactly one gate")
    steps = 0
    while True:
        v = w.resolve(v)
        if v not in w.vertices:
            return
        dirs = w.directions(v)
        if len(dirs) < 2:
            break
        df = {d: w.image(d)[0] for d in dirs}
        pair = next(((a, b) for i, a in enumerate(dirs) for b in dirs[i + 1:] if df[a] == df[b] and abs(a) != abs(b)), None)
        if pair is None:
            if len(set(df.values())) == 1 or steps:
                break
            # one gate but Df differs at this vertex: fold down the direction chain
            _, key = w.gate_keys()
            a, b = dirs[0], dirs[1]
            _fold_chain(w, a, b, key)
            return
        w.fold_turn(pair[0], pair[1], protect=(v,))
        steps += 1
        w.collapse_pretrivial()
    v = w.resolve(v)
    if v in w.vertices and len(w.directions(v)) == 1:
        w.remove_valence_one(v)


def _last_turn(w: _Work, a, b, limit):
    """Follow ``(Df^j a, Df^j b)`` and return the last turn before it degenerates, or None."""
    for _ in range(limit):
        x, y = w.image(a)[0], w.image(b)[0]
        if x == y:
            return a, b
        a, b = x, y
    return None


def _fold_chain(w: _Work, a, b, key):
    """Fold the turn ``(a, b)`` down to a single direction.

    With ``T_j = (Df^j a, Df^j b)`` degenerating first at ``j = k``, fold
    ``T_(k-1)``; that makes ``T_(k-2)`` foldable, and so on back to
    ``(a, b)`` itself.  The directions are followed through the renamings
    that subdivisions and folds cause.
    """
    limit = 4 * len(key) + 4
    w.watch = [a, b]
    try:
        while True:
            a, b = w.watch
            if a is None or b is None or a == b:
                return
            turn = _last_turn(w, a, b, limit)
            if turn is None:
                return  # earlier folds made the turn legal
            x, y = turn
            w.fold_turn(x, y)
            if (x, y) == (a, b):
                return
    finally:
        w.watch = []


def _fold_illegal_image_turn(w: _Work, e, k, key):
    """Remove the illegal turn after position ``k`` of the image of edge ``e``.

    The edge is first split at the point mapping onto that turn, giving a
    valence-two vertex whose turn maps onto it.  Folding the direction chain
    of that turn leaves the new vertex with valence one, and removing it
    lowers the stretch factor.
    """
    j, _ = w.subdivide(e, k)
    _fold_chain(w, -e, j, key)


# ---------------------------------------------------------------------------
# driver


@dataclass
class TrainTrackResult:
    map: GraphMap
    perron: PerronData
    log: MoveLog
    gates: object = None

    @property
    def lambda_(self) -> float:
        return self.perron.lambda_


def _ball_radius(rank: int, cap: int = 5000, longest: int = 10) -> int:
    r, total = 1, 2 * rank
    while r < longest:
        nxt = total + 2 * rank * (2 * rank - 1) ** r
        if nxt > cap:
            return r
        total, r = nxt, r + 1
    return r


def train_track_algorithm(phi: Endomorphism, budget: int = DEFAULT_BUDGET, state: GraphMap | None = None,
                          tol: float = DEFAULT_TOL) -> TrainTrackResult:
    """Run folds and valence reductions until the map is a train track.

    Raises ``NotIrreducible`` (with an invariant edge set) when the map has a
    nontrivial invariant subgraph, ``NotInjective`` when a loop is killed,
    and ``BudgetExhausted`` when more than ``budget`` moves are needed; the
    exception's ``state`` can be passed back as ``state`` to continue.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    dead = [i for i, im in enumerate(phi.images, 1) if not im]
    if dead:
        raise NotInjective("a generator maps to the identity", witness=(dead[0],))
    screen = is_injective_on_ball(phi, _ball_radius(phi.alphabet.rank))
    if screen is not True:
        raise NotInjective("a short word maps to the identity", witness=screen)
    f = state if state is not None else rose_representative(phi)
    w = _Work(f)
    rotation = 0
    neutral = 0
    stalls = 0
    while True:
        if len(w.log) > budget:
            raise BudgetExhausted(f"no train track within {budget} moves", state=w.to_map())
        _normalize(w)
        if all(len(im) == 1 for im in w.images.values()):
            g = w.to_map()
            n = len(g.graph.edges)
            perron = PerronData(1.0, 0.0, (1.0,) * n, tol, 1.0, 1.0)
            g = g.with_graph(g.graph.with_lengths({e: 1.0 for e in g.graph.edges}))
            return TrainTrackResult(g, perron, w.log)
        g = w.to_map()
        twos = [v for v in sorted(w.vertices) if w.vertices[v] is None and len(w.directions(v)) == 2
                and len({abs(d) for d in w.directions(v)}) == 2]
        if twos:
            before = len(w.log)
            w.remove_valence_two(twos[0], collapse_weights(g))
            neutral, gained = _update_neutral(w, before, neutral)
            stalls = 0 if gained else stalls
            continue
        df, key = w.gate_keys()
        illegal = w.illegal_image_turns(key)
        before = len(w.log)
        if illegal:
            e, k, a, b = illegal[rotation % len(illegal)]
            _fold_illegal_image_turn(w, e, k, key)
        else:
            one_gate = [v for v in sorted(w.vertices) if len({key[d] for d in w.directions(v)}) < 2]
            if not one_gate:
                perron = metric_perron(g, tol)
                g = assign_metric(g, perron)
                from .gates import gate_structure
                return TrainTrackResult(g, perron, w.log, gate_structure(g))
            _fix_one_gate(w, one_gate[0])
        neutral, gained = _update_neutral(w, before, neutral)
        stalls = 0 if gained else stalls
        if neutral >= STAGNATION_LIMIT:
            rotation += 1
            stalls += 1
            neutral = 0
            log.info("no stretch factor progress in %d moves; rotating the folding target", STAGNATION_LIMIT)
            w.log.append(Move("stagnation", {"rotation": rotation}, None, None))
            if stalls > max(MAX_STALLS, 2 * len(illegal)):
                # every target has been tried without lowering the stretch factor
                raise BudgetExhausted(f"stretch factor stuck after {len(w.log)} moves", state=w.to_map())


def _update_neutral(w: _Work, start: int, neutral: int):
    gained = False
    for m in w.log.moves[start:]:
        if m.before is None or m.after is None:
            continue
        if m.after[1] < m.before[0]:
            neutral, gained = 0, True
        else:
            neutral += 1
    return neutral, gained


def _normalize(w: _Work):
    """Collapse pretrivial and invariant forests and valence-one vertices; check irreducibility."""
    while True:
        changed = w.collapse_pretrivial()
        changed |= w.remove_all_valence_one()
        if changed:
            continue
        if all(len(im) == 1 for im in w.images.values()):
            return
        a = w.matrix()
        edges = sorted(w.edges)
        comps = terminal_components(TransitionMatrix.from_array(a))
        if len(comps) == 1 and len(comps[0]) == len(edges):
            return
        forests = []
        for comp in comps:
            ids = [edges[i - 1] for i in comp]
            if len(ids) < len(edges) and not any(loops for _, loops in w.forest_components(ids)):
                forests.append(ids)
        if forests:
            w.collapse_forest(forests[0])
            continue
        ok, witness = is_irreducible(TransitionMatrix.from_array(a))
        ids = frozenset(edges[i - 1] for i in witness)
        raise NotIrreducible("the map leaves a proper subgraph invariant", witness=ids, state=w.to_map())
