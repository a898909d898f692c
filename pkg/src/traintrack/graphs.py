"""Marked graphs, edge paths, and Stallings core graphs.

Edges carry permanent integer ids.  An oriented edge is ``+id`` or ``-id``
and an edge path is a tuple of oriented edges, so tightening a path is the
same free reduction used for words.

Besides the marking (a loop at the base vertex for each generator) every
graph keeps ``labels``: a word per edge such that reading the labels along a
loop at the base vertex gives the group element the loop represents.  It is
the homotopy inverse of the marking and lets maps be checked against the
endomorphism exactly.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from . import kernels
from .errors import EmptyGeneratorSet
from .words import Alphabet, Word, inverse, letter_key, word_key

EdgePath = tuple


def tighten(path: Sequence[int]) -> EdgePath:
    """Remove backtracks ``e, e^-1`` until none are left."""
    return kernels.free_reduce(tuple(path))


@dataclass(frozen=True, eq=False)
class MarkedGraph:
    alphabet: Alphabet
    vertices: Mapping[int, str | None]
    edges: Mapping[int, tuple]
    base: int
    marking: tuple
    labels: Mapping[int, Word]
    lengths: Mapping[int, float] | None = None
    edge_names: Mapping[int, str] = field(default_factory=dict)

    # incidence -------------------------------------------------------
    def origin(self, d: int) -> int:
        o, t = self.edges[abs(d)]
        return o if d > 0 else t

    def terminus(self, d: int) -> int:
        o, t = self.edges[abs(d)]
        return t if d > 0 else o

    def directions(self, v: int) -> list:
        """Oriented edges starting at ``v``, sorted by id then sign."""
        out = []
        for e in sorted(self.edges):
            o, t = self.edges[e]
            if o == v:
                out.append(e)
            if t == v:
                out.append(-e)
        return out

    def valence(self, v: int) -> int:
        return len(self.directions(v))

    def is_free(self, v: int) -> bool:
        return self.vertices[v] is None

    @property
    def edge_ids(self) -> list:
        return sorted(self.edges)

    def rank(self) -> int:
        return len(self.edges) - len(self.vertices) + 1

    # paths -----------------------------------------------------------
    def is_path(self, path: Sequence[int]) -> bool:
        for a, b in zip(path, path[1:]):
            if self.terminus(a) != self.origin(b):
                return False
        return all(abs(d) in self.edges for d in path)

    def edge_length(self, d: int) -> float:
        if self.lengths is None:
            return 1.0
        return self.lengths[abs(d)]

    def path_length(self, path: Sequence[int]) -> float:
        if self.lengths is None:
            return float(len(path))
        lengths = self.lengths
        return sum(lengths[abs(d)] for d in path)

    def min_edge_length(self) -> float:
        if self.lengths is None:
            return 1.0
        return min(self.lengths.values())

    def label(self, path: Sequence[int]) -> Word:
        """Group element read along ``path`` through the edge labels."""
        return kernels.substitute(tuple(path), self.label_table())

    def label_table(self):
        table = [()] * (max(self.edges, default=0) + 1)
        for e, w in self.labels.items():
            table[e] = w
        return table

    def marking_path(self, w: Sequence[int]) -> EdgePath:
        """Tight loop at the base vertex representing the word ``w``."""
        table = ((),) + tuple(self.marking)
        return kernels.substitute(tuple(w), table)

    def name(self, d: int) -> str:
        base = self.edge_names.get(abs(d), f"e{abs(d)}")
        return base if d > 0 else base + "^-1"

    def format_path(self, path: Sequence[int]) -> str:
        return " ".join(self.name(d) for d in path)

    def with_lengths(self, lengths: Mapping[int, float] | None) -> "MarkedGraph":
        return replace(self, lengths=None if lengths is None else dict(lengths))

    # checks ----------------------------------------------------------
    def validate(self) -> None:
        """Raise ``ValueError`` when a structural invariant fails."""
        for e, (o, t) in self.edges.items():
            if o not in self.vertices or t not in self.vertices:
                raise ValueError(f"edge {e} has a missing endpoint")
        if not self._connected():
            raise ValueError("graph is not connected")
        if all(tag is None for tag in self.vertices.values()):
            if self.rank() != self.alphabet.rank:
                raise ValueError("Euler characteristic does not match the alphabet rank")
        for i, loop in enumerate(self.marking, 1):
            if loop and (self.origin(loop[0]) != self.base or self.terminus(loop[-1]) != self.base):
                raise ValueError(f"marking loop {i} is not based at the base vertex")
            if not self.is_path(loop):
                raise ValueError(f"marking loop {i} is not an edge path")
        if self.lengths is not None and any(x <= 0 for x in self.lengths.values()):
            raise ValueError("edge lengths must be positive")

    def marking_is_identity(self) -> bool:
        """Reading labels along each marking loop gives back the generator."""
        return all(self.label(loop) == (i,) for i, loop in enumerate(self.marking, 1))

    def _connected(self) -> bool:
        if not self.vertices:
            return False
        adj: dict = {v: set() for v in self.vertices}
        for o, t in self.edges.values():
            adj[o].add(t)
            adj[t].add(o)
        start = next(iter(self.vertices))
        seen = {start}
        todo = [start]
        while todo:
            v = todo.pop()
            for u in adj[v] - seen:
                seen.add(u)
                todo.append(u)
        return len(seen) == len(self.vertices)

    def to_dict(self) -> dict:
        alpha = self.alphabet
        return {
            "vertices": [{"id": v, "free": tag is None, "tag": tag} for v, tag in sorted(self.vertices.items())],
            "edges": [
                {
                    "id": e,
                    "name": self.edge_names.get(e, f"e{e}"),
                    "origin": o,
                    "terminus": t,
                    "length": None if self.lengths is None else f"{self.lengths[e]:.12f}",
                    "label": alpha.format(self.labels.get(e, ())),
                }
                for e, (o, t) in sorted(self.edges.items())
            ],
            "base": self.base,
            "generators": list(alpha.names),
            "marking": [list(loop) for loop in self.marking],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MarkedGraph":
        alpha = Alphabet(len(doc["generators"]), tuple(doc["generators"]))
        vertices = {int(v["id"]): (None if v.get("free", True) else v.get("tag") or "H") for v in doc["vertices"]}
        edges, labels, lengths, names = {}, {}, {}, {}
        for e in doc["edges"]:
            i = int(e["id"])
            edges[i] = (int(e["origin"]), int(e["terminus"]))
            labels[i] = alpha.parse(e.get("label", ""))
            names[i] = e.get("name", f"e{i}")
            if e.get("length") is not None:
                lengths[i] = float(e["length"])
        return cls(
            alphabet=alpha,
            vertices=vertices,
            edges=edges,
            base=int(doc["base"]),
            marking=tuple(tuple(int(x) for x in loop) for loop in doc["marking"]),
            labels=labels,
            lengths=lengths or None,
            edge_names=names,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def rose(alphabet: Alphabet) -> MarkedGraph:
    """One vertex, one petal per generator, unit lengths, identity marking."""
    n = alphabet.rank
    return MarkedGraph(
        alphabet=alphabet,
        vertices={0: None},
        edges={i: (0, 0) for i in range(1, n + 1)},
        base=0,
        marking=tuple((i,) for i in range(1, n + 1)),
        labels={i: (i,) for i in range(1, n + 1)},
        lengths={i: 1.0 for i in range(1, n + 1)},
        edge_names={i: alphabet.names[i - 1] for i in range(1, n + 1)},
    )


# ---------------------------------------------------------------------------
# Stallings core graphs


class CoreGraph:
    """Folded labelled graph carrying a finitely generated subgroup.

    Letters are signed ints; they are generators of the free group for
    subgroups given by words, or oriented edges of a marked graph when a
    subgroup is pushed into that graph.  ``out[v][x]`` is the endpoint of the
    unique edge labelled ``x`` leaving ``v`` (folded means unique).
    """

    def __init__(self, out: list, base: int, generators: tuple = ()):
        self.out = out
        self.base = base
        self.generators = generators
        self._prune()

    # construction ----------------------------------------------------
    @classmethod
    def from_words(cls, generators: Iterable[Sequence[int]]) -> "CoreGraph":
        gens = [kernels.free_reduce(tuple(g)) for g in generators]
        if not gens:
            raise EmptyGeneratorSet("a subgroup needs at least one generator")
        gens = [g for g in gens if g]
        triples = []
        n = 1
        for g in gens:
            prev = 0
            for k, x in enumerate(g):
                if k == len(g) - 1:
                    nxt = 0
                else:
                    nxt = n
                    n += 1
                if x > 0:
                    triples.append((prev, x, nxt))
                else:
                    triples.append((nxt, -x, prev))
                prev = nxt
        out, base = _fold(n, triples, 0)
        return cls(out, base, tuple(gens))

    # queries -----------------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return len(self.out)

    def arrows(self):
        """Positive-label edges as ``(u, x, v)`` triples."""
        for u, nbrs in enumerate(self.out):
            for x, v in sorted(nbrs.items()):
                if x > 0:
                    yield (u, x, v)

    def num_edges(self) -> int:
        return sum(1 for _ in self.arrows())

    def rank(self) -> int:
        return self.num_edges() - self.num_vertices + 1

    def read(self, start: int, word: Sequence[int], core_only: bool = False):
        """Endpoint of reading ``word`` from ``start``, or ``None`` if it falls off."""
        v = start
        allowed = self.core if core_only else None
        for x in word:
            v = self.out[v].get(x)
            if v is None or (allowed is not None and v not in allowed):
                return None
        return v

    def contains(self, word: Sequence[int]) -> bool:
        w = kernels.free_reduce(tuple(word))
        return self.read(self.base, w) == self.base

    def cyclically_readable(self, word: Sequence[int]) -> bool:
        """Whether a cyclically reduced word labels a closed loop in the core."""
        if not word:
            return True
        return any(self.read(v, word, core_only=True) == v for v in sorted(self.core))

    def _prune(self):
        deg = [0] * len(self.out)
        for u, nbrs in enumerate(self.out):
            deg[u] = len(nbrs)
        alive = set(range(len(self.out)))
        todo = [v for v in alive if deg[v] <= 1]
        while todo:
            v = todo.pop()
            if v not in alive or deg[v] > 1:
                continue
            alive.discard(v)
            for x, u in self.out[v].items():
                if u in alive:
                    deg[u] -= 1
                    if deg[u] <= 1:
                        todo.append(u)
        self.core = frozenset(alive)
        # hair: shortest path from the base to the core
        if not alive:
            self.hair, self.attach = (), None
            return
        prev = {self.base: None}
        q = deque([self.base])
        end = None
        while q:
            v = q.popleft()
            if v in alive:
                end = v
                break
            for x in sorted(self.out[v], key=letter_key):
                u = self.out[v][x]
                if u not in prev:
                    prev[u] = (v, x)
                    q.append(u)
        path = []
        v = end
        while prev[v] is not None:
            v, x = prev[v][0], prev[v][1]
            path.append(x)
        self.hair = tuple(reversed(path))
        self.attach = end

    def core_arrows(self):
        return [(u, x, v) for (u, x, v) in self.arrows() if u in self.core and v in self.core]

    def distances_to(self, target: int) -> dict:
        dist = {target: 0}
        q = deque([target])
        while q:
            v = q.popleft()
            for u in self.out[v].values():
                if u not in dist:
                    dist[u] = dist[v] + 1
                    q.append(u)
        return dist

    def path_label(self, start: int, target: int) -> Word:
        """Shortest, then lexicographically least, label of a path ``start -> target``."""
        dist = self.distances_to(target)
        v, out = start, []
        while v != target:
            for x in sorted(self.out[v], key=letter_key):
                u = self.out[v][x]
                if dist.get(u, -1) == dist[v] - 1:
                    out.append(x)
                    v = u
                    break
        return tuple(out)

    def to_dict(self, alphabet: Alphabet | None = None) -> dict:
        fmt = (lambda w: alphabet.format(w)) if alphabet else list
        return {
            "generators": [fmt(g) for g in self.generators],
            "vertices": self.num_vertices,
            "base": self.base,
            "edges": [[u, (alphabet.letter_name(x) if alphabet else x), v] for (u, x, v) in self.arrows()],
            "core": sorted(self.core),
            "rank": self.rank(),
        }


def _fold(n: int, triples: list, base: int):
    parent = list(range(n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    edges = set(triples)
    changed = True
    while changed:
        changed = False
        edges = {(find(u), x, find(v)) for (u, x, v) in edges}
        seen = {}
        for (u, x, v) in sorted(edges):
            for key, other in (((u, x), v), ((v, -x), u)):
                if key in seen and seen[key] != other:
                    a, b = find(seen[key]), find(other)
                    if a != b:
                        parent[max(a, b)] = min(a, b)
                        changed = True
                else:
                    seen[key] = other
            if changed:
                break
    base = find(base)
    # renumber in breadth-first order from the base for stable output
    adj: dict = {}
    for (u, x, v) in edges:
        adj.setdefault(u, {})[x] = v
        adj.setdefault(v, {})[-x] = u
    order = {base: 0}
    q = deque([base])
    while q:
        v = q.popleft()
        for x in sorted(adj.get(v, {}), key=letter_key):
            u = adj[v][x]
            if u not in order:
                order[u] = len(order)
                q.append(u)
    out = [dict() for _ in order]
    for v, nbrs in adj.items():
        for x, u in nbrs.items():
            out[order[v]][x] = order[u]
    if not out:
        out = [dict()]
    return out, 0


def stallings_core(generators: Iterable[Sequence[int]]) -> CoreGraph:
    """Folded core graph of the subgroup generated by ``generators``."""
    return CoreGraph.from_words(generators)


def subgroup_conjugate_into(P: CoreGraph, Q: CoreGraph):
    """Return ``g`` with ``P <= g Q g^-1`` (shortest, then least), or ``None``.

    Works by immersing the basepoint-free core of ``P`` into the core of ``Q``
    and then transporting basepoints.
    """
    if not P.core:
        return ()  # trivial subgroup sits inside everything
    if not Q.core:
        return None
    c = P.attach
    s = P.hair
    p_arrows = P.core_arrows()
    best = None
    for u in sorted(Q.core):
        if not _immerses(P, c, Q, u, p_arrows):
            continue
        # vertex reached by reading s^-1 from u in the covering space of Q
        v, rest = u, list(inverse(s))
        while rest and rest[0] in Q.out[v]:
            v = Q.out[v][rest.pop(0)]
        tail = inverse(tuple(rest))  # path from the far vertex back to v
        g = kernels.free_reduce(tail + Q.path_label(v, Q.base))
        if best is None or word_key(g) < word_key(best):
            best = g
    return best


def _immerses(P: CoreGraph, c: int, Q: CoreGraph, u: int, p_arrows) -> bool:
    image = {c: u}
    todo = [c]
    core = P.core
    while todo:
        v = todo.pop()
        for x, w in P.out[v].items():
            if w not in core:
                continue
            target = Q.out[image[v]].get(x)
            if target is None or target not in Q.core:
                return False
            if w in image:
                if image[w] != target:
                    return False
            else:
                image[w] = target
                todo.append(w)
    return len(image) == len(core)


def fiber_product_loops(P: CoreGraph, Q: CoreGraph, skip_diagonal: bool = False):
    """Labels of loops in non-tree components of the core fiber product.

    Each returned word ``w`` lies (up to conjugacy) in both subgroups.  With
    ``skip_diagonal`` the component through the diagonal of ``P x P`` is
    ignored, which is what a malnormality check of ``P`` against itself needs.
    """
    verts = [(a, b) for a in sorted(P.core) for b in sorted(Q.core)]
    adj: dict = {v: {} for v in verts}
    for (a, x, a2) in P.core_arrows():
        for b in sorted(Q.core):
            b2 = Q.out[b].get(x)
            if b2 is not None and b2 in Q.core:
                adj[(a, b)][x] = (a2, b2)
                adj[(a2, b2)][-x] = (a, b)
    seen: set = set()
    loops = []
    for start in verts:
        if start in seen:
            continue
        comp = {start}
        parent = {start: None}
        todo = [start]
        extra = None
        nedges = 0
        while todo:
            v = todo.pop()
            for x, w in sorted(adj[v].items()):
                if x > 0:
                    nedges += 1
                if w not in comp:
                    comp.add(w)
                    parent[w] = (v, x)
                    todo.append(w)
                elif extra is None and parent.get(v) != (w, -x) and not (w == v and x < 0):
                    extra = (v, x, w)
        seen |= comp
        if nedges - len(comp) + 1 <= 0:
            continue
        if skip_diagonal and any(a == b for (a, b) in comp) and P is Q:
            continue
        v, x, w = extra
        loops.append(_tree_path(parent, w, v, x))
    return loops


def _tree_path(parent, w, v, x):
    def up(node):
        path = []
        while parent[node] is not None:
            node, y = parent[node]
            path.append(-y)
        return path  # label from node up to the root, as inverse steps

    # loop at root: root->v, x, w->root
    to_v = inverse(tuple(up(v)))
    from_w = tuple(up(w))
    return kernels.cyclic_reduce(kernels.free_reduce(to_v + (x,) + from_w))[0]
