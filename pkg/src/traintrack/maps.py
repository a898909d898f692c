"""Graph self-maps, transition matrices, irreducibility and powers."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import kernels
from .errors import ZeroMatrix
from .graphs import EdgePath, MarkedGraph, rose, tighten
from .words import Endomorphism, inverse


@dataclass(frozen=True, eq=False)
class GraphMap:
    """A tight map of a marked graph to itself.

    ``base_path`` runs from the base vertex to the image of the base vertex;
    together with the edge labels it pins down the represented endomorphism
    exactly (not just up to an inner automorphism).
    """

    graph: MarkedGraph
    vertex_images: Mapping[int, int]
    edge_images: Mapping[int, EdgePath]
    endo: Endomorphism
    base_path: EdgePath = ()

    def image(self, d: int) -> EdgePath:
        im = self.edge_images[abs(d)]
        return im if d > 0 else inverse(im)

    def image_table(self):
        table = [()] * (max(self.edge_images, default=0) + 1)
        for e, im in self.edge_images.items():
            table[e] = im
        return table

    def apply(self, path: Sequence[int]) -> EdgePath:
        """Tightened image of an edge path."""
        return kernels.substitute(tuple(path), self.image_table())

    def apply_loop(self, loop: Sequence[int]) -> EdgePath:
        """Image of a cyclic loop, cyclically tightened."""
        return kernels.cyclic_reduce(self.apply(loop))[0]

    def df(self, d: int) -> int:
        """First oriented edge of the image of direction ``d``."""
        return self.image(d)[0]

    def with_graph(self, graph: MarkedGraph) -> "GraphMap":
        return GraphMap(graph, self.vertex_images, self.edge_images, self.endo, self.base_path)

    def is_tight(self) -> bool:
        return all(tighten(im) == im for im in self.edge_images.values())

    def check_marking(self) -> bool:
        """Exact check that the map represents ``endo`` through the marking."""
        g = self.graph
        if not g.marking_is_identity():
            return False
        for i, loop in enumerate(g.marking):
            img = self.apply(loop)
            word = g.label(kernels.free_reduce(self.base_path + img + inverse(self.base_path)))
            if word != self.endo.images[i]:
                return False
        return True

    def check_structure(self) -> bool:
        g = self.graph
        for e, im in self.edge_images.items():
            o, t = g.edges[e]
            if im:
                if not g.is_path(im):
                    return False
                if g.origin(im[0]) != self.vertex_images[o] or g.terminus(im[-1]) != self.vertex_images[t]:
                    return False
            elif self.vertex_images[o] != self.vertex_images[t]:
                return False
        bp = self.base_path
        if bp and (g.origin(bp[0]) != g.base or g.terminus(bp[-1]) != self.vertex_images[g.base]):
            return False
        if not bp and self.vertex_images[g.base] != g.base:
            return False
        return True

    def to_dict(self) -> dict:
        g = self.graph
        return {
            "graph": g.to_dict(),
            "vertex_images": {str(v): w for v, w in sorted(self.vertex_images.items())},
            "edge_images": {g.edge_names.get(e, f"e{e}"): g.format_path(im) for e, im in sorted(self.edge_images.items())},
            "edge_image_ids": {str(e): list(im) for e, im in sorted(self.edge_images.items())},
            "base_path": list(self.base_path),
            "endomorphism": self.endo.to_strings(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GraphMap":
        graph = MarkedGraph.from_dict(doc["graph"])
        endo = Endomorphism.from_strings(graph.alphabet, doc["endomorphism"])
        return cls(
            graph=graph,
            vertex_images={int(k): int(v) for k, v in doc["vertex_images"].items()},
            edge_images={int(k): tuple(int(x) for x in v) for k, v in doc["edge_image_ids"].items()},
            endo=endo,
            base_path=tuple(int(x) for x in doc.get("base_path", [])),
        )


def rose_representative(phi: Endomorphism) -> GraphMap:
    """Map of the rose sending petal ``i`` along the word ``phi(x_i)``."""
    g = rose(phi.alphabet)
    return GraphMap(
        graph=g,
        vertex_images={0: 0},
        edge_images={i: phi.images[i - 1] for i in range(1, phi.alphabet.rank + 1)},
        endo=phi,
        base_path=(),
    )


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """``data[i][j]`` counts crossings of edge ``edges[i]`` (either way) by the image of ``edges[j]``."""

    edges: tuple
    labels: tuple
    data: np.ndarray

    @classmethod
    def from_array(cls, array, labels: Sequence[str] | None = None) -> "TransitionMatrix":
        a = np.asarray(array, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("transition matrix must be square")
        if (a < 0).any():
            raise ValueError("transition matrix must be nonnegative")
        n = a.shape[0]
        edges = tuple(range(1, n + 1))
        return cls(edges, tuple(labels) if labels else tuple(f"e{i}" for i in edges), a)

    @property
    def size(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        return self.edges == other.edges and np.array_equal(self.data, other.data)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "rows": self.data.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def transition_matrix(f: GraphMap) -> TransitionMatrix:
    edges = tuple(f.graph.edge_ids)
    pos = {e: i for i, e in enumerate(edges)}
    a = np.zeros((len(edges), len(edges)), dtype=np.int64)
    for j, e in enumerate(edges):
        for d in f.edge_images[e]:
            a[pos[abs(d)], j] += 1
    labels = tuple(f.graph.edge_names.get(e, f"e{e}") for e in edges)
    return TransitionMatrix(edges, labels, a)


def is_irreducible(M: TransitionMatrix | np.ndarray):
    """Strong connectivity of the crossing digraph.

    Returns ``(True, None)`` or ``(False, witness)``; the witness is a
    frozenset of edge ids forming a terminal strongly connected component
    that does not cover everything, so it is closed under taking images.
    """
    if not isinstance(M, TransitionMatrix):
        M = TransitionMatrix.from_array(M)
    if not M.data.any():
        raise ZeroMatrix("no edge image crosses any edge")
    comps = terminal_components(M)
    if len(comps) == 1 and len(comps[0]) == M.size:
        return True, None
    return False, comps[0]


def terminal_components(M: TransitionMatrix | np.ndarray) -> list:
    """Strongly connected components with no arcs leaving them, as edge-id sets.

    Sorted by least edge id.  Each one is closed under taking images.
    """
    if not isinstance(M, TransitionMatrix):
        M = TransitionMatrix.from_array(M)
    n = M.size
    # arc j -> i whenever e_i occurs in f(e_j)
    adj = (M.data.T > 0).astype(np.int8)
    count, comp = connected_components(adj, directed=True, connection="strong")
    comp = [int(c) for c in comp]
    outgoing = [False] * count
    for j in range(n):
        for i in range(n):
            if adj[j, i] and comp[i] != comp[j]:
                outgoing[comp[j]] = True
    out = []
    for c in range(count):
        if not outgoing[c]:
            out.append(frozenset(M.edges[i] for i in range(n) if comp[i] == c))
    return sorted(out, key=min)


def power(f: GraphMap, k: int) -> GraphMap:
    """The map ``f^k`` with tightened edge images."""
    if k < 1:
        raise ValueError("power must be at least 1")
    if k == 1:
        return f
    table = f.image_table()
    images = dict(f.edge_images)
    vimg = dict(f.vertex_images)
    base_path = f.base_path
    for _ in range(k - 1):
        images = {e: kernels.substitute(im, table) for e, im in images.items()}
        vimg = {v: f.vertex_images[w] for v, w in vimg.items()}
        base_path = kernels.free_reduce(f.base_path + kernels.substitute(base_path, table))
    return GraphMap(f.graph, vimg, images, f.endo.power(k), base_path)
