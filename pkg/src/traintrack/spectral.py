"""Perron-Frobenius data and the induced metric."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotIrreducible
from .maps import GraphMap, TransitionMatrix, is_irreducible, transition_matrix

DEFAULT_TOL = 1e-9
FINEST_TOL = 1e-14


@dataclass(frozen=True)
class PerronData:
    lambda_: float
    radius: float
    eigenvector: tuple
    tol: float
    lower: float = 0.0
    upper: float = 0.0

    def enclosure(self):
        return (self.lower, self.upper)

    def to_dict(self) -> dict:
        return {
            "lambda": fmt_decimal(self.lambda_),
            "radius": f"{self.radius:.3e}",
            "eigenvector": [fmt_decimal(x) for x in self.eigenvector],
            "tol": f"{self.tol:.1e}",
        }


def fmt_decimal(x: float) -> str:
    return f"{x:.12f}"


def _collatz_wielandt(a: np.ndarray, v: np.ndarray):
    ratios = (a @ v) / v
    return float(ratios.min()), float(ratios.max())


def pf_eigen(M: TransitionMatrix | np.ndarray, tol: float = DEFAULT_TOL) -> PerronData:
    """Perron root and positive eigenvector of an irreducible matrix.

    The returned ``lower``/``upper`` are Collatz-Wielandt bounds for the
    returned vector, so ``lower <= lambda <= upper`` is certified up to
    rounding.  The eigenvector is scaled so its least entry is 1.
    """
    if not isinstance(M, TransitionMatrix):
        M = TransitionMatrix.from_array(M)
    ok, witness = is_irreducible(M)
    if not ok:
        raise NotIrreducible("Perron data needs an irreducible matrix", witness=witness)
    a = M.data.astype(float)
    n = a.shape[0]
    if n == 1:
        lam = float(a[0, 0])
        return PerronData(lam, 0.0, (1.0,), tol, lam, lam)
    # a shifted matrix is primitive, so power iteration converges
    shifted = a + np.eye(n)
    vals, vecs = np.linalg.eig(a)
    k = int(np.argmax(vals.real))
    v = np.abs(vecs[:, k].real)
    if not (v > 0).all():
        v = np.ones(n)
    v /= v.max()
    lo, hi = _collatz_wielandt(a, v)
    it = 0
    while hi - lo > tol and it < 200000:
        w = shifted @ v
        v = w / w.max()
        it += 1
        if it % 8 == 0:
            lo, hi = _collatz_wielandt(a, v)
    lo, hi = _collatz_wielandt(a, v)
    lam = 0.5 * (lo + hi)
    v = v / v.min()
    return PerronData(lam, 0.5 * (hi - lo), tuple(float(x) for x in v), tol, lo, hi)


def compare_lambdas(p: PerronData, q: PerronData, Mp=None, Mq=None) -> int:
    """-1, 0 or 1 as p < q, p == q, p > q, tightening overlapping enclosures.

    When the enclosures overlap the tolerance is cut tenfold (down to 1e-14)
    and the matrices, if given, are re-solved; overlap at the finest level
    counts as equality.
    """
    tol = min(p.tol, q.tol)
    while True:
        if p.upper < q.lower:
            return -1
        if q.upper < p.lower:
            return 1
        if tol <= FINEST_TOL or Mp is None or Mq is None:
            return 0
        tol = max(tol / 10, FINEST_TOL)
        p, q = pf_eigen(Mp, tol), pf_eigen(Mq, tol)


def metric_perron(f: GraphMap, tol: float = DEFAULT_TOL) -> PerronData:
    """Perron data for the edge-length eigenvector (left eigenvector of the matrix)."""
    M = transition_matrix(f)
    Mt = TransitionMatrix(M.edges, M.labels, M.data.T.copy())
    return pf_eigen(Mt, tol)


def assign_metric(f: GraphMap, pf: PerronData | None = None, tol: float = DEFAULT_TOL) -> GraphMap:
    """Give the domain the Perron-Frobenius lengths, shortest edge = 1.

    Lengths come from the eigenvector of the transposed matrix, which is the
    one satisfying ``l(f(e)) = lambda l(e)``; pass ``pf`` from
    ``metric_perron`` to reuse it.
    """
    if pf is None:
        pf = metric_perron(f, tol)
    edges = f.graph.edge_ids
    lengths = {e: float(x) for e, x in zip(edges, pf.eigenvector)}
    return f.with_graph(f.graph.with_lengths(lengths))


def unit_perron(f: GraphMap) -> PerronData:
    """Perron data for a map sending every edge to a single edge (lambda = 1)."""
    n = len(f.graph.edges)
    return PerronData(1.0, 0.0, (1.0,) * n, DEFAULT_TOL, 1.0, 1.0)
