"""Hecke and non-backtracking chains on regular graphs.

The non-backtracking walk lives on directed edges ``(u, v)``; projecting a
directed edge to its terminal vertex turns the edge shift into the normalized
adjacency (Hecke) operator ``A/d``.  The edge shift is a 1-step Markov chain
and so satisfies the semigroup identity; the vertex projection does not.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse.csgraph import connected_components

from ._validation import check_positive_int
from .chain_model import ChainSpec, Projection
from .exceptions import ConvergenceError, SpecError

REJECTION_CAP = 10**5

PETERSEN_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 4), (4, 0),
    (0, 5), (1, 6), (2, 7), (3, 8), (4, 9),
    (5, 7), (7, 9), (9, 6), (6, 8), (8, 5),
)


@dataclass(frozen=True, eq=False)
class GraphSpec:
    """Undirected ``d``-regular multigraph without self-loops."""

    num_vertices: int
    edges: tuple
    degree: int

    @property
    def degenerate(self):
        """``d = 2``: the non-backtracking walk is deterministic."""
        return self.degree == 2

    def adjacency(self):
        A = np.zeros((self.num_vertices, self.num_vertices))
        for u, v in self.edges:
            A[u, v] += 1
            A[v, u] += 1
        return A

    def is_connected(self):
        n_comp, _ = connected_components(self.adjacency() > 0, directed=False)
        return n_comp == 1

    def to_dict(self):
        return {"n": self.num_vertices, "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True, eq=False)
class DirectedEdgeChain:
    """Non-backtracking chain on directed edges with its two vertex projections."""

    chain: ChainSpec
    source: Projection
    terminal: Projection
    directed_edges: tuple

    def projection(self, kind="terminal"):
        if kind == "terminal":
            return self.terminal
        if kind == "source":
            return self.source
        if kind == "identity":
            return Projection.identity(self.chain.labels)
        raise SpecError(f"unknown projection kind {kind!r}")


def load_graph(edge_list, d=None, num_vertices=None):
    """Validate an edge list into a :class:`GraphSpec`.

    ``d`` defaults to the degree of vertex 0; every vertex must match it.
    """
    edges = []
    for e in edge_list:
        try:
            u, v = (int(x) for x in e)
        except (TypeError, ValueError):
            raise SpecError(f"malformed edge {e!r}") from None
        if u < 0 or v < 0:
            raise SpecError(f"negative vertex index in edge {e!r}")
        if u == v:
            raise SpecError(f"self-loop at vertex {u}")
        edges.append((u, v))
    if not edges:
        raise SpecError("graph has no edges")
    n = max(max(e) for e in edges) + 1
    if num_vertices is not None:
        if num_vertices < n:
            raise SpecError(f"edge references vertex {n - 1} but n={num_vertices}")
        n = int(num_vertices)
    deg = Counter()
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    if d is None:
        d = deg[0]
    d = check_positive_int(d, "d")
    bad = {v: deg[v] for v in range(n) if deg[v] != d}
    if bad:
        raise SpecError(f"degree violations (expected {d}): {bad}")
    return GraphSpec(n, tuple(edges), d)


def parse_graph_text(text, d=None):
    """Edge-list text (``u v`` per line) or JSON ``{"n": .., "edges": [[u, v], ..]}``."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid graph JSON: {exc}") from None
        if not isinstance(doc, dict) or set(doc) - {"n", "edges"} or "edges" not in doc:
            raise SpecError("graph JSON must have keys 'n' (optional) and 'edges'")
        return load_graph(doc["edges"], d, doc.get("n"))
    edges = []
    for lineno, line in enumerate(stripped.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SpecError(f"line {lineno}: expected 'u v', got {line!r}")
        edges.append(parts)
    return load_graph(edges, d)


def petersen_graph():
    return load_graph(PETERSEN_EDGES, 3)


def complete_graph(n):
    return load_graph([(i, j) for i in range(n) for j in range(i + 1, n)], n - 1)


def cycle_graph(n):
    return load_graph([(i, (i + 1) % n) for i in range(n)], 2)


def hecke_chain(g: GraphSpec) -> ChainSpec:
    """Simple random walk ``A/d`` on vertices; uniform stationary measure."""
    A = g.adjacency()
    P = A / g.degree
    exact = np.array([[Fraction(int(a), g.degree) for a in row] for row in A], dtype=object)
    m = np.full(g.num_vertices, 1.0 / g.num_vertices)
    return ChainSpec(tuple(str(v) for v in range(g.num_vertices)), P, m, exact)


def _directed_edges(g):
    # an undirected edge instance e = (u, v) yields (e, u->v) and (e, v->u)
    out = []
    multiplicity = Counter()
    for idx, (u, v) in enumerate(g.edges):
        key = (min(u, v), max(u, v))
        copy = multiplicity[key]
        multiplicity[key] += 1
        out.append((idx, u, v, copy))
        out.append((idx, v, u, copy))
    return out


def nonbacktracking_matrix(g: GraphSpec):
    """0/1 matrix ``B`` on directed edges: ``(e, u->v) -> (f, v->w)`` with ``f != e``."""
    darts = _directed_edges(g)
    by_source = {}
    for i, (_, s, _, _) in enumerate(darts):
        by_source.setdefault(s, []).append(i)
    B = np.zeros((len(darts), len(darts)))
    for i, (e, _, t, _) in enumerate(darts):
        for j in by_source.get(t, ()):
            if darts[j][0] != e:
                B[i, j] = 1.0
    return B, darts


def nonbacktracking_chain(g: GraphSpec) -> DirectedEdgeChain:
    """Edge shift of the non-backtracking walk; moves uniformly over the ``d - 1`` continuations."""
    if g.degree < 2:
        raise SpecError("non-backtracking walk needs d >= 2")
    B, darts = nonbacktracking_matrix(g)
    P = B / (g.degree - 1)
    exact = np.array([[Fraction(int(b), g.degree - 1) for b in row] for row in B], dtype=object)
    labels = []
    for _, s, t, copy in darts:
        labels.append(f"{s}->{t}" if copy == 0 else f"{s}->{t}#{copy}")
    m = np.full(len(darts), 1.0 / len(darts))
    chain = ChainSpec(tuple(labels), P, m, exact)
    x_labels = tuple(str(v) for v in range(g.num_vertices))
    source = Projection(np.array([s for _, s, _, _ in darts]), x_labels)
    terminal = Projection(np.array([t for _, _, t, _ in darts]), x_labels)
    return DirectedEdgeChain(chain, source, terminal, tuple((s, t) for _, s, t, _ in darts))


def random_regular(n, d, seed, max_attempts=REJECTION_CAP):
    """Random simple ``d``-regular graph by the configuration model with rejection.

    Deterministic for a fixed ``seed``.
    """
    n = check_positive_int(n, "n")
    d = check_positive_int(d, "d")
    if (n * d) % 2:
        raise SpecError(f"n*d = {n * d} is odd; no {d}-regular graph on {n} vertices")
    if n <= d:
        raise SpecError("need n > d for a simple d-regular graph")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_attempts):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        canon = np.sort(pairs, axis=1)
        if len({(int(a), int(b)) for a, b in canon}) != len(canon):
            continue
        edges = sorted((int(a), int(b)) for a, b in canon)
        return GraphSpec(n, tuple(edges), d)
    raise ConvergenceError(f"configuration model rejected {max_attempts} pairings", iterations=max_attempts)


def ihara_l20_radius(g: GraphSpec, tol=1e-9):
    """Largest ``|x|`` over roots of ``x^2 - mu x + (d - 1)`` for adjacency eigenvalues ``mu != +-d``.

    Independent oracle for the non-backtracking spectral radius off the
    constants; valid for non-bipartite vertex-transitive fixtures.
    """
    mu = np.linalg.eigvalsh(g.adjacency())
    d = g.degree
    best = 0.0
    for x in mu:
        if abs(abs(x) - d) < tol:
            continue
        roots = np.roots([1.0, -x, d - 1.0])
        best = max(best, float(np.max(np.abs(roots))))
    return best


def two_step_vertex_operator(g: GraphSpec):
    """Closed form ``(A^2 - d I) / (d (d - 1))`` of the projected 2-step non-backtracking operator.

    Valid for simple graphs (girth >= 3).
    """
    A = g.adjacency()
    d = g.degree
    return (A @ A - d * np.eye(g.num_vertices)) / (d * (d - 1))
