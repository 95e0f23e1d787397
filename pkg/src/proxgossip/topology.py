"""Communication graphs and gossip mixing matrices.

A mixing matrix W encodes one round of neighbor averaging on a connected
graph: multiplying the d x n iterate matrix X by W on the right replaces
every column by a convex combination of its neighbors' columns.  All
constructors here return symmetric doubly stochastic matrices with
nonnegative entries supported on the graph, together with the cached
contraction factor rho = ||W - J||_2 < 1, where J = (1/n) 11^T is the
averaging matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STOCH_TOL = 1e-12      # row/column sums must match 1 this tightly
SYM_TOL = 1e-14        # max |W - W^T| below this counts as symmetric
POWER_TOL = 1e-12      # relative tolerance of the power-iteration fallback
POWER_MAX_ITERS = 100_000


class PowerIterationError(RuntimeError):
    """Power iteration for ||W - J||_2 failed to converge."""

    def __init__(self, residual: float, iters: int):
        self.residual = residual
        self.iters = iters
        super().__init__(
            f"power iteration did not converge after {iters} iterations "
            f"(last relative residual {residual:.3e})"
        )


def averaging_matrix(n: int) -> np.ndarray:
    return np.full((n, n), 1.0 / n)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes 0..n-1.

    Self-loops are not stored; every node implicitly communicates with
    itself.  Edges are normalized to (i, j) with i < j.
    """

    n: int
    edges: frozenset

    @staticmethod
    def from_edges(n: int, edges) -> "Graph":
        if n < 1:
            raise ValueError(f"need at least one node, got n={n}")
        norm = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            norm.add((min(i, j), max(i, j)))
        return Graph(n=n, edges=frozenset(norm))

    def neighbors(self, i: int) -> list:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def components(self) -> list:
        """Connected components as sorted lists of nodes."""
        adj = {i: [] for i in range(self.n)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = set()
        comps = []
        for s in range(self.n):
            if s in seen:
                continue
            stack, comp = [s], []
            seen.add(s)
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1


def ring_graph(n: int) -> Graph:
    if n < 2:
        raise ValueError(f"ring needs n >= 2, got {n}")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def torus_graph(rows: int, cols: int) -> Graph:
    if rows < 3 or cols < 3:
        raise ValueError(f"2d torus needs rows, cols >= 3, got ({rows},{cols})")
    def node(r, c):
        return (r % rows) * cols + (c % cols)
    edges = set()
    for r in range(rows):
        for c in range(cols):
            edges.add((node(r, c), node(r + 1, c)))
            edges.add((node(r, c), node(r, c + 1)))
    return Graph.from_edges(rows * cols, edges)


def load_edge_list(path, n: int | None = None) -> Graph:
    """Read a graph from a text file with one 0-indexed "i j" pair per line."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max(max(i, j) for i, j in edges) if edges else 1
    return Graph.from_edges(n, edges)


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Doubly stochastic gossip weights with cached rho = ||W - J||_2."""

    graph: Graph
    w: np.ndarray
    rho: float

    @property
    def n(self) -> int:
        return self.graph.n

    def validate(self) -> None:
        problems = [d for _, ok, d in check_mixing(self.w, self.graph) if not ok]
        if problems:
            raise ValueError("; ".join(problems))


def check_mixing(w: np.ndarray, graph: Graph | None = None) -> list:
    """Run every mixing-matrix invariant, returning (name, ok, detail) rows.

    The checks mirror the construction guarantees: double stochasticity to
    within STOCH_TOL, nonnegative entries, support restricted to graph
    edges plus the diagonal, contraction rho < 1, and (for nonsymmetric
    input, where rho < 1 alone does not imply it) a one-dimensional fixed
    space of W.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    rows = []
    row_dev = float(np.abs(w.sum(axis=1) - 1.0).max())
    col_dev = float(np.abs(w.sum(axis=0) - 1.0).max())
    dev = max(row_dev, col_dev)
    rows.append(("doubly_stochastic", dev <= STOCH_TOL, f"max_dev={dev:.3e}"))
    rows.append(("nonnegative", w.min() >= 0.0, f"min_entry={float(w.min()):.3e}"))
    if graph is not None:
        allowed = np.eye(n, dtype=bool)
        for a, b in graph.edges:
            allowed[a, b] = allowed[b, a] = True
        off = float(np.abs(np.where(allowed, 0.0, w)).max())
        rows.append(("graph_support", off == 0.0, f"max_off_support={off:.3e}"))
    try:
        rho = spectral_rho(w)
        rows.append(("contraction", rho < 1.0, f"rho={rho:.12g}"))
    except PowerIterationError as exc:
        rows.append(("contraction", False, f"rho_failed residual={exc.residual:.3e}"))
        rho = None
    if np.abs(w - w.T).max() > SYM_TOL:
        rank = int(np.linalg.matrix_rank(w - np.eye(n)))
        rows.append(("fixed_space", rank == n - 1, f"rank(W-I)={rank} want {n - 1}"))
    return rows


def _finalize(graph: Graph, w: np.ndarray) -> MixingMatrix:
    w = np.asarray(w, dtype=float)
    m = MixingMatrix(graph=graph, w=w, rho=spectral_rho(w))
    m.validate()
    w.setflags(write=False)
    return m


def build_ring(n: int, scheme: str = "uniform-1/3") -> MixingMatrix:
    """Ring of n nodes, node i connected to i +- 1 mod n.

    "uniform-1/3" puts 1/3 on self and each neighbor (1/2 each for n = 2);
    "metropolis" coincides with it on rings since all degrees are equal.
    """
    if scheme not in ("uniform-1/3", "uniform", "metropolis"):
        raise ValueError(f"unknown ring scheme {scheme!r}")
    g = ring_graph(n)
    if n == 2:
        w = np.array([[0.5, 0.5], [0.5, 0.5]])
    else:
        w = np.zeros((n, n))
        for i in range(n):
            w[i, i] = 1.0 / 3.0
            w[i, (i + 1) % n] = 1.0 / 3.0
            w[i, (i - 1) % n] = 1.0 / 3.0
    return _finalize(g, w)


def build_complete(n: int) -> MixingMatrix:
    """Fully connected graph with W = J, so rho = 0."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return _finalize(complete_graph(n), averaging_matrix(n))


def build_torus2d(rows: int, cols: int) -> MixingMatrix:
    """2d torus grid, uniform weight 1/5 on self and the 4 wraparound neighbors."""
    g = torus_graph(rows, cols)
    n = g.n
    w = np.zeros((n, n))
    for i in range(n):
        w[i, i] = 0.2
        for j in g.neighbors(i):
            w[i, j] = 0.2
    return _finalize(g, w)


def build_custom(graph: Graph, scheme: str = "metropolis") -> MixingMatrix:
    """Weights for an arbitrary connected graph.

    "metropolis" sets w_ij = 1/(1 + max(deg_i, deg_j)) on edges with the
    complementary self-weight; "uniform-degree" uses the max-degree uniform
    weight w_ij = 1/(1 + max_k deg_k).  Both are symmetric and doubly
    stochastic on any connected graph.
    """
    if not graph.is_connected():
        comps = graph.components()
        raise ValueError(
            f"graph is disconnected: components {comps[0]} and {comps[1]}"
            + (f" (+{len(comps) - 2} more)" if len(comps) > 2 else "")
        )
    n = graph.n
    deg = graph.degrees()
    w = np.zeros((n, n))
    if scheme == "metropolis":
        for a, b in graph.edges:
            w[a, b] = w[b, a] = 1.0 / (1.0 + max(deg[a], deg[b]))
    elif scheme == "uniform-degree":
        u = 1.0 / (1.0 + int(deg.max()))
        for a, b in graph.edges:
            w[a, b] = w[b, a] = u
    else:
        raise ValueError(f"unknown custom scheme {scheme!r}")
    for i in range(n):
        w[i, i] = 1.0 - w[i].sum()
    return _finalize(graph, w)


def spectral_rho(w: np.ndarray) -> float:
    """Largest singular value of W - J.

    Symmetric matrices (max |W - W^T| <= SYM_TOL) go through a full
    symmetric eigendecomposition; otherwise power iteration is run on
    (W-J)^T (W-J) to relative tolerance POWER_TOL.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError(f"expected square matrix, got shape {w.shape}")
    if n == 1:
        return float(abs(w[0, 0] - 1.0))
    m = w - averaging_matrix(n)
    if np.abs(w - w.T).max() <= SYM_TOL:
        return float(np.abs(np.linalg.eigvalsh(m)).max())
    mtm = m.T @ m
    # deterministic start vector, never in the null span of interest
    v = np.cos(np.arange(1, n + 1, dtype=float))
    v /= np.linalg.norm(v)
    lam = float(v @ mtm @ v)
    for _ in range(POWER_MAX_ITERS):
        u = mtm @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = u / nu
        lam_new = float(v @ mtm @ v)
        resid = abs(lam_new - lam) / max(abs(lam_new), 1e-300)
        lam = lam_new
        if resid <= POWER_TOL:
            return float(np.sqrt(max(lam, 0.0)))
    raise PowerIterationError(resid, POWER_MAX_ITERS)
