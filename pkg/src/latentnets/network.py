"""Binary network container, dyadic covariates, and edge-list ingestion.

Networks are immutable after construction: the adjacency matrix is a dense
0/1 array with a structurally absent diagonal (no self-loops), symmetric
when the network is undirected. Nodes carry external string labels mapped
to dense 0-based indices in first-appearance order.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import DataError

__all__ = [
    "Network",
    "DyadCovariates",
    "load_edge_list",
    "write_edge_list",
    "write_node_mapping",
    "geodesic_distances",
    "degree",
]


class Network:
    """Immutable binary graph over ``n`` indexed nodes.

    Parameters
    ----------
    adjacency : array of shape (n, n)
        0/1 matrix with zero diagonal; must be symmetric when
        ``directed`` is False.
    directed : bool
        Whether dyads are ordered.
    node_labels : sequence of str, optional
        External identifiers, one per node. Defaults to "v0", "v1", ...
    """

    def __init__(self, adjacency, directed=False, node_labels=None):
        adj = np.asarray(adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DataError("adjacency must be a square matrix")
        n = adj.shape[0]
        if n < 1:
            raise DataError("network must contain at least one node")
        vals = np.unique(adj)
        if not np.isin(vals, (0, 1)).all():
            raise DataError("adjacency entries must be binary (weighted edges rejected)")
        adj = adj.astype(np.uint8)
        if np.any(np.diag(adj)):
            raise DataError("self-loops are not allowed")
        if not directed and not np.array_equal(adj, adj.T):
            raise DataError("undirected adjacency must be symmetric")
        if node_labels is None:
            node_labels = tuple(f"v{i}" for i in range(n))
        else:
            node_labels = tuple(str(lab) for lab in node_labels)
            if len(node_labels) != n:
                raise DataError("node_labels length must equal node count")
            if len(set(node_labels)) != n:
                raise DataError("node labels must be unique")
        adj.setflags(write=False)
        self._adj = adj
        self._directed = bool(directed)
        self._labels = node_labels
        self._index = {lab: i for i, lab in enumerate(node_labels)}

    @classmethod
    def from_edges(cls, n, edges, directed=False, node_labels=None):
        """Build a network from an iterable of (i, j) index pairs."""
        adj = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            if i == j:
                raise DataError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise DataError(f"edge ({i}, {j}) out of range for n={n}")
            adj[i, j] = 1
            if not directed:
                adj[j, i] = 1
        return cls(adj, directed=directed, node_labels=node_labels)

    @property
    def n(self):
        return self._adj.shape[0]

    @property
    def directed(self):
        return self._directed

    @property
    def adjacency(self):
        return self._adj

    @property
    def node_labels(self):
        return self._labels

    def index_of(self, label):
        return self._index[label]

    def has_edge(self, i, j):
        if i == j:
            raise DataError("queries on the diagonal (i == i) are not defined")
        return bool(self._adj[i, j])

    def edges(self):
        """Edge list as index pairs; unordered pairs (i < j) when undirected."""
        if self._directed:
            rows, cols = np.nonzero(self._adj)
        else:
            rows, cols = np.nonzero(np.triu(self._adj, k=1))
        return list(zip(rows.tolist(), cols.tolist()))

    @property
    def edge_count(self):
        e = int(self._adj.sum())
        return e if self._directed else e // 2

    @property
    def dyad_count(self):
        n = self.n
        return n * (n - 1) if self._directed else n * (n - 1) // 2

    def __repr__(self):
        kind = "directed" if self._directed else "undirected"
        return f"Network(n={self.n}, edges={self.edge_count}, {kind})"


class DyadCovariates:
    """Real-valued covariates indexed by ordered dyad.

    ``values`` has shape (n, n, p); entry (i, j, k) is the k-th covariate
    of the ordered dyad (i, j). Diagonal entries are ignored.
    """

    def __init__(self, values):
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 3 or vals.shape[0] != vals.shape[1]:
            raise DataError("covariate tensor must have shape (n, n, p)")
        if not np.isfinite(vals).all():
            raise DataError("covariate values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        self._values = vals

    @property
    def values(self):
        return self._values

    @property
    def p(self):
        return self._values.shape[2]

    @property
    def n(self):
        return self._values.shape[0]

    def validate_for(self, g: Network):
        """Check shape and, for undirected networks, symmetry in (i, j)."""
        if self.n != g.n:
            raise DataError(
                f"covariates cover {self.n} nodes, network has {g.n}"
            )
        if not g.directed:
            if not np.allclose(self._values, np.swapaxes(self._values, 0, 1)):
                raise DataError("undirected covariates must satisfy x[i,j,k] == x[j,i,k]")


def load_edge_list(path, directed=False):
    """Read a "source,target" CSV edge list into a :class:`Network`.

    Node labels are arbitrary strings assigned dense indices in order of
    first appearance. An optional header line "source,target" is skipped.
    Duplicate edges collapse to one; self-loop lines are rejected.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = [ln.strip() for ln in raw.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if lines and lines[0].lower().replace(" ", "") == "source,target":
        lines = lines[1:]
    if not lines:
        raise DataError(f"edge list {path} contains no edges")

    labels: list[str] = []
    index: dict[str, int] = {}
    edges = []
    for lineno, ln in enumerate(lines, start=1):
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise DataError(f"line {lineno}: expected 'source,target', got {ln!r}")
        src, dst = parts
        if src == dst:
            raise DataError(f"line {lineno}: self-loop on node {src!r}")
        for lab in (src, dst):
            if lab not in index:
                index[lab] = len(labels)
                labels.append(lab)
        edges.append((index[src], index[dst]))
    return Network.from_edges(len(labels), edges, directed=directed, node_labels=labels)


def write_edge_list(g: Network, path, comment=None):
    """Write the edge set back out as a "source,target" CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("source,target\n")
        for i, j in g.edges():
            fh.write(f"{g.node_labels[i]},{g.node_labels[j]}\n")


def write_node_mapping(g: Network, path, comment=None):
    """Write the label-to-index mapping as a "label,index" CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("label,index\n")
        for i, lab in enumerate(g.node_labels):
            fh.write(f"{lab},{i}\n")


def geodesic_distances(g: Network):
    """Shortest-path hop counts between all node pairs.

    Unreachable pairs are assigned the finite sentinel
    (largest finite distance + 1) so the result can seed classical
    multidimensional scaling.
    """
    if g.n < 2:
        raise DataError("geodesic distances require at least two nodes")
    graph = csr_matrix(g.adjacency)
    dist = shortest_path(graph, method="D", directed=g.directed, unweighted=True)
    finite = dist[np.isfinite(dist)]
    sentinel = finite.max() + 1.0
    dist[~np.isfinite(dist)] = sentinel
    return dist


def degree(g: Network, i):
    """Incident edge count of node ``i``; an (in, out) pair when directed."""
    if not (0 <= i < g.n):
        raise IndexError(f"node index {i} out of range for n={g.n}")
    if g.directed:
        return int(g.adjacency[:, i].sum()), int(g.adjacency[i, :].sum())
    return int(g.adjacency[i, :].sum())
