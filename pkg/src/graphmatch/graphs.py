"""Graph container and the preprocessing the GCN encoder consumes."""

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class GraphError(ValueError):
    """Raised when a graph violates its structural invariants."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph with per-node feature vectors.

    Edges are stored deduplicated with u < v and without self-loops; the
    self-loop term of the normalized adjacency is added during preprocessing.
    Optional integer node labels drive substitution costs in edit-distance
    computations.
    """

    id: str
    features: np.ndarray  # N x d
    edges: tuple  # of (u, v) with u < v
    labels: tuple | None = None

    @property
    def num_nodes(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]


def make_graph(graph_id, features, edges, labels=None):
    """Build and validate a Graph, deduplicating undirected edges."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise GraphError(f"graph {graph_id!r}: features must be a non-empty N x d matrix")
    n = feats.shape[0]
    seen = set()
    dupes = 0
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"graph {graph_id!r}: edge ({u}, {v}) out of range for {n} nodes")
        if u == v:
            raise GraphError(f"graph {graph_id!r}: self-loop at node {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            dupes += 1
        seen.add(key)
    if dupes:
        log.warning("graph %r: dropped %d duplicate edge(s)", graph_id, dupes)
    if labels is not None:
        labels = tuple(int(x) for x in labels)
        if len(labels) != n:
            raise GraphError(f"graph {graph_id!r}: {len(labels)} labels for {n} nodes")
    feats.setflags(write=False)
    return Graph(id=str(graph_id), features=feats, edges=tuple(sorted(seen)), labels=labels)


def validate(g: Graph):
    """Re-check invariants on an existing Graph (cheap, raises GraphError)."""
    make_graph(g.id, np.array(g.features), g.edges, g.labels)


def adjacency_matrix(g: Graph):
    """Dense symmetric 0/1 adjacency, no self-loops."""
    n = g.num_nodes
    a = np.zeros((n, n), dtype=np.float64)
    for u, v in g.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a


def normalized_adjacency(g: Graph):
    """Symmetrically normalized adjacency with self-loops.

    Computes D^-1/2 (A + I) D^-1/2 where D is the degree matrix of A + I.
    An isolated node gets a diagonal entry of exactly 1.
    """
    a = adjacency_matrix(g)
    np.fill_diagonal(a, 1.0)
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    out = a * dinv[:, None] * dinv[None, :]
    # enforce exact symmetry against float rounding of the two scalings
    out = (out + out.T) / 2.0
    return out


@dataclass(frozen=True)
class LabeledPair:
    """A training/evaluation pair of graph ids with its target score."""

    g1: str
    g2: str
    target: float


@dataclass
class FunctionGroup:
    """Graphs sharing one source identity (positives for classification)."""

    group_id: str
    members: list = field(default_factory=list)
