"""Attributed graphs and time-ordered graph sequences.

Graphs have a fixed node set, a real node-feature matrix, a binary
adjacency matrix and (optionally) a real edge-attribute tensor. Values are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """A graph of N identified nodes with numeric attributes.

    Attributes:
        node_features: (N, F) float matrix, one feature row per node
        adjacency: (N, N) matrix with entries in {0, 1} and zero diagonal;
            symmetric when the graph is undirected
        edge_attributes: optional (N, N, S) float tensor, zero wherever
            adjacency is zero
        directed: whether edges are ordered pairs
    """

    node_features: np.ndarray
    adjacency: np.ndarray
    edge_attributes: Optional[np.ndarray] = None
    directed: bool = False

    def __post_init__(self):
        x = np.asarray(self.node_features, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"node_features must be 2-D, got shape {x.shape}")
        n = x.shape[0]
        if n < 1:
            raise ValueError("graph must have at least one node")

        a = np.asarray(self.adjacency)
        if a.shape != (n, n):
            raise ValueError(f"adjacency must be ({n}, {n}), got {a.shape}")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        a = a.astype(np.int8)
        if np.diagonal(a).any():
            raise ValueError("adjacency diagonal must be zero")
        if not self.directed and not np.array_equal(a, a.T):
            raise ValueError("undirected graph requires symmetric adjacency")

        e = self.edge_attributes
        if e is not None:
            e = np.asarray(e, dtype=np.float64)
            if e.ndim != 3 or e.shape[:2] != (n, n):
                raise ValueError(
                    f"edge_attributes must be ({n}, {n}, S), got {e.shape}"
                )
            if np.any(e[a == 0] != 0.0):
                raise ValueError("edge_attributes must be zero off the edge set")
            object.__setattr__(self, "edge_attributes", _frozen(e))

        object.__setattr__(self, "node_features", _frozen(x))
        object.__setattr__(self, "adjacency", _frozen(a))

    @property
    def n_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.node_features.shape[1]

    @property
    def edge_attr_dim(self) -> int:
        return 0 if self.edge_attributes is None else self.edge_attributes.shape[2]

    @property
    def n_edges(self) -> int:
        total = int(self.adjacency.sum())
        return total if self.directed else total // 2

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        if self.directed != other.directed:
            return False
        if self.node_features.shape != other.node_features.shape:
            return False
        if not np.array_equal(self.node_features, other.node_features):
            return False
        if not np.array_equal(self.adjacency, other.adjacency):
            return False
        if (self.edge_attributes is None) != (other.edge_attributes is None):
            return False
        if self.edge_attributes is not None and not np.array_equal(
            self.edge_attributes, other.edge_attributes
        ):
            return False
        return True

    __hash__ = None  # array-valued; not hashable


class GraphSequence:
    """A time-ordered sequence of graphs sharing order, feature dimension
    and directedness.

    Supports ``len``, integer indexing, slicing (returns a new sequence)
    and iteration. ``origin`` optionally records the generating-process
    config the sequence was sampled from.
    """

    def __init__(self, graphs: Sequence[AttributedGraph], origin=None):
        graphs = tuple(graphs)
        if graphs:
            first = graphs[0]
            for i, g in enumerate(graphs):
                if (
                    g.n_nodes != first.n_nodes
                    or g.feature_dim != first.feature_dim
                    or g.directed != first.directed
                ):
                    raise ValueError(
                        f"graph {i} does not match the sequence layout "
                        f"(N={first.n_nodes}, F={first.feature_dim}, "
                        f"directed={first.directed})"
                    )
        self.graphs = graphs
        self.origin = origin
        self._features = None
        self._adjacency = None

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self) -> Iterator[AttributedGraph]:
        return iter(self.graphs)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return GraphSequence(self.graphs[index], origin=self.origin)
        return self.graphs[index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphSequence):
            return NotImplemented
        return self.graphs == other.graphs

    @property
    def n_nodes(self) -> int:
        self._require_nonempty()
        return self.graphs[0].n_nodes

    @property
    def feature_dim(self) -> int:
        self._require_nonempty()
        return self.graphs[0].feature_dim

    @property
    def directed(self) -> bool:
        self._require_nonempty()
        return self.graphs[0].directed

    def features_array(self) -> np.ndarray:
        """All node-feature matrices stacked into a (T, N, F) array."""
        if self._features is None:
            self._require_nonempty()
            self._features = _frozen(np.stack([g.node_features for g in self.graphs]))
        return self._features

    def adjacency_array(self) -> np.ndarray:
        """All adjacency matrices stacked into a (T, N, N) int array."""
        if self._adjacency is None:
            self._require_nonempty()
            self._adjacency = _frozen(np.stack([g.adjacency for g in self.graphs]))
        return self._adjacency

    def _require_nonempty(self):
        if not self.graphs:
            raise ValueError("empty graph sequence")
