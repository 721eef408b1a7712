"""Shared test utilities: random graph construction and independent
brute-force oracles (kept deliberately loop-based and separate from the
library's vectorized code paths)."""

from __future__ import annotations

import itertools

import numpy as np

from graphar import AttributedGraph


def random_graph(rng, n_nodes=4, feature_dim=2, edge_prob=0.5, directed=False):
    features = rng.standard_normal((n_nodes, feature_dim))
    adj = np.zeros((n_nodes, n_nodes), dtype=np.int8)
    if directed:
        mask = rng.random((n_nodes, n_nodes)) < edge_prob
        adj[mask] = 1
        np.fill_diagonal(adj, 0)
    else:
        for i in range(n_nodes):
            for j in range(i + 1, n_nodes):
                if rng.random() < edge_prob:
                    adj[i, j] = adj[j, i] = 1
    return AttributedGraph(features, adj, directed=directed)


def scalar_graph(value):
    """1-node, 1-feature, edgeless graph carrying a single number."""
    return AttributedGraph(np.array([[float(value)]]), np.zeros((1, 1), dtype=np.int8))


def naive_pair_cost(g1, g2, perm, edge_weight=1.0):
    """Squared distance under an explicit correspondence, via scalar loops."""
    n = g1.n_nodes
    cost = 0.0
    for i in range(n):
        for f in range(g1.feature_dim):
            diff = g1.node_features[i, f] - g2.node_features[perm[i], f]
            cost += diff * diff
    if g1.directed:
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    else:
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pairs:
        diff = float(g1.adjacency[i, j]) - float(g2.adjacency[perm[i], perm[j]])
        cost += edge_weight * diff * diff
    return cost


def naive_min_permutation_ged(g1, g2, edge_weight=1.0):
    """Exact optimal-permutation distance by enumerating every relabeling."""
    best = np.inf
    for perm in itertools.permutations(range(g1.n_nodes)):
        best = min(best, naive_pair_cost(g1, g2, perm, edge_weight))
    return np.sqrt(best)


def incircle_det(a, b, c, d):
    """Positive iff d lies strictly inside the circle through a, b, c
    (counterclockwise orientation)."""
    m = np.array(
        [
            [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
            [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
            [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
        ]
    )
    return np.linalg.det(m)


def oracle_delaunay(points):
    """Delaunay adjacency via the incircle determinant sign test, an
    independent route from the circumcenter/radius comparison."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    adj = np.zeros((n, n), dtype=np.int8)
    for i, j, k in itertools.combinations(range(n), 3):
        a, b, c = points[i], points[j], points[k]
        orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if orient == 0.0:
            continue
        sign = 1.0 if orient > 0 else -1.0
        empty = True
        for l in range(n):
            if l in (i, j, k):
                continue
            if sign * incircle_det(a, b, c, points[l]) > 0.0:
                empty = False
                break
        if empty:
            for u, v in ((i, j), (j, k), (i, k)):
                adj[u, v] = adj[v, u] = 1
    return adj


def numeric_gradient(loss_fn, array, index, step=1e-5):
    """Central finite difference of a scalar function wrt one coordinate."""
    original = array[index]
    array[index] = original + step
    up = loss_fn()
    array[index] = original - step
    down = loss_fn()
    array[index] = original
    return (up - down) / (2.0 * step)


def relative_error(a, b):
    # the floor makes near-zero gradients compare absolutely: central
    # differences on an O(1) loss carry ~1e-11 of roundoff noise, so a
    # pure ratio is meaningless once the true gradient is ~1e-8
    scale = max(abs(a), abs(b), 1e-6)
    return abs(a - b) / scale
