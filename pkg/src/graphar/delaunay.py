"""Planar Delaunay adjacency for small point sets.

Brute force over all point triples: a triple spans a triangle of the
triangulation iff its open circumdisk contains no other point. Cocircular
configurations therefore keep the triangles of every valid triangulation
(deterministic, permutation-equivariant); collinear triples contribute
nothing. O(N^5), exact for the small orders used here.
"""

from __future__ import annotations

import itertools

import numpy as np


def circumcircle(p: np.ndarray, q: np.ndarray, r: np.ndarray):
    """Center and squared radius of the circle through three points.

    Returns None for collinear triples (zero orientation determinant).
    """
    cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    if cross == 0.0:
        return None
    # Perpendicular-bisector system: 2 (q - p) . c = |q|^2 - |p|^2, same for r.
    m = 2.0 * np.array([q - p, r - p])
    b = np.array([q @ q - p @ p, r @ r - p @ p])
    center = np.linalg.solve(m, b)
    radius_sq = float((p - center) @ (p - center))
    return center, radius_sq


def delaunay_adjacency(points: np.ndarray) -> np.ndarray:
    """Adjacency of the Delaunay triangulation of N points in the plane.

    Edge (i, j) is present iff some non-collinear triple {i, j, k} has an
    open circumdisk empty of the remaining points. Fewer than 3 points, or
    all points collinear, give an all-zero adjacency.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"points must be (N, 2), got shape {points.shape}")
    n = points.shape[0]
    adjacency = np.zeros((n, n), dtype=np.int8)
    if n < 3:
        return adjacency

    for i, j, k in itertools.combinations(range(n), 3):
        circle = circumcircle(points[i], points[j], points[k])
        if circle is None:
            continue
        center, radius_sq = circle
        empty = True
        for l in range(n):
            if l in (i, j, k):
                continue
            d = points[l] - center
            if float(d @ d) < radius_sq:
                empty = False
                break
        if empty:
            for a, b in ((i, j), (j, k), (i, k)):
                adjacency[a, b] = 1
                adjacency[b, a] = 1
    return adjacency
