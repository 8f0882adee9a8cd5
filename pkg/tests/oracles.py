"""Independent reference computations used by the tests.

Nothing here imports the package's algorithms; each oracle is a direct,
slow restatement of the mathematical definition.
"""

from __future__ import annotations

import heapq
import itertools
import math
from functools import lru_cache

import numpy as np


# --- spanning trees by Pruefer enumeration ----------------------------------------


def prufer_decode(seq, n):
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u, w = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, w))
    return edges


@lru_cache(maxsize=None)
def all_trees(n):
    """Every labelled spanning tree on n vertices, shape (n**(n-2), n-1, 2)."""
    if n == 2:
        return np.array([[[0, 1]]])
    trees = [prufer_decode(seq, n) for seq in itertools.product(range(n), repeat=n - 2)]
    return np.array(trees)


def brute_force_mst_weight(points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    W = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    trees = all_trees(n)
    totals = W[trees[..., 0], trees[..., 1]].sum(axis=1)
    return float(totals.min())


# --- Delaunay checks ---------------------------------------------------------------


def circumcircle(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    return (ux, uy), math.hypot(ax - ux, ay - uy)


def empty_circle_violations(points, triangles, rel=1e-9):
    """(triangle, point) pairs with the point strictly inside beyond ``rel`` * radius."""
    pts = np.asarray(points, dtype=np.float64)
    bad = []
    for tri in triangles:
        (ux, uy), r = circumcircle(*pts[list(tri)])
        d = np.hypot(pts[:, 0] - ux, pts[:, 1] - uy)
        inside = d < r * (1 - rel)
        inside[list(tri)] = False
        bad += [(tuple(tri), int(i)) for i in np.flatnonzero(inside)]
    return bad


def hull_size(points) -> int:
    from scipy.spatial import ConvexHull

    return len(ConvexHull(np.asarray(points, dtype=np.float64)).vertices)


# --- SVM dual by projected gradient -------------------------------------------------


def project_box_hyperplane(v, y, C):
    """Euclidean projection onto {0 <= a <= C, y.a = 0}, y in {-1, +1}.

    g(nu) = sum y_i clip(v_i - nu y_i, 0, C) is piecewise linear and
    non-increasing; its root is found exactly between breakpoints.
    """
    bps = np.unique(np.concatenate([v * y, (v - C) * y]))

    def g(nu):
        return np.sum(y * np.clip(v[None, :] - np.outer(nu, y), 0, C), axis=1)

    gv = g(bps)
    if gv[0] <= 0:
        nu = bps[0]
    elif gv[-1] >= 0:
        nu = bps[-1]
    else:
        k = int(np.flatnonzero(gv <= 0)[0])
        lo, hi = bps[k - 1], bps[k]
        glo, ghi = gv[k - 1], gv[k]
        nu = lo if glo == ghi else lo + (hi - lo) * glo / (glo - ghi)
    return np.clip(v - nu * y, 0, C)


def qp_dual(K, y, C, iters=20000):
    """Maximise sum(a) - 1/2 (a*y)' K (a*y) by accelerated projected gradient."""
    y = np.asarray(y, dtype=np.float64)
    Q = K * np.outer(y, y)
    L = float(np.linalg.eigvalsh(Q)[-1])
    step = 1.0 / L
    a = np.zeros(len(y))
    z = a.copy()
    t = 1.0

    def obj(v):
        return float(v.sum() - 0.5 * v @ Q @ v)

    best = obj(a)
    for _ in range(iters):
        a_new = project_box_hyperplane(z + step * (1.0 - Q @ z), y, C)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        val = obj(a_new)
        if val < best - 1e-15 * abs(best):
            # adaptive restart keeps the iteration monotone
            z, t = a.copy(), 1.0
            continue
        z = a_new + ((t - 1) / t_new) * (a_new - a)
        a, t, best = a_new, t_new, val
    return a, best


def standardize(X):
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def rbf(A, B, gamma):
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    return np.exp(-gamma * d2)


# --- MLP forward pass -----------------------------------------------------------------


def mlp_forward(weights, biases, Z):
    h = np.asarray(Z, dtype=np.float64)
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
    logits = h @ weights[-1] + biases[-1]
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def mlp_loss(weights, biases, Z, y):
    p = mlp_forward(weights, biases, Z)
    return float(-np.mean(np.log(p[np.arange(len(y)), y])))
