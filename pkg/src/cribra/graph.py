"""Delaunay triangulation (Bowyer-Watson) and Euclidean MST (Kruskal) over
nuclei centroids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateCollinear, TooFewPoints

COLLINEAR_TOL = 1e-9
SUPER_SCALE = 10.0


@dataclass(frozen=True)
class Triangulation:
    points: np.ndarray
    triangles: list[tuple[int, int, int]]

    def areas(self) -> np.ndarray:
        return np.array([triangle_area(*self.points[list(t)]) for t in self.triangles])

    def perimeters(self) -> np.ndarray:
        p = self.points
        return np.array([
            math.dist(p[i], p[j]) + math.dist(p[j], p[k]) + math.dist(p[k], p[i])
            for i, j, k in self.triangles
        ])

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for i, j, k in self.triangles:
            for a, b in ((i, j), (j, k), (k, i)):
                out.add((min(a, b), max(a, b)))
        return out


@dataclass(frozen=True)
class SpanningTree:
    edges: list[tuple[int, int, float]]
    total_weight: float

    @property
    def weights(self) -> list[float]:
        return [w for _, _, w in self.edges]


def triangle_area(a, b, c) -> float:
    return abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) / 2.0


def dedupe_points(points) -> np.ndarray:
    """Merge exact-duplicate coordinates, keeping first-occurrence order."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return pts
    _, first = np.unique(pts, axis=0, return_index=True)
    return pts[np.sort(first)]


# --- robust predicates -------------------------------------------------------
# Float evaluation with a conservative relative error filter; exact rational
# arithmetic when the sign is uncertain.

def _sign(x) -> int:
    return int(x > 0) - int(x < 0)


def orient2d(a, b, c) -> int:
    detl = (b[0] - a[0]) * (c[1] - a[1])
    detr = (b[1] - a[1]) * (c[0] - a[0])
    det = detl - detr
    if abs(det) > 1e-12 * (abs(detl) + abs(detr)):
        return _sign(det)
    fa, fb, fc = [(Fraction(p[0]), Fraction(p[1])) for p in (a, b, c)]
    det = (fb[0] - fa[0]) * (fc[1] - fa[1]) - (fb[1] - fa[1]) * (fc[0] - fa[0])
    return _sign(det)


def incircle(a, b, c, d) -> int:
    """+1 if d lies strictly inside the circle through CCW a, b, c."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    t1 = alift * (bdx * cdy - cdx * bdy)
    t2 = blift * (cdx * ady - adx * cdy)
    t3 = clift * (adx * bdy - bdx * ady)
    det = t1 + t2 + t3
    perm = (alift * (abs(bdx * cdy) + abs(cdx * bdy))
            + blift * (abs(cdx * ady) + abs(adx * cdy))
            + clift * (abs(adx * bdy) + abs(bdx * ady)))
    if abs(det) > 1e-10 * perm:
        return _sign(det)
    A, B, C, D = [(Fraction(p[0]), Fraction(p[1])) for p in (a, b, c, d)]
    adx, ady = A[0] - D[0], A[1] - D[1]
    bdx, bdy = B[0] - D[0], B[1] - D[1]
    cdx, cdy = C[0] - D[0], C[1] - D[1]
    det = ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
           + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
           + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))
    return _sign(det)


def is_collinear(points, tol: float = COLLINEAR_TOL) -> bool:
    """True when every point is within ``tol`` (scaled by extent if > 1) of one line."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 3:
        return True
    centred = pts - pts.mean(axis=0)
    extent = max(1.0, float(np.abs(centred).max()))
    # smallest singular direction gives the best-fit line normal
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    dist = np.abs(centred @ vt[-1])
    return bool(dist.max() <= tol * extent)


def convex_hull(points) -> list[int]:
    """Indices of strict convex hull vertices in CCW order (monotone chain)."""
    pts = [tuple(p) for p in np.asarray(points, dtype=np.float64).tolist()]
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    if len(order) < 3:
        return order

    def chain(idx):
        out: list[int] = []
        for i in idx:
            while len(out) >= 2 and orient2d(pts[out[-2]], pts[out[-1]], pts[i]) <= 0:
                out.pop()
            out.append(i)
        return out

    lower = chain(order)
    upper = chain(reversed(order))
    return lower[:-1] + upper[:-1]


# --- Bowyer-Watson ---------------------------------------------------------

def _circumcircle(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        # NaN radius routes every query to the exact predicate
        return math.nan, math.nan, math.nan
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    return ux, uy, (ax - ux) ** 2 + (ay - uy) ** 2


def _bowyer_watson(pts: list[tuple[float, float]], scale: float) -> list[tuple[int, int, int]]:
    n = len(pts)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    xmin, xmax, ymin, ymax = min(xs), max(xs), min(ys), max(ys)
    span = max(xmax - xmin, ymax - ymin, 1e-12)
    mx, my = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0
    r = scale * span
    verts = list(pts) + [
        (mx - 2.0 * r, my - r),
        (mx + 2.0 * r, my - r),
        (mx, my + 2.0 * r),
    ]
    tris: dict[tuple[int, int, int], tuple[float, float, float]] = {}

    def add(i, j, k):
        if orient2d(verts[i], verts[j], verts[k]) < 0:
            j, k = k, j
        tris[(i, j, k)] = _circumcircle(verts[i], verts[j], verts[k])

    add(n, n + 1, n + 2)
    for p_idx in range(n):
        p = verts[p_idx]
        px, py = p
        bad = []
        for tri, (ux, uy, r2) in tris.items():
            d2 = (px - ux) ** 2 + (py - uy) ** 2
            # cheap reject well outside the circle, robust predicate otherwise
            if d2 > r2 * (1.0 + 1e-3):
                continue
            if incircle(verts[tri[0]], verts[tri[1]], verts[tri[2]], p) > 0:
                bad.append(tri)
        edge_count: dict[tuple[int, int], int] = {}
        for i, j, k in bad:
            for a, b in ((i, j), (j, k), (k, i)):
                key = (a, b) if a < b else (b, a)
                edge_count[key] = edge_count.get(key, 0) + 1
        for tri in bad:
            del tris[tri]
        for (a, b), cnt in edge_count.items():
            if cnt == 1:
                add(a, b, p_idx)
    return [t for t in tris if max(t) < n]


def delaunay(points) -> Triangulation:
    """Delaunay triangulation of distinct 2-D points.

    Points are inserted in lexicographic coordinate order, so the triangle
    set depends only on the point set. If the super-triangle (``SUPER_SCALE``
    times the bounding box) leaves a convex-hull edge uncovered, the build is
    repeated with a larger super-triangle.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n < 3:
        raise TooFewPoints(f"Delaunay needs >= 3 points, got {n}")
    if len(dedupe_points(pts)) != n:
        raise ValueError("delaunay() requires distinct points; call dedupe_points first")
    if is_collinear(pts):
        raise DegenerateCollinear("all points lie on one line")
    order = sorted(range(n), key=lambda i: (pts[i, 0], pts[i, 1]))
    ordered = [(float(pts[i, 0]), float(pts[i, 1])) for i in order]
    hull = convex_hull(ordered)
    hull_edges = {(min(a, b), max(a, b)) for a, b in zip(hull, hull[1:] + hull[:1])}
    scale = SUPER_SCALE
    while True:
        tris = _bowyer_watson(ordered, scale)
        edges = set()
        for i, j, k in tris:
            for a, b in ((i, j), (j, k), (k, i)):
                edges.add((min(a, b), max(a, b)))
        if hull_edges <= edges or scale > 1e12:
            break
        scale *= 1000.0
    canon = sorted(_canonical(tuple(order[v] for v in t)) for t in tris)
    return Triangulation(pts, canon)


def _canonical(tri):
    """Rotate a CCW triple so its smallest index comes first."""
    k = tri.index(min(tri))
    return tri[k:] + tri[:k]


# --- MST ----------------------------------------------------------------------

class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def kruskal(n: int, edges) -> SpanningTree:
    """Kruskal over (i, j, w) edges; ties broken by (i, j)."""
    uf = _UnionFind(n)
    chosen = []
    for w, i, j in sorted((w, min(i, j), max(i, j)) for i, j, w in edges):
        if uf.union(i, j):
            chosen.append((i, j, w))
            if len(chosen) == n - 1:
                break
    return SpanningTree(chosen, math.fsum(w for _, _, w in chosen))


def mst(points) -> SpanningTree:
    """Euclidean minimum spanning tree over the complete graph on ``points``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        raise TooFewPoints(f"MST needs >= 2 points, got {n}")
    iu, ju = np.triu_indices(n, k=1)
    w = np.hypot(pts[iu, 0] - pts[ju, 0], pts[iu, 1] - pts[ju, 1])
    order = np.lexsort((ju, iu, w))
    uf = _UnionFind(n)
    chosen = []
    for e in order.tolist():
        i, j = int(iu[e]), int(ju[e])
        if uf.union(i, j):
            chosen.append((i, j, float(w[e])))
            if len(chosen) == n - 1:
                break
    return SpanningTree(chosen, math.fsum(wt for _, _, wt in chosen))
