"""Incremental Bowyer-Watson triangulation.

The unbounded exterior is handled with a single ghost vertex instead of a
finite super-triangle: every convex-hull edge (u, v) carries a ghost
triangle (v, u, GHOST) whose "circumcircle" is the open half-plane beyond the
edge (plus the open edge itself). This keeps the output an exact
triangulation of the convex hull, with no missing hull triangles, for any
input including collinear runs on the hull.
"""
import random

import numpy as np

from ..errors import DegenerateInputError
from .predicates import incircle, orient2d

GHOST = -1


class _Triangulation:
    def __init__(self, pts):
        self.pts = pts
        self.verts = []    # [a, b, c], ccw; a ghost triangle stores GHOST last
        self.nbrs = []     # nbrs[t][i] is the triangle across the edge opposite verts[t][i]
        self.alive = []
        self.last = 0
        self._rng = random.Random(0)

    def add(self, a, b, c):
        self.verts.append([a, b, c])
        self.nbrs.append([-1, -1, -1])
        self.alive.append(True)
        return len(self.verts) - 1

    def is_ghost(self, t):
        return self.verts[t][2] == GHOST

    def in_conflict(self, t, p):
        a, b, c = self.verts[t]
        P = self.pts
        if c == GHOST:
            o = orient2d(P[a], P[b], P[p])
            if o > 0:
                return True
            if o < 0:
                return False
            # collinear: conflict only on the open segment between a and b
            pa, pb, pp = P[a], P[b], P[p]
            k = 0 if pa[0] != pb[0] else 1
            lo, hi = min(pa[k], pb[k]), max(pa[k], pb[k])
            return lo < pp[k] < hi
        return incircle(P[a], P[b], P[c], P[p]) > 0

    def locate(self, p):
        """Walk from the most recent triangle to one in conflict with p."""
        P = self.pts
        t = self.last
        if not self.alive[t]:
            t = next(i for i in range(len(self.alive) - 1, -1, -1) if self.alive[i])
        if self.is_ghost(t):
            t = self.nbrs[t][2]
        for _ in range(4 * len(self.verts) + 10):
            if self.is_ghost(t):
                return t
            v = self.verts[t]
            start = self._rng.randrange(3)
            moved = False
            for s in range(3):
                i = (start + s) % 3
                a, b = v[(i + 1) % 3], v[(i + 2) % 3]
                if orient2d(P[a], P[b], P[p]) < 0:
                    t = self.nbrs[t][i]
                    moved = True
                    break
            if not moved:
                return t
        # walk failed to terminate (should not happen on a Delaunay mesh)
        for t in range(len(self.verts)):
            if self.alive[t] and self.in_conflict(t, p):
                return t
        raise DegenerateInputError(f"could not locate point {p}")

    def insert(self, p):
        t0 = self.locate(p)
        if not self.in_conflict(t0, p):
            # p sits on the circumcircle only; pick any conflicting neighbour
            t0 = next(n for n in self.nbrs[t0] if self.in_conflict(n, p))
        cavity = {t0}
        stack = [t0]
        boundary = []  # (u, v, outside triangle)
        while stack:
            t = stack.pop()
            v = self.verts[t]
            for i in range(3):
                n = self.nbrs[t][i]
                edge = (v[(i + 1) % 3], v[(i + 2) % 3])
                if n in cavity:
                    continue
                if self.in_conflict(n, p):
                    cavity.add(n)
                    stack.append(n)
                else:
                    boundary.append((edge[0], edge[1], n))
        # boundary edges touching triangles later added to the cavity are stale
        boundary = [(u, w, n) for (u, w, n) in boundary if n not in cavity]
        for t in cavity:
            self.alive[t] = False

        by_start = {}
        created = []
        for u, w, n in boundary:
            if u == GHOST:
                tri = (w, p, GHOST)
            elif w == GHOST:
                tri = (p, u, GHOST)
            else:
                tri = (u, w, p)
            t = self.add(*tri)
            created.append((t, u, w, n))
            # link the outside neighbour across (u, w)
            vn = self.verts[n]
            for j in range(3):
                if {vn[(j + 1) % 3], vn[(j + 2) % 3]} == {u, w}:
                    self.nbrs[n][j] = t
                    break
            vt = self.verts[t]
            for j in range(3):
                if {vt[(j + 1) % 3], vt[(j + 2) % 3]} == {u, w}:
                    self.nbrs[t][j] = n
            by_start[u] = t
        # link new triangles to each other across the edges through p
        for t, u, w, n in created:
            vt = self.verts[t]
            for j in range(3):
                e0, e1 = vt[(j + 1) % 3], vt[(j + 2) % 3]
                if p not in (e0, e1):
                    continue
                other = e0 if e1 == p else e1
                # the cavity fan: the triangle starting at w follows the one ending at w
                if other == w:
                    self.nbrs[t][j] = by_start[w]
                else:
                    self.nbrs[t][j] = _ending_at(created, u)
        self.last = created[-1][0]


def _ending_at(created, u):
    for t, a, b, _ in created:
        if b == u:
            return t
    raise DegenerateInputError("cavity boundary is not a closed loop")


def triangulate(coords):
    """Delaunay triangles (ccw vertex triples) of the given distinct points."""
    pts = [tuple(map(float, c)) for c in np.asarray(coords, float)]
    n = len(pts)
    if n < 3:
        raise DegenerateInputError("need at least 3 points")
    i0, i1 = 0, 1
    i2 = next((k for k in range(2, n) if orient2d(pts[i0], pts[i1], pts[k]) != 0), None)
    if i2 is None:
        raise DegenerateInputError("all points are collinear")
    if orient2d(pts[i0], pts[i1], pts[i2]) < 0:
        i0, i1 = i1, i0
    T = _Triangulation(pts)
    t = T.add(i0, i1, i2)
    g = [T.add(i1, i0, GHOST), T.add(i2, i1, GHOST), T.add(i0, i2, GHOST)]
    # real triangle: edge opposite i2 is (i0,i1), opposite i0 is (i1,i2), opposite i1 is (i2,i0)
    T.nbrs[t] = [g[1], g[2], g[0]]
    # ghost (b, a, G): index 2 faces the real edge; 0 and 1 face the ghost edges
    T.nbrs[g[0]] = [g[2], g[1], t]   # (i1, i0, G): opp i1 -> (i0,G), opp i0 -> (G,i1)
    T.nbrs[g[1]] = [g[0], g[2], t]   # (i2, i1, G): opp i2 -> (i1,G), opp i1 -> (G,i2)
    T.nbrs[g[2]] = [g[1], g[0], t]   # (i0, i2, G): opp i0 -> (i2,G), opp i2 -> (G,i0)
    for p in range(n):
        if p in (i0, i1, i2):
            continue
        T.insert(p)
    tris = np.array([v for v, a in zip(T.verts, T.alive) if a and v[2] != GHOST], dtype=np.int64)
    return _break_cocircular_ties(tris, pts)


def _break_cocircular_ties(tris, pts):
    """Flip cocircular diagonals so each one uses the lowest vertex index of its quad."""
    tris = tris.copy()
    for _ in range(100):
        edges = {}
        for t, (a, b, c) in enumerate(tris):
            for u, w, opp in ((a, b, c), (b, c, a), (c, a, b)):
                edges.setdefault((min(u, w), max(u, w)), []).append((t, opp))
        used = set()
        flipped = False
        for (u, w), sides in edges.items():
            if len(sides) != 2:
                continue
            (t1, c), (t2, d) = sides
            if t1 in used or t2 in used:
                continue
            if min(u, w, c, d) not in (c, d):
                continue
            a, b, cc = tris[t1]
            if incircle(pts[a], pts[b], pts[cc], pts[d]) != 0:
                continue
            # orient t1 as (u', w', c) ccw, then the quad is u', d, w', c
            k = [a, b, cc].index(c)
            up, wp = tris[t1][(k + 1) % 3], tris[t1][(k + 2) % 3]
            tris[t1] = (d, wp, c)
            tris[t2] = (c, up, d)
            used.update((t1, t2))
            flipped = True
        if not flipped:
            break
    return tris
