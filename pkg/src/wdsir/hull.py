"""Convex hulls in one, two and three dimensions with exact predicates.

Orientation tests run in floating point behind a static error filter and
fall back to rational arithmetic when the filter cannot certify the sign.
Callers should pass coordinates scaled to a unit-ish box so the filter
succeeds almost always.

The 3-D hull is incremental: each new point deletes the triangles that
strictly see it and is joined to their horizon. Triangles are finally
merged per supporting plane into polygonal facets whose rings keep only
strict corners.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateHullError, UnsupportedDimensionError

_EPS = 2.0 ** -53
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_O3D_BOUND = (7.0 + 56.0 * _EPS) * _EPS


def orient2d(a, b, c) -> int:
    """Sign of (b - a) x (c - a): +1 when a, b, c turn counterclockwise."""
    left = (a[0] - c[0]) * (b[1] - c[1])
    right = (a[1] - c[1]) * (b[0] - c[0])
    det = left - right
    bound = _CCW_BOUND * (abs(left) + abs(right))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    ax, ay, bx, by, cx, cy = (Fraction(v) for v in (a[0], a[1], b[0], b[1], c[0], c[1]))
    exact = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (exact > 0) - (exact < 0)


def orient3d(a, b, c, d) -> int:
    """Sign of ((b - a) x (c - a)) . (d - a): +1 when d lies on the side the
    right-handed normal of triangle abc points to."""
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    wx, wy, wz = d[0] - a[0], d[1] - a[1], d[2] - a[2]
    p1, p2 = uy * vz, uz * vy
    p3, p4 = uz * vx, ux * vz
    p5, p6 = ux * vy, uy * vx
    det = (p1 - p2) * wx + (p3 - p4) * wy + (p5 - p6) * wz
    perm = ((abs(p1) + abs(p2)) * abs(wx) + (abs(p3) + abs(p4)) * abs(wy)
            + (abs(p5) + abs(p6)) * abs(wz))
    bound = _O3D_BOUND * perm
    if det > bound:
        return 1
    if -det > bound:
        return -1
    fa, fb, fc, fd = ([Fraction(x) for x in p[:3]] for p in (a, b, c, d))
    u = [fb[i] - fa[i] for i in range(3)]
    v = [fc[i] - fa[i] for i in range(3)]
    w = [fd[i] - fa[i] for i in range(3)]
    exact = ((u[1] * v[2] - u[2] * v[1]) * w[0] + (u[2] * v[0] - u[0] * v[2]) * w[1]
             + (u[0] * v[1] - u[1] * v[0]) * w[2])
    return (exact > 0) - (exact < 0)


@dataclass(frozen=True)
class HullResult:
    """Indices into the input point list.

    ``vertices`` are the extreme points in ascending index order. ``facets``
    are rings: counterclockwise seen from outside in 3-D, a directed edge
    ``(a, b)`` of a counterclockwise polygon in 2-D, a single index in 1-D.
    """

    vertices: tuple[int, ...]
    facets: tuple[tuple[int, ...], ...]


def _chain(pts, idx):
    """Monotone chain; returns strict corners counterclockwise."""
    idx = sorted(idx, key=lambda i: (pts[i][0], pts[i][1]))
    uniq = []
    for i in idx:
        if not uniq or tuple(pts[uniq[-1]]) != tuple(pts[i]):
            uniq.append(i)
    if len(uniq) < 3:
        return uniq

    def half(seq):
        out = []
        for i in seq:
            while len(out) >= 2 and orient2d(pts[out[-2]], pts[out[-1]], pts[i]) <= 0:
                out.pop()
            out.append(i)
        return out

    lower, upper = half(uniq), half(reversed(uniq))
    return lower[:-1] + upper[:-1]


def hull_1d(points) -> HullResult:
    pts = np.asarray(points, dtype=float).reshape(len(points), -1)
    lo, hi = int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))
    if pts[lo, 0] == pts[hi, 0]:
        raise DegenerateHullError("all points coincide")
    return HullResult(tuple(sorted((lo, hi))), ((lo,), (hi,)))


def hull_2d(points) -> HullResult:
    pts = [tuple(p) for p in np.asarray(points, dtype=float)]
    ring = _chain(pts, range(len(pts)))
    if len(ring) < 3:
        raise DegenerateHullError("points are collinear")
    facets = tuple((ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring)))
    return HullResult(tuple(sorted(ring)), facets)


def _initial_simplex(pts):
    n = len(pts)
    a = 0
    b = next((i for i in range(n) if pts[i] != pts[a]), None)
    if b is None:
        raise DegenerateHullError("all points coincide")
    c = None
    for i in range(n):
        for axes in ((0, 1), (1, 2), (0, 2)):
            p2 = [(pts[j][axes[0]], pts[j][axes[1]]) for j in (a, b, i)]
            if orient2d(*p2) != 0:
                c = i
                break
        if c is not None:
            break
    if c is None:
        raise DegenerateHullError("points are collinear")
    d = next((i for i in range(n) if orient3d(pts[a], pts[b], pts[c], pts[i]) != 0), None)
    if d is None:
        raise DegenerateHullError("points are coplanar")
    return a, b, c, d


def hull_3d(points) -> HullResult:
    pts = [tuple(float(x) for x in p) for p in np.asarray(points, dtype=float)]
    a, b, c, d = _initial_simplex(pts)
    if orient3d(pts[a], pts[b], pts[c], pts[d]) > 0:
        b, c = c, b
    faces = {(a, b, c), (a, d, b), (b, d, c), (c, d, a)}
    for x in range(len(pts)):
        if x in (a, b, c, d):
            continue
        px = pts[x]
        visible = [f for f in faces if orient3d(pts[f[0]], pts[f[1]], pts[f[2]], px) > 0]
        if not visible:
            continue
        edges = set()
        for f in visible:
            edges.update(((f[0], f[1]), (f[1], f[2]), (f[2], f[0])))
        for f in visible:
            faces.discard(f)
        for u, v in edges:
            if (v, u) not in edges:
                faces.add((u, v, x))
    return _merge_coplanar(pts, sorted(faces))


def _newell(pts, ring):
    n = np.zeros(3)
    for i, j in zip(ring, ring[1:] + ring[:1]):
        p, q = pts[i], pts[j]
        n[0] += (p[1] - q[1]) * (p[2] + q[2])
        n[1] += (p[2] - q[2]) * (p[0] + q[0])
        n[2] += (p[0] - q[0]) * (p[1] + q[1])
    return n


def _merge_coplanar(pts, triangles):
    groups = []
    for t in triangles:
        for g in groups:
            ref = g[0]
            if all(orient3d(pts[ref[0]], pts[ref[1]], pts[ref[2]], pts[v]) == 0 for v in t):
                g.append(t)
                break
        else:
            groups.append([t])
    facets = []
    for g in groups:
        members = sorted({v for t in g for v in t})
        normal = _newell(pts, list(g[0]))
        k = int(np.argmax(np.abs(normal)))
        i, j = (k + 1) % 3, (k + 2) % 3
        proj = {v: (pts[v][i], pts[v][j]) for v in members}
        ring = _chain(proj, members)
        if normal[k] < 0:
            ring = ring[::-1]
        start = ring.index(min(ring))
        facets.append(tuple(ring[start:] + ring[:start]))
    facets.sort()
    verts = sorted({v for f in facets for v in f})
    return HullResult(tuple(verts), tuple(facets))


def convex_hull(points) -> HullResult:
    """Hull of an (m, dim) array for dim in {1, 2, 3}."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2:
        raise ValueError("points must be a 2-D array")
    dim = arr.shape[1]
    if dim == 1:
        return hull_1d(arr)
    if dim == 2:
        return hull_2d(arr)
    if dim == 3:
        return hull_3d(arr)
    raise UnsupportedDimensionError(f"hulls are implemented for 1 to 3 dimensions, not {dim}")
