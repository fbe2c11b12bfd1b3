"""Monotone inner polytopes of the security injection region.

The starting polytope is the simplex spanned by the lower box corner and
the support points along each coordinate axis. Each expansion round solves
a support problem along the outward normal of every facet that does not
lie on a lower box face and adds the optimizer as a vertex when it beats
the facet by more than ``eps_gain``. All vertices are feasible and the
region is convex, so every polytope in the sequence is an inner
approximation and each contains its predecessor.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateHullError, SupportError, UnsupportedDimensionError, WdsirError
from .hull import convex_hull
from .support import SIRProblem, SupportResult, maximize_support

CONTAINS_TOL = 1e-9
GAIN_REL = 1e-3
DEDUPE_REL = 1e-7


@dataclass(frozen=True)
class Facet:
    normal: np.ndarray  # outward unit normal
    offset: float
    ring: tuple[int, ...]  # vertex indices


@dataclass(frozen=True)
class Polytope:
    vertices: np.ndarray  # (m, dim)
    facets: tuple[Facet, ...]

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    def contains(self, point, tol=CONTAINS_TOL) -> bool:
        return contains(self, point, tol)

    @property
    def volume(self) -> float:
        return volume(self)

    @classmethod
    def point(cls, vertex) -> "Polytope":
        v = np.asarray(vertex, dtype=float).reshape(1, -1)
        return cls(v, ())


@dataclass(frozen=True)
class StepInfo:
    new_vertices: int
    facets_tried: int
    best_gain: float
    failures: tuple[str, ...]
    elapsed_s: float
    supports: tuple[SupportResult, ...] = ()


@dataclass(frozen=True)
class PolytopeSequence:
    polytopes: tuple[Polytope, ...]
    steps: tuple[StepInfo, ...]  # one per polytope; the first describes the axis solves
    volumes: tuple[float, ...] = field(default=())

    def __len__(self):
        return len(self.polytopes)

    @property
    def final(self) -> Polytope:
        return self.polytopes[-1]

    @property
    def relative_volumes(self) -> list[float]:
        return relative_volumes(self)

    @property
    def supports(self) -> list[SupportResult]:
        return [s for step in self.steps for s in step.supports]


def _scale(lo, hi):
    span = np.where(hi > lo, hi - lo, 1.0)
    return lo, span


def dedupe(points, tol) -> np.ndarray:
    """Drop points within ``tol`` of an earlier one, keeping input order."""
    kept = []
    for p in np.asarray(points, dtype=float):
        if all(np.linalg.norm(p - q) > tol for q in kept):
            kept.append(p)
    return np.array(kept)


def polytope_from_points(points, lo=None, hi=None) -> Polytope:
    """Hull of ``points``; ``lo``/``hi`` give the scaling box for the exact
    predicates (defaults to the bounding box of the points)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise DegenerateHullError("no points")
    lo = pts.min(axis=0) if lo is None else np.asarray(lo, dtype=float)
    hi = pts.max(axis=0) if hi is None else np.asarray(hi, dtype=float)
    origin, span = _scale(lo, hi)
    scaled = (pts - origin) / span
    hull = convex_hull(scaled)
    remap = {old: new for new, old in enumerate(hull.vertices)}
    verts = pts[list(hull.vertices)]
    dim = pts.shape[1]
    facets = []
    for ring in hull.facets:
        if dim == 1:
            i = ring[0]
            other = [v for v in hull.vertices if v != i][0]
            n = np.array([1.0 if scaled[i, 0] > scaled[other, 0] else -1.0])
        elif dim == 2:
            a, b = scaled[ring[0]], scaled[ring[1]]
            n = np.array([b[1] - a[1], a[0] - b[0]])
        else:
            n = _ring_normal(scaled, ring)
        n = n / span
        n = n / np.linalg.norm(n)
        new_ring = tuple(remap[v] for v in ring)
        offset = max(float(n @ verts[v]) for v in new_ring)
        facets.append(Facet(n, offset, new_ring))
    return Polytope(verts, tuple(facets))


def _ring_normal(pts, ring):
    n = np.zeros(3)
    ring = list(ring)
    for i, j in zip(ring, ring[1:] + ring[:1]):
        p, q = pts[i], pts[j]
        n[0] += (p[1] - q[1]) * (p[2] + q[2])
        n[1] += (p[2] - q[2]) * (p[0] + q[0])
        n[2] += (p[0] - q[0]) * (p[1] + q[1])
    return n


def contains(poly: Polytope, point, tol=CONTAINS_TOL) -> bool:
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.shape[0] != poly.dimension:
        raise ValueError(f"point has dimension {x.shape[0]}, polytope {poly.dimension}")
    if not poly.facets:
        # lower-dimensional point set, e.g. a single vertex
        return any(float(np.max(np.abs(v - x))) <= tol for v in poly.vertices)
    return all(float(f.normal @ x) <= f.offset + tol for f in poly.facets)


def volume(poly: Polytope) -> float:
    """Exact volume by a fan from the vertex centroid (dimension <= 3)."""
    dim = poly.dimension
    v = poly.vertices
    if not poly.facets:
        return 0.0
    if dim == 1:
        return float(v[:, 0].max() - v[:, 0].min())
    if dim > 3:
        raise UnsupportedDimensionError("volume is implemented up to 3 dimensions")
    c = v.mean(axis=0)
    total = 0.0
    for f in poly.facets:
        if dim == 2:
            a, b = v[f.ring[0]] - c, v[f.ring[1]] - c
            total += abs(a[0] * b[1] - a[1] * b[0]) / 2.0
        else:
            r = f.ring
            for i in range(1, len(r) - 1):
                m = np.array([v[r[0]] - c, v[r[i]] - c, v[r[i + 1]] - c])
                total += abs(np.linalg.det(m)) / 6.0
    return total


def relative_volumes(seq: PolytopeSequence) -> list[float]:
    vols = [volume(p) for p in seq.polytopes]
    if not vols:
        return []
    ref = vols[-1]
    return [v / ref for v in vols[:-1]] + [1.0]


def _on_lower_face(prob: SIRProblem, poly: Polytope, facet: Facet) -> bool:
    lo, hi = prob.box
    tol = DEDUPE_REL * prob.box_diagonal
    for i in range(prob.dimension):
        if all(abs(poly.vertices[v][i] - lo[i]) <= tol for v in facet.ring) and facet.normal[i] < 0:
            return True
    return False


def starting_polytope(prob: SIRProblem) -> tuple[Polytope, StepInfo]:
    t0 = time.perf_counter()
    dim = prob.dimension
    results = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        res = maximize_support(prob, e)
        results.append(res)
        if not res.converged:
            raise SupportError(f"axis {i} support solve did not converge", partial=tuple(results))
    anchor = prob.nominal()
    pts = np.vstack([anchor] + [r.vertex for r in results])
    lo, hi = prob.box
    if dim > 1 and abs(np.linalg.det(pts[1:] - anchor)) <= 0.0:
        raise DegenerateHullError("axis maxima affinely dependent")
    try:
        poly = polytope_from_points(pts, lo, hi)
    except DegenerateHullError:
        raise DegenerateHullError("axis maxima affinely dependent") from None
    gains = [float(r.vertex[i] - anchor[i]) for i, r in enumerate(results)]
    step = StepInfo(dim, dim, max(gains), (), time.perf_counter() - t0, tuple(results))
    return poly, step


def expand_once(prob: SIRProblem, current: Polytope, eps_gain=None) -> tuple[Polytope, StepInfo]:
    t0 = time.perf_counter()
    diag = prob.box_diagonal
    eps_gain = GAIN_REL * diag if eps_gain is None else eps_gain
    new, results, failures = [], [], []
    best_gain = -math.inf
    tried = 0
    for facet in current.facets:
        if _on_lower_face(prob, current, facet):
            continue
        tried += 1
        try:
            res = maximize_support(prob, facet.normal)
        except WdsirError as exc:
            failures.append(f"facet {facet.ring}: {exc}")
            continue
        results.append(res)
        gain = res.objective - facet.offset
        best_gain = max(best_gain, gain)
        if gain > eps_gain:
            new.append(res.vertex)
    if not new:
        return current, StepInfo(0, tried, best_gain, tuple(failures), time.perf_counter() - t0, tuple(results))
    tol = DEDUPE_REL * diag
    pts = dedupe(np.vstack([current.vertices, *new]), tol)
    added = len(pts) - len(current.vertices)
    lo, hi = prob.box
    poly = polytope_from_points(pts, lo, hi)
    return poly, StepInfo(added, tried, best_gain, tuple(failures), time.perf_counter() - t0, tuple(results))


def build_sequence(prob: SIRProblem, max_rounds=3, eps_gain=None) -> PolytopeSequence:
    """Starting polytope plus up to ``max_rounds`` expansions; stops early
    when a round adds no vertex."""
    if max_rounds < 0:
        raise ValueError("max_rounds must be nonnegative")
    poly, step = starting_polytope(prob)
    polys, steps = [poly], [step]
    for _ in range(max_rounds):
        poly, step = expand_once(prob, poly, eps_gain)
        if step.new_vertices == 0:
            break
        polys.append(poly)
        steps.append(step)
    return PolytopeSequence(tuple(polys), tuple(steps), tuple(volume(p) for p in polys))


def sample_interior(poly: Polytope, n, rng=None, max_draws=None) -> np.ndarray:
    """``n`` points uniform in the polytope by rejection from its bounding box."""
    rng = np.random.default_rng(rng)
    lo, hi = poly.vertices.min(axis=0), poly.vertices.max(axis=0)
    max_draws = 1000 * n if max_draws is None else max_draws
    out, drawn = [], 0
    while len(out) < n and drawn < max_draws:
        x = rng.uniform(lo, hi)
        drawn += 1
        if contains(poly, x):
            out.append(x)
    if len(out) < n:
        raise DegenerateHullError(f"found only {len(out)} interior samples in {drawn} draws")
    return np.array(out)
