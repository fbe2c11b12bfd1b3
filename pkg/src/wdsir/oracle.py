"""Brute-force checks of the polytope pipeline.

Everything here goes through the feasibility checker point by point and
never through the support solver, so it can falsify the solver's output.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamplesError
from .hydraulics import FeasibilityVerdict
from .polytope import Polytope, PolytopeSequence, contains
from .support import EPS_OBJ_REL, SIRProblem, SupportResult, maximize_support


@dataclass(frozen=True)
class GridScreen:
    axes: tuple[np.ndarray, ...]
    verdicts: tuple[FeasibilityVerdict, ...]  # lexicographic order, last axis fastest

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def points(self) -> np.ndarray:
        return np.array(list(itertools.product(*self.axes)), dtype=float).reshape(-1, len(self.axes))

    @property
    def feasible(self) -> np.ndarray:
        return np.array([v.feasible for v in self.verdicts], dtype=bool)

    @property
    def mask(self) -> np.ndarray:
        """Feasibility as a dense array indexed by grid position."""
        return self.feasible.reshape(self.shape)

    @property
    def counts(self) -> tuple[int, int, int]:
        f = int(self.feasible.sum())
        return f, len(self.verdicts) - f, len(self.verdicts)


def axis_maxima(prob: SIRProblem) -> np.ndarray:
    out = np.empty(prob.dimension)
    for i in range(prob.dimension):
        e = np.zeros(prob.dimension)
        e[i] = 1.0
        out[i] = maximize_support(prob, e).vertex[i]
    return out


def grid_screen(prob: SIRProblem, k=9, upper=None, lower=None) -> GridScreen:
    """Feasibility at every point of a k^N grid over [lower, upper].

    ``lower`` defaults to the box lower corner and ``upper`` to the axis
    maxima of the region.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    lo = prob.box[0] if lower is None else np.asarray(lower, dtype=float)
    hi = axis_maxima(prob) if upper is None else np.asarray(upper, dtype=float)
    if lo.shape != (prob.dimension,) or hi.shape != (prob.dimension,):
        raise ValueError("grid bounds must match the problem dimension")
    axes = tuple(np.linspace(lo[i], hi[i], k) for i in range(prob.dimension))
    check = prob.checker.evaluate
    verdicts = tuple(check(prob.embed(np.array(p))) for p in itertools.product(*axes))
    return GridScreen(axes, verdicts)


@dataclass(frozen=True)
class PolytopeAgreement:
    inside: int  # grid points inside the polytope
    false_positives: int  # inside but infeasible
    covered: int  # feasible and inside
    coverage: float  # covered / feasible grid points


@dataclass(frozen=True)
class AgreementReport:
    feasible_points: int
    total_points: int
    polytopes: tuple[PolytopeAgreement, ...]

    @property
    def false_positives(self) -> int:
        return sum(p.false_positives for p in self.polytopes)

    @property
    def coverages(self) -> list[float]:
        return [p.coverage for p in self.polytopes]


def agreement_one(poly: Polytope, screen: GridScreen) -> PolytopeAgreement:
    if poly.dimension != len(screen.axes):
        raise ValueError(f"polytope dimension {poly.dimension} does not match grid {len(screen.axes)}")
    feas = screen.feasible
    inside = np.array([contains(poly, p) for p in screen.points], dtype=bool)
    n_feas = int(feas.sum())
    covered = int((inside & feas).sum())
    return PolytopeAgreement(int(inside.sum()), int((inside & ~feas).sum()), covered,
                             covered / n_feas if n_feas else 0.0)


def agreement(seq: PolytopeSequence | Polytope, screen: GridScreen) -> AgreementReport:
    polys = (seq,) if isinstance(seq, Polytope) else seq.polytopes
    rows = tuple(agreement_one(p, screen) for p in polys)
    f, _, total = screen.counts
    return AgreementReport(f, total, rows)


def support_dominance(results, screen: GridScreen, prob: SIRProblem) -> float:
    """Largest ``n . d_g - n . d*`` over feasible grid points and the given
    support results (unit normals). Nonpositive up to the solver tolerance
    means every support value dominates the grid."""
    pts = screen.points[screen.feasible]
    if len(pts) == 0:
        return float("-inf")
    worst = float("-inf")
    for res in results:
        res: SupportResult
        n = np.asarray(res.direction, dtype=float)
        n = n / np.linalg.norm(n)
        worst = max(worst, float((pts @ n).max() - n @ res.vertex))
    return worst


def dominance_tolerance(prob: SIRProblem) -> float:
    return EPS_OBJ_REL * prob.box_diagonal


@dataclass(frozen=True)
class ConvexityReport:
    trials: int
    seed: int
    pairs: int
    checks: int
    violations: int
    worst_residual: float
    samples_drawn: int
    violation_examples: tuple = field(default=())

    @property
    def ok(self) -> bool:
        return self.violations == 0


def convexity_probe(prob: SIRProblem, trials=500, seed=0, upper=None, mus=None) -> ConvexityReport:
    """Test convex combinations of random feasible pairs.

    Candidates are drawn uniformly from [box lower corner, ``upper``]
    (default: axis maxima) until ``2 * trials`` feasible points are found or
    ``100 * trials`` draws are spent.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    lo = prob.box[0]
    hi = axis_maxima(prob) if upper is None else np.asarray(upper, dtype=float)
    mus = np.linspace(0.0, 1.0, 5) if mus is None else np.asarray(mus, dtype=float)
    check = prob.checker.evaluate
    found, drawn = [], 0
    while len(found) < 2 * trials and drawn < 100 * trials:
        x = rng.uniform(lo, hi)
        drawn += 1
        if check(prob.embed(x)).feasible:
            found.append(x)
    if len(found) < 2:
        raise InsufficientSamplesError(f"only {len(found)} feasible samples in {drawn} draws")
    if len(found) >= 2 * trials:
        pairs = [(found[2 * i], found[2 * i + 1]) for i in range(trials)]
    else:
        idx = [rng.choice(len(found), size=2, replace=False) for _ in range(trials)]
        pairs = [(found[i], found[j]) for i, j in idx]
    violations, worst, checks, examples = 0, 0.0, 0, []
    for a, b in pairs:
        for mu in mus:
            v = check(prob.embed((1.0 - mu) * a + mu * b))
            checks += 1
            worst = max(worst, v.worst_residual)
            if not v.feasible:
                violations += 1
                if len(examples) < 5:
                    examples.append((a.tolist(), b.tolist(), float(mu), v.worst_constraint))
    return ConvexityReport(trials, seed, len(pairs), checks, violations, worst, drawn, tuple(examples))
