"""Support-function maximization over the security injection region.

For a frozen pump status and flow-direction pattern, edge flows are linear
in the variable demands and every node head is

    y_j = y_source + sum(free pump gains on the path) + c_j(d),

with ``c_j`` a sum of elevation differences, affine pump-curve gains and
``-R f|f|`` terms. In the sign-consistent regime ``c_j`` is concave, so the
head floors define a convex set. The solver keeps a feasible iterate and an
outer LP relaxation built from tangent cuts of ``c_j``:

1. solve the LP (box, exact linear constraints, accumulated head cuts);
   its value is an upper bound on the support value;
2. if the LP point is infeasible, pull it back towards the nominal anchor
   along the connecting segment until it is feasible (bisection);
3. add tangent cuts at both points and repeat until the bound gap falls
   below ``eps_obj``.

Head ceilings are reverse-convex; they are linearized at the current best
point only, which keeps the LP conservative there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import PreconditionError, SupportError
from .hydraulics import FeasibilityChecker, layout
from .network import LPS, Network

EPS_OBJ_REL = 1e-6
STEP_REL = 1e-8
MAX_ITER = 200


@dataclass(frozen=True)
class SupportResult:
    vertex: np.ndarray  # variable demands, L/s
    objective: float
    converged: bool
    iterations: int
    upper_bound: float = math.nan
    direction: np.ndarray | None = None


@dataclass(frozen=True)
class SIRProblem:
    """The post-scheduling region problem.

    ``pump_status`` is aligned with ``net.pumps``; ``sign_pattern`` with
    ``net.edges``; ``fixed_demands`` is a full per-node vector in L/s whose
    entries at variable nodes are ignored.
    """

    net: Network
    pump_status: tuple[bool, ...]
    sign_pattern: tuple[int, ...]
    variable_nodes: tuple[str, ...]
    fixed_demands: tuple[float, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        net = self.net
        object.__setattr__(self, "pump_status", tuple(bool(s) for s in self.pump_status))
        object.__setattr__(self, "sign_pattern", tuple(int(s) for s in self.sign_pattern))
        object.__setattr__(self, "variable_nodes", tuple(str(v) for v in self.variable_nodes))
        object.__setattr__(self, "fixed_demands", tuple(float(x) for x in self.fixed_demands))
        if not self.variable_nodes:
            raise PreconditionError("at least one variable node is required")
        if len(set(self.variable_nodes)) != len(self.variable_nodes):
            raise PreconditionError("variable nodes must be distinct")
        for v in self.variable_nodes:
            if v not in net.node_index:
                raise PreconditionError(f"unknown variable node {v!r}")
            node = net.node(v)
            if node.is_source:
                raise PreconditionError(f"variable node {v} is a source")
            if not (math.isfinite(node.demand_min) and math.isfinite(node.demand_max)):
                raise PreconditionError(f"variable node {v} needs a finite demand box")
            if not node.demand_max > node.demand_min:
                raise PreconditionError(f"variable node {v} has an empty demand box")
        if len(self.fixed_demands) != len(net.nodes):
            raise PreconditionError("fixed_demands must have one entry per node")
        if len(self.pump_status) != len(net.pumps):
            raise PreconditionError("pump_status must have one entry per pump")
        if len(self.sign_pattern) != len(net.edges):
            raise PreconditionError("sign_pattern must have one entry per edge")
        var = set(self.variable_nodes)
        for node, d in zip(net.nodes, self.fixed_demands):
            if node.id in var:
                continue
            if node.is_source and d != 0:
                raise PreconditionError(f"source {node.id} cannot carry demand")
            if not node.is_source and not node.demand_min <= d <= node.demand_max:
                raise PreconditionError(f"fixed demand at node {node.id} outside its bounds")

    @classmethod
    def from_ops(cls, net: Network, ops, variable_nodes: Sequence[str], fixed_demands=None) -> "SIRProblem":
        status = tuple(ops.pump_status[p.id] for p in net.pumps)
        fixed = net.demand_vector(fixed_demands)
        return cls(net, status, ops.sign_pattern, tuple(variable_nodes), tuple(fixed))

    @property
    def dimension(self) -> int:
        return len(self.variable_nodes)

    @property
    def variable_index(self) -> list[int]:
        return [self.net.node_index[v] for v in self.variable_nodes]

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.net.node(v).demand_min for v in self.variable_nodes])
        hi = np.array([self.net.node(v).demand_max for v in self.variable_nodes])
        return lo, hi

    @property
    def box_diagonal(self) -> float:
        lo, hi = self.box
        return float(np.linalg.norm(hi - lo))

    @property
    def status_map(self) -> dict:
        return {p.id: s for p, s in zip(self.net.pumps, self.pump_status)}

    @property
    def checker(self) -> FeasibilityChecker:
        if "checker" not in self._cache:
            self._cache["checker"] = FeasibilityChecker(self.net, self.status_map, self.sign_pattern)
        return self._cache["checker"]

    @property
    def model(self) -> "_LinearizedModel":
        if "model" not in self._cache:
            self._cache["model"] = _LinearizedModel(self)
        return self._cache["model"]

    def nominal(self) -> np.ndarray:
        """Anchor point: variable demands at the lower corner of their box."""
        return self.box[0].copy()

    def embed(self, values) -> np.ndarray:
        return embed_demands(self, values)

    def verdict(self, values, witness=False):
        return self.checker.evaluate(self.embed(values), witness=witness)

    def is_feasible(self, values) -> bool:
        return self.checker.evaluate(self.embed(values)).feasible


def embed_demands(prob: SIRProblem, values) -> np.ndarray:
    """Full per-node demand vector: variable values at variable nodes,
    fixed demands elsewhere, zero at sources."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != prob.dimension:
        raise ValueError(f"expected {prob.dimension} variable values, got {values.shape[0]}")
    out = np.array(prob.fixed_demands, dtype=float)
    for node_i, node in enumerate(prob.net.nodes):
        if node.is_source:
            out[node_i] = 0.0
    out[prob.variable_index] = values
    return out


class _LinearizedModel:
    """Flows, linear constraints and head linearizations in LP variables
    ``x = [d (L/s), source heads, free pump gains]``."""

    def __init__(self, prob: SIRProblem):
        net = prob.net
        lay = layout(net, prob.status_map)
        base = embed_demands(prob, prob.nominal())
        lay.check_structure(base)
        var = prob.variable_index
        for i in var:
            if lay.root[i] == -1:
                raise PreconditionError(f"variable node {net.nodes[i].id} is not connected to a source")
        t = lay.flow_matrix()
        base[var] = 0.0
        self.f0 = t @ base
        self.fd = t[:, var]
        self.path = lay.path_matrix()
        self.R = np.asarray(net.headloss_coeffs, dtype=float)
        self.dz = np.array([net.node(e.from_node).elevation_m - net.node(e.to_node).elevation_m
                            for e in net.edges])
        nd = prob.dimension
        self.nd = nd
        roots = sorted({lay.root[i] for i in lay.order if lay.root[i] == i})
        free = [k for k, e in enumerate(net.edges) if e.is_pump and lay.active[k] and not e.has_curve]
        self.src_col = {r: nd + j for j, r in enumerate(roots)}
        self.gain_col = {k: nd + len(roots) + j for j, k in enumerate(free)}
        self.nvar = nd + len(roots) + len(free)

        lo, hi = prob.box
        bounds = [(lo[i], hi[i]) for i in range(nd)]
        bounds += [(net.nodes[r].head_min_m, net.nodes[r].head_max_m) for r in roots]
        bounds += [(net.edges[k].pump_gain_min_m, net.edges[k].pump_gain_max_m) for k in free]
        self.bounds = bounds

        slope = np.zeros(len(net.edges))
        offset = np.zeros(len(net.edges))
        for k, e in enumerate(net.edges):
            if e.is_pump and lay.active[k] and e.has_curve:
                slope[k] = e.pump_a1 / LPS
                offset[k] = e.pump_a0
        self.curve_slope = slope
        self.curve_offset = offset

        rows, rhs = [], []

        def add(coef_d, const, upper):
            # coef_d . d + const <= upper
            if not math.isfinite(upper):
                return
            row = np.zeros(self.nvar)
            row[:nd] = coef_d
            rows.append(row)
            rhs.append(upper - const)

        for k, e in enumerate(net.edges):
            if not lay.active[k]:
                continue
            q0, qd = self.f0[k] / LPS, self.fd[k] / LPS
            if math.isfinite(e.flow_max):
                add(qd, q0, e.flow_max)
            if math.isfinite(e.flow_min):
                add(-qd, -q0, -e.flow_min)
            s = prob.sign_pattern[k]
            if s == 0:
                add(qd, q0, 0.0)
                add(-qd, -q0, 0.0)
            else:
                add(-s * qd, -s * q0, 0.0)
            if e.is_pump:
                add(-qd, -q0, 0.0)
                if e.has_curve:
                    g0, gd = e.pump_a1 * q0 + e.pump_a0, e.pump_a1 * qd
                    add(gd, g0, e.pump_gain_max_m)
                    add(-gd, -g0, -e.pump_gain_min_m)
        for r in roots:
            comp = [i for i in range(len(net.nodes)) if lay.root[i] == r]
            node = net.nodes[r]
            q0 = sum(base[i] for i in comp)
            qd = np.array([1.0 if lay.root[i] == r else 0.0 for i in var])
            add(qd, q0, node.source_inject_max)
            add(-qd, -q0, -node.source_inject_min)
        self.a_lin = np.array(rows).reshape(-1, self.nvar)
        self.b_lin = np.array(rhs)

        self.head_nodes = [i for i in lay.order if lay.root[i] != i]
        self.head_lo = np.array([net.nodes[i].head_min_m for i in self.head_nodes])
        self.head_hi = np.array([net.nodes[i].head_max_m for i in self.head_nodes])
        # constant part of each head row: source head column and free gains
        fixed_part = np.zeros((len(self.head_nodes), self.nvar))
        for row, i in enumerate(self.head_nodes):
            fixed_part[row, self.src_col[lay.root[i]]] = 1.0
            for k, col in self.gain_col.items():
                fixed_part[row, col] = self.path[i, k]
        self.head_fixed = fixed_part
        self.head_path = self.path[self.head_nodes]

    def flows(self, d) -> np.ndarray:
        return self.f0 + self.fd @ d

    def head_linearization(self, d) -> tuple[np.ndarray, np.ndarray]:
        """Values c_j(d) and gradients dc_j/dd for the head rows."""
        f = self.flows(d)
        drop = self.dz + self.curve_slope * f + self.curve_offset - self.R * f * np.abs(f)
        dslope = self.curve_slope - 2.0 * self.R * np.abs(f)
        c = self.head_path @ drop
        grad = self.head_path @ (dslope[:, None] * self.fd)
        return c, grad

    def cut_rows(self, d, upper=False):
        """Tangent rows at ``d``: floors (valid outer cuts) or ceilings."""
        c, grad = self.head_linearization(d)
        a = self.head_fixed.copy()
        a[:, : self.nd] += grad
        const = c - grad @ d
        if upper:
            a, b = a, self.head_hi - const
        else:
            a, b = -a, const - self.head_lo
        keep = np.isfinite(b)
        return a[keep], b[keep]


def _bisect_boundary(prob: SIRProblem, anchor, target, iters=64) -> tuple[np.ndarray, float]:
    """Last feasible point on the segment anchor -> target."""
    check = prob.checker.evaluate
    lo_s, hi_s = 0.0, 1.0
    delta = target - anchor
    for _ in range(iters):
        mid = 0.5 * (lo_s + hi_s)
        if check(embed_demands(prob, anchor + mid * delta)).worst_residual == 0.0:
            lo_s = mid
        else:
            hi_s = mid
        if hi_s - lo_s <= 1e-15:
            break
    return anchor + lo_s * delta, lo_s


def maximize_support(prob: SIRProblem, direction, *, max_iter=MAX_ITER, eps_obj=None) -> SupportResult:
    """Maximize ``direction . d`` over the feasible variable demands."""
    n_raw = np.asarray(direction, dtype=float).reshape(-1)
    if n_raw.shape[0] != prob.dimension:
        raise ValueError(f"direction must have length {prob.dimension}")
    norm = float(np.linalg.norm(n_raw))
    if not norm > 0:
        raise ValueError("direction must be nonzero")
    n = n_raw / norm
    model = prob.model
    diag = prob.box_diagonal
    eps = EPS_OBJ_REL * diag if eps_obj is None else eps_obj
    anchor = prob.nominal()
    if prob.checker.evaluate(embed_demands(prob, anchor)).worst_residual != 0.0:
        raise PreconditionError("nominal point is infeasible")

    cuts_a, cuts_b = [], []
    a0, b0 = model.cut_rows(anchor)
    cuts_a.append(a0)
    cuts_b.append(b0)
    best, best_val = anchor.copy(), float(n @ anchor)
    c = np.zeros(model.nvar)
    c[: model.nd] = -n
    upper = math.inf
    prev_q = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ua, ub = model.cut_rows(best, upper=True)
        a_ub = np.vstack([model.a_lin, *cuts_a, ua])
        b_ub = np.concatenate([model.b_lin, *cuts_b, ub])
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=model.bounds, method="highs")
        if res.status != 0:
            raise SupportError(f"LP subproblem failed: {res.message}",
                               partial=SupportResult(best, float(n_raw @ best), False, it))
        q = np.asarray(res.x[: model.nd])
        upper = min(upper, float(n @ q))
        if prob.checker.evaluate(embed_demands(prob, q)).worst_residual == 0.0:
            point = q
        else:
            point, _ = _bisect_boundary(prob, anchor, q)
        val = float(n @ point)
        if val > best_val:
            best, best_val = point, val
        if upper - best_val <= eps:
            converged = True
            break
        if prev_q is not None and np.linalg.norm(q - prev_q) < STEP_REL * diag:
            # LP point stalled: cuts no longer move it; gap cannot close further
            converged = upper - best_val <= eps
            break
        prev_q = q
        for pt in (point, q):
            a, b = model.cut_rows(pt)
            cuts_a.append(a)
            cuts_b.append(b)
    return SupportResult(best, float(n_raw @ best), converged, it, upper * norm, n_raw)
