"""Steady-state hydraulics on a tree: flows, heads and feasibility.

Demands enter in L/s (the network file unit); the returned flows and
injections are in m^3/s so that ``R * q * |q|`` is directly a head loss in
metres. Heads are pressure heads in metres.

On a tree with one source per active component, conservation ``A^T f =
F^G - d`` has exactly one solution, obtained by accumulating demands from
the leaves to the source. Node heads are then affine in the source head and
in any free pump gains, so feasibility reduces to intersecting intervals
from the leaves upwards.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import StructuralInfeasibility
from .network import LPS, Network

FEAS_TOL = 1e-6


@dataclass(frozen=True)
class HydraulicState:
    """One steady operating point. Flows in m^3/s, heads in m."""

    flows: np.ndarray
    heads: np.ndarray
    pump_gains: dict
    pump_status: dict
    source_injections: dict
    sign_pattern: tuple


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    worst_residual: float
    worst_constraint: str
    state: HydraulicState | None = None

    def __bool__(self):
        return self.feasible


class TreeFlows(NamedTuple):
    flows: np.ndarray  # per edge, m^3/s
    injections: np.ndarray  # per node (nonzero at sources), m^3/s


class TreeLayout:
    """Rooted structure of the active subgraph for fixed pump statuses."""

    def __init__(self, net: Network, active: tuple[bool, ...]):
        self.net = net
        self.active = active
        n = len(net.nodes)
        idx = net.node_index
        adj: list[list[tuple[int, int, bool]]] = [[] for _ in range(n)]
        for k, e in enumerate(net.edges):
            if not active[k]:
                continue
            a, b = idx[e.from_node], idx[e.to_node]
            adj[a].append((b, k, True))
            adj[b].append((a, k, False))
        root = [-1] * n
        parent = [-1] * n
        parent_edge = [-1] * n
        along = [False] * n
        order: list[int] = []
        conflicts: list[tuple[str, str]] = []
        for s, node in enumerate(net.nodes):
            if not node.is_source:
                continue
            if root[s] != -1:
                conflicts.append((net.nodes[root[s]].id, node.id))
                continue
            root[s] = s
            order.append(s)
            queue = deque([s])
            while queue:
                v = queue.popleft()
                for w, k, fwd in adj[v]:
                    if root[w] == -1:
                        root[w] = s
                        parent[w] = v
                        parent_edge[w] = k
                        along[w] = fwd
                        order.append(w)
                        queue.append(w)
        self.root = root
        self.parent = parent
        self.parent_edge = parent_edge
        self.along = along
        self.order = order
        self.conflicts = conflicts
        self.unreached = [i for i in range(n) if root[i] == -1]
        self.children: list[list[int]] = [[] for _ in range(n)]
        for v in order:
            if parent[v] != -1:
                self.children[parent[v]].append(v)

    def check_structure(self, demands_lps) -> None:
        if self.conflicts:
            a, b = self.conflicts[0]
            raise StructuralInfeasibility(
                f"sources {a} and {b} share an active component; tree flows are not unique")
        for i in self.unreached:
            if demands_lps[i] != 0:
                raise StructuralInfeasibility(
                    f"node {self.net.nodes[i].id} has demand but no active path to a source")

    def edge_direction(self) -> np.ndarray:
        """+1 where the declared direction points away from the source, -1 against, 0 inactive."""
        out = np.zeros(len(self.net.edges), dtype=int)
        for v in self.order:
            k = self.parent_edge[v]
            if k != -1:
                out[k] = 1 if self.along[v] else -1
        return out

    def flow_matrix(self) -> np.ndarray:
        """Linear map from per-node demands (L/s) to per-edge flows (m^3/s)."""
        net = self.net
        t = np.zeros((len(net.edges), len(net.nodes)))
        for v in self.order:
            w = v
            while self.parent_edge[w] != -1:
                t[self.parent_edge[w], v] = (1.0 if self.along[w] else -1.0) * LPS
                w = self.parent[w]
        return t

    def path_matrix(self) -> np.ndarray:
        """Node x edge matrix: +1/-1 if the edge is traversed along/against its
        declared direction on the way from the node's source, else 0."""
        net = self.net
        p = np.zeros((len(net.nodes), len(net.edges)))
        for v in self.order:
            w = v
            while self.parent_edge[w] != -1:
                p[v, self.parent_edge[w]] = 1.0 if self.along[w] else -1.0
                w = self.parent[w]
        return p


def layout(net: Network, pump_status=None) -> TreeLayout:
    active = net.status_vector(pump_status)
    cache = net._cache.setdefault("layouts", {})
    if active not in cache:
        cache[active] = TreeLayout(net, active)
    return cache[active]


def solve_tree_flows(net: Network, demands, pump_status=None) -> TreeFlows:
    """Unique edge flows and source injections for the given demands (L/s)."""
    lay = layout(net, pump_status)
    d = net.demand_vector(demands)
    lay.check_structure(d)
    acc = d * LPS
    flows = np.zeros(len(net.edges))
    for v in reversed(lay.order):
        k = lay.parent_edge[v]
        if k != -1:
            flows[k] = acc[v] if lay.along[v] else -acc[v]
            acc[lay.parent[v]] += acc[v]
    inj = np.zeros(len(net.nodes))
    for i, r in enumerate(lay.root):
        if r == i:
            inj[i] = acc[i]
    return TreeFlows(flows, inj)


def conservation_residual(net: Network, demands, flows, injections) -> float:
    """Max |A^T f - (F^G - d)| over nodes, in m^3/s."""
    d = net.demand_vector(demands) * LPS
    r = net.incidence.T @ flows - (injections - d)
    return float(np.max(np.abs(r))) if r.size else 0.0


def pump_gain(edge, flow_m3s) -> float:
    """Reduced pump curve ``a1 q + a0`` with q converted to L/s."""
    return edge.pump_a1 * (flow_m3s / LPS) + edge.pump_a0


def _edge_drop(net: Network, k: int, flow: float, gain: float) -> float:
    """Head change y_to - y_from across edge k (declared direction)."""
    e = net.edges[k]
    h = net.nodes[net.node_index[e.from_node]].elevation_m - net.nodes[net.node_index[e.to_node]].elevation_m
    return h + gain - net.headloss_coeffs[k] * flow * abs(flow)


def propagate_heads(net: Network, flows, pump_status=None, pump_gains=None, source_heads=None) -> np.ndarray:
    """Pressure heads from the sources outwards.

    ``source_heads`` maps source id -> head (default: the source's
    ``head_min_m``). ``pump_gains`` maps pump id -> gain; on pumps missing
    from it use their curve. Nodes unreachable from any source get NaN.
    """
    lay = layout(net, pump_status)
    flows = np.asarray(flows, dtype=float)
    pump_gains = dict(pump_gains or {})
    source_heads = dict(source_heads or {})
    y = np.full(len(net.nodes), np.nan)
    for v in lay.order:
        node = net.nodes[v]
        k = lay.parent_edge[v]
        if k == -1:
            y[v] = float(source_heads.get(node.id, node.head_min_m))
            continue
        e = net.edges[k]
        gain = 0.0
        if e.is_pump:
            gain = pump_gains[e.id] if e.id in pump_gains else pump_gain(e, flows[k])
        drop = _edge_drop(net, k, flows[k], gain)
        y[v] = y[lay.parent[v]] + drop if lay.along[v] else y[lay.parent[v]] - drop
    return y


def head_equation_residual(net: Network, flows, heads, pump_status=None, pump_gains=None) -> float:
    """Max |y_i - y_j + h_i - h_j + g - R f|f|| over active edges (m)."""
    lay = layout(net, pump_status)
    pump_gains = dict(pump_gains or {})
    worst = 0.0
    for k, e in enumerate(net.edges):
        if not lay.active[k]:
            continue
        i, j = net.node_index[e.from_node], net.node_index[e.to_node]
        if np.isnan(heads[i]) or np.isnan(heads[j]):
            continue
        g = 0.0
        if e.is_pump:
            g = pump_gains[e.id] if e.id in pump_gains else pump_gain(e, flows[k])
        lhs = heads[i] - heads[j] + net.nodes[i].elevation_m - net.nodes[j].elevation_m + g
        worst = max(worst, abs(lhs - net.headloss_coeffs[k] * flows[k] * abs(flows[k])))
    return worst


def default_sign_pattern(net: Network, flows, pump_status=None) -> tuple[int, ...]:
    """Sign of each flow; zero flows on active edges take the direction a
    positive downstream demand would induce, off pumps get 0."""
    lay = layout(net, pump_status)
    away = lay.edge_direction()
    out = []
    for k, f in enumerate(flows):
        if not lay.active[k]:
            out.append(0)
        elif f > 0:
            out.append(1)
        elif f < 0:
            out.append(-1)
        else:
            out.append(int(away[k]))
    return tuple(out)


def _over(value, lo, hi):
    """Normalized bound violation (0 inside). Ranges of zero or infinite
    width normalize by 1 unit."""
    width = hi - lo
    scale = width if math.isfinite(width) and width > 0 else 1.0
    if value > hi:
        return (value - hi) / scale, "max"
    if value < lo:
        return (lo - value) / scale, "min"
    return 0.0, ""


class FeasibilityChecker:
    """Feasibility judge compiled for one (network, statuses, sign pattern)."""

    def __init__(self, net: Network, pump_status=None, sign_pattern=None):
        self.net = net
        self.lay = layout(net, pump_status)
        self.status = net.status_vector(pump_status)
        if sign_pattern is None:
            sign_pattern = tuple(int(s) for s in self.lay.edge_direction())
        if len(sign_pattern) != len(net.edges):
            raise ValueError("sign pattern length must match edge count")
        self.sign = tuple(int(s) for s in sign_pattern)
        self.R = [float(r) for r in net.headloss_coeffs]
        idx = net.node_index
        self.dz = [net.nodes[idx[e.from_node]].elevation_m - net.nodes[idx[e.to_node]].elevation_m
                   for e in net.edges]

    def evaluate(self, demands, witness=False) -> FeasibilityVerdict:
        net, lay = self.net, self.lay
        d = net.demand_vector(demands)
        worst, label = 0.0, "none"

        def note(r, what):
            nonlocal worst, label
            if r > worst:
                worst, label = r, what

        for i, node in enumerate(net.nodes):
            lo, hi = (0.0, 0.0) if node.is_source else (node.demand_min, node.demand_max)
            r, side = _over(d[i], lo, hi)
            if r:
                note(r, f"demand_{side} at node {node.id}")

        lay.check_structure(d)
        acc = [x * LPS for x in d]
        flows = [0.0] * len(net.edges)
        for v in reversed(lay.order):
            k = lay.parent_edge[v]
            if k != -1:
                flows[k] = acc[v] if lay.along[v] else -acc[v]
                acc[lay.parent[v]] += acc[v]

        gains = {}
        for k, e in enumerate(net.edges):
            if not self.status[k]:
                continue
            q = flows[k] / LPS
            r, side = _over(q, e.flow_min, e.flow_max)
            if r:
                note(r, f"flow_{side} on edge {e.id}")
            s = self.sign[k]
            if q != 0 and (s == 0 or (q > 0) != (s > 0)):
                note(abs(q), f"sign pattern on edge {e.id}")
            if e.is_pump:
                if q < 0:
                    note(-q, f"reverse flow through pump {e.id}")
                if e.has_curve:
                    g = pump_gain(e, flows[k])
                    gains[e.id] = g
                    r, side = _over(g, e.pump_gain_min_m, e.pump_gain_max_m)
                    if r:
                        note(r, f"gain_{side} on pump {e.id}")

        injections = {}
        for i, node in enumerate(net.nodes):
            if node.is_source and lay.root[i] == i:
                q = acc[i] / LPS
                injections[node.id] = acc[i]
                r, side = _over(q, node.source_inject_min, node.source_inject_max)
                if r:
                    note(r, f"inject_{side} at source {node.id}")

        # Leaf-to-root interval intersection of admissible pressure heads.
        n = len(net.nodes)
        lo = [0.0] * n
        hi = [0.0] * n
        lo_lab = [""] * n
        hi_lab = [""] * n
        drops = [0.0] * len(net.edges)
        for v in reversed(lay.order):
            node = net.nodes[v]
            lo[v], hi[v] = node.head_min_m, node.head_max_m
            lo_lab[v], hi_lab[v] = f"head_min at node {node.id}", f"head_max at node {node.id}"
            for c in lay.children[v]:
                k = lay.parent_edge[c]
                e = net.edges[k]
                f = flows[k]
                drop = self.dz[k] - self.R[k] * f * abs(f) + gains.get(e.id, 0.0)
                drops[k] = drop
                free = e.is_pump and not e.has_curve
                gmin = e.pump_gain_min_m if free else 0.0
                gmax = e.pump_gain_max_m if free else 0.0
                # y_c = y_v + drop + g (along) or y_v - drop - g (against)
                if lay.along[c]:
                    clo, chi = lo[c] - drop - gmax, hi[c] - drop - gmin
                else:
                    clo, chi = lo[c] + drop + gmin, hi[c] + drop + gmax
                if clo > lo[v]:
                    lo[v], lo_lab[v] = clo, lo_lab[c]
                if chi < hi[v]:
                    hi[v], hi_lab[v] = chi, hi_lab[c]
            if lo[v] > hi[v]:
                note(lo[v] - hi[v], f"heads: {lo_lab[v]} vs {hi_lab[v]}")

        feasible = bool(worst <= FEAS_TOL)
        state = None
        if witness:
            state = self._witness(d, flows, drops, lo, hi, gains, injections)
        return FeasibilityVerdict(feasible, float(worst), label, state)

    def _witness(self, d, flows, drops, lo, hi, gains, injections) -> HydraulicState:
        """Lowest admissible source heads, then minimal free pump gains."""
        net, lay = self.net, self.lay
        y = np.full(len(net.nodes), np.nan)
        gains = dict(gains)
        for v in lay.order:
            k = lay.parent_edge[v]
            if k == -1:
                y[v] = min(lo[v], hi[v])
                continue
            e = net.edges[k]
            p = lay.parent[v]
            if e.is_pump and not e.has_curve:
                base = y[p] + drops[k] if lay.along[v] else y[p] - drops[k]
                if lay.along[v]:
                    g = min(max(e.pump_gain_min_m, lo[v] - base), e.pump_gain_max_m)
                    y[v] = base + g
                else:
                    g = min(max(e.pump_gain_min_m, base - hi[v]), e.pump_gain_max_m)
                    y[v] = base - g
                gains[e.id] = g
            else:
                y[v] = y[p] + drops[k] if lay.along[v] else y[p] - drops[k]
        for e in net.pumps:
            if not self.status[net.edge_index[e.id]]:
                gains[e.id] = 0.0
        status = {e.id: self.status[net.edge_index[e.id]] for e in net.pumps}
        gains = {k: float(v) for k, v in gains.items()}
        return HydraulicState(np.array(flows), y, gains, status, injections, self.sign)


def check_feasibility(net: Network, demands, pump_status=None, sign_pattern=None,
                      witness=False) -> FeasibilityVerdict:
    """Does some admissible source head and free pump gain serve ``demands``?

    ``sign_pattern`` freezes flow directions (default: away from sources).
    Structural infeasibility propagates as :class:`StructuralInfeasibility`.
    """
    return FeasibilityChecker(net, pump_status, sign_pattern).evaluate(demands, witness=witness)
