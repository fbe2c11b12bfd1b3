"""Graph data model for tree-structured water distribution networks.

Units follow the network file: lengths and heads in metres, flows and
demands in L/s, pump curve slope in metres per L/s. Hydraulic solves
convert flows to m^3/s (see :mod:`wdsir.hydraulics`).

Heads (``head_min_m``/``head_max_m``) are *pressure* heads, i.e. the
water head ``y`` that appears next to the elevation ``h`` in the
Darcy-Weisbach balance ``y_i - y_j + h_i - h_j = R sgn(f) f^2``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParameterError

GRAVITY = 9.81
DEFAULT_FRICTION = 0.02
LPS = 1e-3  # m^3/s per L/s

JUNCTION = "junction"
SOURCE = "source"
PIPE = "pipe"
PUMP = "pump"


def headloss_coefficient(length_m, diameter_m, friction_factor=DEFAULT_FRICTION, gravity=GRAVITY):
    """Darcy-Weisbach head-loss coefficient ``R = 8 f_s L / (pi^2 g D^5)``.

    The result is in s^2/m^5, so ``R * q**2`` is a head in metres when the
    flow ``q`` is in m^3/s. A flow given in L/s must be multiplied by
    ``LPS`` (1e-3) before it is squared.
    """
    for name, value in (("length_m", length_m), ("diameter_m", diameter_m),
                        ("friction_factor", friction_factor), ("gravity", gravity)):
        if not value > 0 or not math.isfinite(value):
            raise ParameterError(f"{name} must be positive and finite, got {value!r}")
    return 8.0 * friction_factor * length_m / (math.pi ** 2 * gravity * diameter_m ** 5)


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    elevation_m: float
    head_min_m: float
    head_max_m: float
    demand_min: float = 0.0
    demand_max: float = math.inf
    fixed_demand: float | None = None
    source_inject_min: float | None = None
    source_inject_max: float | None = None

    @property
    def is_source(self) -> bool:
        return self.kind == SOURCE


@dataclass(frozen=True)
class Edge:
    """A pipe, or a pump modelled as a pipe with an imposed head gain.

    Pump edges may carry ``length_m``/``diameter_m`` for the friction of the
    pipe they sit on; without them the pump has no friction loss. The gain
    is ``pump_a1 * q + pump_a0`` (q in L/s) when both coefficients are set,
    otherwise a free operating variable within the gain bounds.
    """

    id: str
    from_node: str
    to_node: str
    kind: str = PIPE
    length_m: float | None = None
    diameter_m: float | None = None
    friction_factor: float = DEFAULT_FRICTION
    flow_min: float = -math.inf
    flow_max: float = math.inf
    pump_a1: float | None = None
    pump_a0: float | None = None
    pump_gain_min_m: float | None = None
    pump_gain_max_m: float | None = None

    @property
    def is_pump(self) -> bool:
        return self.kind == PUMP

    @property
    def has_curve(self) -> bool:
        return self.pump_a1 is not None and self.pump_a0 is not None

    @property
    def has_friction(self) -> bool:
        return self.length_m is not None and self.diameter_m is not None

    def headloss_coeff(self, gravity=GRAVITY) -> float:
        if not self.has_friction:
            return 0.0
        return headloss_coefficient(self.length_m, self.diameter_m, self.friction_factor, gravity)


@dataclass(frozen=True)
class Violation:
    element: str
    rule: str

    def __str__(self):
        return f"{self.element}: {self.rule}"


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    gravity: float = GRAVITY
    name: str = ""
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    @cached_property
    def edge_index(self) -> dict[str, int]:
        return {e.id: i for i, e in enumerate(self.edges)}

    @property
    def sources(self) -> list[Node]:
        return [n for n in self.nodes if n.is_source]

    @property
    def pumps(self) -> list[Edge]:
        return [e for e in self.edges if e.is_pump]

    @cached_property
    def headloss_coeffs(self) -> np.ndarray:
        return np.array([e.headloss_coeff(self.gravity) for e in self.edges])

    @cached_property
    def incidence(self) -> np.ndarray:
        """Signed |E| x |N| matrix: +1 at the from-node, -1 at the to-node."""
        a = np.zeros((len(self.edges), len(self.nodes)))
        for k, e in enumerate(self.edges):
            a[k, self.node_index[e.from_node]] = 1.0
            a[k, self.node_index[e.to_node]] = -1.0
        return a

    def node(self, node_id) -> Node:
        return self.nodes[self.node_index[str(node_id)]]

    def edge(self, edge_id) -> Edge:
        return self.edges[self.edge_index[str(edge_id)]]

    def status_vector(self, pump_status=None) -> tuple[bool, ...]:
        """Per-edge activity: pipes are always on; pumps follow ``pump_status``.

        ``pump_status`` is a mapping pump id -> bool, a sequence aligned with
        :attr:`pumps`, or None (all pumps on).
        """
        pumps = self.pumps
        if pump_status is None:
            states = {p.id: True for p in pumps}
        elif isinstance(pump_status, Mapping):
            unknown = set(map(str, pump_status)) - {p.id for p in pumps}
            if unknown:
                raise KeyError(f"unknown pump id(s): {sorted(unknown)}")
            states = {str(k): bool(v) for k, v in pump_status.items()}
            missing = [p.id for p in pumps if p.id not in states]
            if missing:
                raise KeyError(f"pump status missing for {missing}")
        else:
            seq = list(pump_status)
            if len(seq) != len(pumps):
                raise ValueError(f"expected {len(pumps)} pump statuses, got {len(seq)}")
            states = {p.id: bool(s) for p, s in zip(pumps, seq)}
        return tuple(states[e.id] if e.is_pump else True for e in self.edges)

    def demand_vector(self, demands=None) -> np.ndarray:
        """Full per-node demand vector in L/s.

        Accepts a mapping node id -> L/s (unlisted nodes take their fixed
        demand, or 0), an aligned sequence, or None (fixed demands).
        """
        if demands is None or isinstance(demands, Mapping):
            out = np.array([n.fixed_demand or 0.0 for n in self.nodes], dtype=float)
            for k, v in (demands or {}).items():
                out[self.node_index[str(k)]] = float(v)
            return out
        out = np.asarray(demands, dtype=float)
        if out.shape != (len(self.nodes),):
            raise ValueError(f"demand vector must have length {len(self.nodes)}, got shape {out.shape}")
        return out

    def validate(self) -> list[Violation]:
        return validate(self)


def _is_finite(x) -> bool:
    return x is not None and math.isfinite(x)


def _connected_components(n_nodes: int, pairs: Iterable[tuple[int, int]]) -> int:
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n_nodes
    count = 0
    for start in range(n_nodes):
        if seen[start]:
            continue
        count += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
    return count


def validate(net: Network) -> list[Violation]:
    """Check every model invariant; an empty list means the network is valid."""
    out: list[Violation] = []
    ids = [n.id for n in net.nodes]
    for dup in sorted({i for i in ids if ids.count(i) > 1}):
        out.append(Violation(f"node {dup}", "duplicate id"))
    eids = [e.id for e in net.edges]
    for dup in sorted({i for i in eids if eids.count(i) > 1}):
        out.append(Violation(f"edge {dup}", "duplicate id"))
    if not net.gravity > 0:
        out.append(Violation("network", "gravity must be positive"))

    for n in net.nodes:
        el = f"node {n.id}"
        if n.kind not in (JUNCTION, SOURCE):
            out.append(Violation(el, f"unknown kind {n.kind!r}"))
        if not math.isfinite(n.elevation_m):
            out.append(Violation(el, "elevation must be finite"))
        if not n.head_min_m <= n.head_max_m:
            out.append(Violation(el, "head_min_m > head_max_m"))
        if not n.demand_min <= n.demand_max:
            out.append(Violation(el, "demand_min > demand_max"))
        if n.demand_min < 0 or n.demand_max < 0:
            out.append(Violation(el, "demand bounds must be nonnegative"))
        if n.fixed_demand is not None and not (n.demand_min <= n.fixed_demand <= n.demand_max):
            out.append(Violation(el, "fixed_demand outside demand bounds"))
        has_inject = n.source_inject_min is not None or n.source_inject_max is not None
        if n.kind == JUNCTION and has_inject:
            out.append(Violation(el, "junction must not carry injection bounds"))
        if n.kind == SOURCE:
            if n.source_inject_min is None or n.source_inject_max is None:
                out.append(Violation(el, "source requires injection bounds"))
            elif not n.source_inject_min <= n.source_inject_max:
                out.append(Violation(el, "source_inject_min > source_inject_max"))
            if n.fixed_demand:
                out.append(Violation(el, "source must not carry a demand"))

    index = {n.id: i for i, n in enumerate(net.nodes)}
    pairs = []
    for e in net.edges:
        el = f"edge {e.id}"
        ends_ok = True
        for end in (e.from_node, e.to_node):
            if end not in index:
                out.append(Violation(el, f"unknown node {end!r}"))
                ends_ok = False
        if ends_ok:
            if e.from_node == e.to_node:
                out.append(Violation(el, "self-loop"))
            pairs.append((index[e.from_node], index[e.to_node]))
        if e.kind not in (PIPE, PUMP):
            out.append(Violation(el, f"unknown kind {e.kind!r}"))
        if e.kind == PIPE and not e.has_friction:
            out.append(Violation(el, "pipe requires length_m and diameter_m"))
        if e.has_friction:
            for name in ("length_m", "diameter_m", "friction_factor"):
                value = getattr(e, name)
                if not (value > 0 and math.isfinite(value)):
                    out.append(Violation(el, f"{name} must be positive"))
        elif (e.length_m is None) != (e.diameter_m is None):
            out.append(Violation(el, "length_m and diameter_m must be given together"))
        if not e.flow_min <= e.flow_max:
            out.append(Violation(el, "flow_min > flow_max"))
        pump_fields = (e.pump_a1, e.pump_a0, e.pump_gain_min_m, e.pump_gain_max_m)
        if e.kind == PUMP:
            if e.pump_gain_min_m is None or e.pump_gain_max_m is None:
                out.append(Violation(el, "pump requires gain bounds"))
            elif not e.pump_gain_min_m <= e.pump_gain_max_m:
                out.append(Violation(el, "pump_gain_min_m > pump_gain_max_m"))
            if (e.pump_a1 is None) != (e.pump_a0 is None):
                out.append(Violation(el, "pump curve needs both pump_a1 and pump_a0"))
        elif any(v is not None for v in pump_fields):
            out.append(Violation(el, "pump fields on a non-pump edge"))

    if not net.sources:
        out.append(Violation("network", "no source node"))

    n_nodes, n_edges = len(net.nodes), len(net.edges)
    if n_nodes and len(pairs) == n_edges:
        if n_edges != n_nodes - 1 or _connected_components(n_nodes, pairs) != 1:
            out.append(Violation(
                "network",
                f"not a tree ({n_edges} edges for {n_nodes} nodes, "
                f"{_connected_components(n_nodes, pairs)} component(s))"))
        elif n_edges and not out:
            rank = np.linalg.matrix_rank(net.incidence)
            if rank != n_edges:
                out.append(Violation("network", f"incidence rank {rank} != {n_edges}"))
    return out


def subtree_order(net: Network, root: str) -> list[str]:
    """Breadth-first node order of the undirected tree from ``root``."""
    adj: dict[str, list[str]] = {n.id: [] for n in net.nodes}
    for e in net.edges:
        adj[e.from_node].append(e.to_node)
        adj[e.to_node].append(e.from_node)
    order, seen = [root], {root}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


def replace_nodes(net: Network, updates: Mapping[str, Mapping]) -> Network:
    """Copy of ``net`` with per-node field overrides, e.g. widened bounds."""
    from dataclasses import replace

    nodes = [replace(n, **updates[n.id]) if n.id in updates else n for n in net.nodes]
    return Network(tuple(nodes), net.edges, net.gravity, net.name)


def replace_edges(net: Network, updates: Mapping[str, Mapping]) -> Network:
    from dataclasses import replace

    edges = [replace(e, **updates[e.id]) if e.id in updates else e for e in net.edges]
    return Network(net.nodes, tuple(edges), net.gravity, net.name)


__all__: Sequence[str] = (
    "GRAVITY", "DEFAULT_FRICTION", "LPS", "JUNCTION", "SOURCE", "PIPE", "PUMP",
    "Node", "Edge", "Network", "Violation", "validate", "headloss_coefficient",
    "subtree_order", "replace_nodes", "replace_edges",
)
