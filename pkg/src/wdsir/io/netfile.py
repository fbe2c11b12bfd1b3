"""Network file format: a strict YAML document.

Layout::

    schema_version: 1
    name: system1
    description: free text          # optional
    reconstructed: true             # optional flag for topologies read off a schematic
    defaults:                        # optional
      friction_factor: 0.02
      gravity: 9.81
      efficiency: 0.75
      tariff: 1.0
    nodes:
      - {id: "1", kind: source, elevation_m: 30, head_min_m: 0, head_max_m: 0,
         source_inject_min: 0, source_inject_max: 100}
      - {id: "2", kind: junction, elevation_m: 0, head_min_m: 0, head_max_m: 100,
         demand_min: 0, demand_max: 10, fixed_demand: 4}
    edges:
      - {id: p1, from: "1", to: "2", kind: pipe, length_m: 500, diameter_m: 0.15}
      - {id: P1, from: W, to: "1", kind: pump, pump_a1: -0.5, pump_a0: 40,
         pump_gain_min_m: 0, pump_gain_max_m: 60}
    sir:                             # optional
      variable_nodes: ["3", "5", "9"]
      grid_k: 9
      rounds: 3

Flows are in L/s, lengths and heads in metres, ``pump_a1`` in m per L/s.
Omitted flow bounds are unbounded; an omitted ``friction_factor`` takes the
``defaults`` value. Unknown keys are errors; every error carries line:column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from ..errors import NetworkFileError
from ..network import DEFAULT_FRICTION, GRAVITY, JUNCTION, PIPE, PUMP, SOURCE, Edge, Network, Node

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "name", "description", "reconstructed", "defaults", "nodes", "edges", "sir"}
_DEFAULT_KEYS = {"friction_factor", "gravity", "efficiency", "tariff"}
_SIR_KEYS = {"variable_nodes", "grid_k", "rounds"}
_NODE_KEYS = {"id", "kind", "elevation_m", "head_min_m", "head_max_m", "demand_min", "demand_max",
              "fixed_demand", "source_inject_min", "source_inject_max"}
_EDGE_KEYS = {"id", "from", "to", "kind", "length_m", "diameter_m", "friction_factor", "flow_min",
              "flow_max", "pump_a1", "pump_a0", "pump_gain_min_m", "pump_gain_max_m"}


@dataclass(frozen=True)
class Defaults:
    friction_factor: float = DEFAULT_FRICTION
    gravity: float = GRAVITY
    efficiency: float = 0.75
    tariff: float = 1.0


@dataclass(frozen=True)
class SirSettings:
    variable_nodes: tuple[str, ...] = ()
    grid_k: int = 9
    rounds: int = 3


@dataclass(frozen=True)
class NetworkFile:
    network: Network
    defaults: Defaults = field(default_factory=Defaults)
    sir: SirSettings = field(default_factory=SirSettings)
    description: str = ""
    reconstructed: bool = False


def _loc(node):
    return node.start_mark.line + 1, node.start_mark.column + 1


def _fail(msg, node):
    line, col = _loc(node)
    raise NetworkFileError(msg, line, col)


class _Reader:
    def __init__(self, loader):
        self.loader = loader

    def value(self, node):
        return self.loader.construct_object(node, deep=True)

    def mapping(self, node, allowed, what):
        if not isinstance(node, yaml.MappingNode):
            _fail(f"{what} must be a mapping", node)
        out = {}
        for knode, vnode in node.value:
            key = self.value(knode)
            if not isinstance(key, str):
                _fail(f"{what}: keys must be strings", knode)
            if key not in allowed:
                _fail(f"{what}: unknown key {key!r}", knode)
            if key in out:
                _fail(f"{what}: duplicate key {key!r}", knode)
            out[key] = vnode
        return out

    def sequence(self, node, what):
        if not isinstance(node, yaml.SequenceNode):
            _fail(f"{what} must be a list", node)
        return node.value

    def number(self, node, what):
        v = self.value(node)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            _fail(f"{what} must be a number", node)
        return float(v)

    def integer(self, node, what):
        v = self.value(node)
        if isinstance(v, bool) or not isinstance(v, int):
            _fail(f"{what} must be an integer", node)
        return v

    def text(self, node, what):
        v = self.value(node)
        if isinstance(v, bool) or v is None or isinstance(v, (list, dict)):
            _fail(f"{what} must be a string or number", node)
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        return str(v)

    def require(self, fields, key, owner, what):
        if key not in fields:
            _fail(f"{what}: missing required key {key!r}", owner)
        return fields[key]


def parse_network(text: str) -> NetworkFile:
    """Parse and validate a network file; raises :class:`NetworkFileError`."""
    if not text.strip():
        raise NetworkFileError("empty document", 1, 1)
    try:
        loader = yaml.SafeLoader(text)
        try:
            root = loader.get_single_node()
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise NetworkFileError(f"syntax error: {exc.problem}",
                               mark.line + 1 if mark else 1, mark.column + 1 if mark else 1) from None
    if root is None:
        raise NetworkFileError("empty document", 1, 1)
    r = _Reader(loader)
    top = r.mapping(root, _TOP_KEYS, "document")
    version = r.integer(r.require(top, "schema_version", root, "document"), "schema_version")
    if version != SCHEMA_VERSION:
        _fail(f"unsupported schema_version {version}", top["schema_version"])
    name = r.text(top["name"], "name") if "name" in top else ""
    description = r.text(top["description"], "description") if "description" in top else ""
    reconstructed = False
    if "reconstructed" in top:
        reconstructed = r.value(top["reconstructed"])
        if not isinstance(reconstructed, bool):
            _fail("reconstructed must be true or false", top["reconstructed"])

    dflt = Defaults()
    if "defaults" in top:
        f = r.mapping(top["defaults"], _DEFAULT_KEYS, "defaults")
        dflt = Defaults(**{k: r.number(v, f"defaults.{k}") for k, v in f.items()})

    marks = {}
    nodes = []
    for item in r.sequence(r.require(top, "nodes", root, "document"), "nodes"):
        f = r.mapping(item, _NODE_KEYS, "node")
        nid = r.text(r.require(f, "id", item, "node"), "node id")
        kind = r.text(r.require(f, "kind", item, f"node {nid}"), "kind")
        if kind not in (JUNCTION, SOURCE):
            _fail(f"node {nid}: kind must be 'junction' or 'source'", f["kind"])
        num = {k: r.number(v, f"node {nid}.{k}") for k, v in f.items() if k not in ("id", "kind")}
        for key in ("elevation_m", "head_min_m", "head_max_m"):
            r.require(f, key, item, f"node {nid}")
        if kind == SOURCE:
            num.setdefault("demand_max", 0.0)
        marks[f"node {nid}"] = item
        nodes.append(Node(id=nid, kind=kind, **num))

    edges = []
    for item in r.sequence(r.require(top, "edges", root, "document"), "edges"):
        f = r.mapping(item, _EDGE_KEYS, "edge")
        eid = r.text(r.require(f, "id", item, "edge"), "edge id")
        kind = r.text(f["kind"], "kind") if "kind" in f else PIPE
        if kind not in (PIPE, PUMP):
            _fail(f"edge {eid}: kind must be 'pipe' or 'pump'", f["kind"])
        src = r.text(r.require(f, "from", item, f"edge {eid}"), "from")
        dst = r.text(r.require(f, "to", item, f"edge {eid}"), "to")
        num = {k: r.number(v, f"edge {eid}.{k}") for k, v in f.items()
               if k not in ("id", "kind", "from", "to")}
        num.setdefault("friction_factor", dflt.friction_factor)
        marks[f"edge {eid}"] = item
        edges.append(Edge(id=eid, from_node=src, to_node=dst, kind=kind, **num))

    net = Network(tuple(nodes), tuple(edges), dflt.gravity, name)
    problems = net.validate()
    if problems:
        first = problems[0]
        where = marks.get(first.element, root)
        extra = f" (+{len(problems) - 1} more)" if len(problems) > 1 else ""
        _fail(f"{first}{extra}", where)

    sir = SirSettings()
    if "sir" in top:
        f = r.mapping(top["sir"], _SIR_KEYS, "sir")
        kw = {}
        if "variable_nodes" in f:
            vn = tuple(r.text(x, "variable node") for x in r.sequence(f["variable_nodes"], "variable_nodes"))
            for x, xnode in zip(vn, f["variable_nodes"].value):
                if x not in net.node_index:
                    _fail(f"sir.variable_nodes: unknown node {x!r}", xnode)
            kw["variable_nodes"] = vn
        if "grid_k" in f:
            kw["grid_k"] = r.integer(f["grid_k"], "sir.grid_k")
        if "rounds" in f:
            kw["rounds"] = r.integer(f["rounds"], "sir.rounds")
        sir = SirSettings(**kw)
    return NetworkFile(net, dflt, sir, description, reconstructed)


def _finite(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None and not (isinstance(v, float) and math.isinf(v))}


def serialize_network(nf: NetworkFile | Network) -> str:
    """Render a network file; ``parse_network`` reproduces every field."""
    if isinstance(nf, Network):
        nf = NetworkFile(nf, Defaults(gravity=nf.gravity))
    net = nf.network
    doc = {"schema_version": SCHEMA_VERSION, "name": net.name}
    if nf.description:
        doc["description"] = nf.description
    if nf.reconstructed:
        doc["reconstructed"] = True
    d = nf.defaults
    doc["defaults"] = {"friction_factor": d.friction_factor, "gravity": net.gravity,
                       "efficiency": d.efficiency, "tariff": d.tariff}
    doc["nodes"] = [
        _finite({"id": n.id, "kind": n.kind, "elevation_m": n.elevation_m, "head_min_m": n.head_min_m,
                 "head_max_m": n.head_max_m, "demand_min": n.demand_min, "demand_max": n.demand_max,
                 "fixed_demand": n.fixed_demand, "source_inject_min": n.source_inject_min,
                 "source_inject_max": n.source_inject_max})
        for n in net.nodes]
    doc["edges"] = [
        _finite({"id": e.id, "from": e.from_node, "to": e.to_node, "kind": e.kind,
                 "length_m": e.length_m, "diameter_m": e.diameter_m, "friction_factor": e.friction_factor,
                 "flow_min": e.flow_min, "flow_max": e.flow_max, "pump_a1": e.pump_a1,
                 "pump_a0": e.pump_a0, "pump_gain_min_m": e.pump_gain_min_m,
                 "pump_gain_max_m": e.pump_gain_max_m})
        for e in net.edges]
    s = nf.sir
    doc["sir"] = {"variable_nodes": list(s.variable_nodes), "grid_k": s.grid_k, "rounds": s.rounds}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=120)
