"""Read-only importer for a small subset of the EPANET INP text format.

Accepted sections: [JUNCTIONS], [RESERVOIRS], [TANKS], [PIPES], [PUMPS],
[CURVES], [COORDINATES] (skipped) and [END]. Any other section is an error
naming it. Units follow EPANET's convention for the chosen flow unit: LPS
means metres, millimetre diameters and L/s; GPM means feet, inches and
US gallons per minute.

Pipe roughness is ignored in favour of a single Darcy friction factor. A
pump whose HEAD curve has exactly one point (q0, h0) gets the linear curve
through the shutoff head 4/3 h0 and (q0, h0); any other pump keeps a free
gain whose bounds must come from ``defaults``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from ..errors import NetworkFileError
from ..network import DEFAULT_FRICTION, GRAVITY, JUNCTION, PIPE, PUMP, SOURCE, Edge, Network, Node

SUPPORTED = ("JUNCTIONS", "RESERVOIRS", "TANKS", "PIPES", "PUMPS", "CURVES", "COORDINATES", "END")

FT = 0.3048
INCH = 0.0254
GPM_TO_LPS = 0.0630901964


@dataclass(frozen=True)
class _Units:
    length: float  # to metres
    diameter: float  # to metres
    flow: float  # to L/s


_UNITS = {"LPS": _Units(1.0, 1e-3, 1.0), "GPM": _Units(FT, INCH, GPM_TO_LPS)}

DEFAULTS = {
    "friction_factor": DEFAULT_FRICTION,
    "gravity": GRAVITY,
    "head_min_m": 0.0,
    "head_max_m": 100.0,
    "demand_max": math.inf,
    "source_inject_max": math.inf,
    "pump_gain_min_m": None,
    "pump_gain_max_m": None,
}


def _rows(text):
    """Yield (section, line number, fields) for every data line."""
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise NetworkFileError(f"malformed section header {line!r}", n, 1)
            section = line[1:-1].strip().upper()
            if section not in SUPPORTED:
                raise NetworkFileError(f"unsupported section [{section}]", n, 1)
            if section == "END":
                return
            continue
        if section is None:
            raise NetworkFileError("data before the first section header", n, 1)
        yield section, n, line.split()


def _num(fields, i, n, what):
    if len(fields) <= i:
        raise NetworkFileError(f"missing column {what}", n, 1)
    try:
        return float(fields[i])
    except ValueError:
        raise NetworkFileError(f"column {what} is not a number: {fields[i]!r}", n, 1) from None


def _field(fields, i, n, what):
    if len(fields) <= i:
        raise NetworkFileError(f"missing column {what}", n, 1)
    return fields[i]


def parse_inp_subset(text: str, flow_units="LPS", defaults=None, name="", validate=True) -> Network:
    """Build a Network from INP text.

    ``defaults`` overrides entries of :data:`DEFAULTS` (head bounds for
    junctions, demand ceilings, injection ceilings, free pump gain bounds).
    With ``validate`` the result must pass the network checks, in particular
    the tree check; otherwise it is returned as is for inspection.
    """
    if flow_units not in _UNITS:
        raise ValueError(f"flow_units must be one of {sorted(_UNITS)}")
    u = _UNITS[flow_units]
    cfg = dict(DEFAULTS)
    for key, value in (defaults or {}).items():
        if key not in DEFAULTS:
            raise ValueError(f"unknown default {key!r}")
        cfg[key] = value

    nodes, edges, curves, pumps = [], [], {}, []
    roughness_seen = False
    for section, n, f in _rows(text):
        if section == "JUNCTIONS":
            demand = _num(f, 2, n, "Demand") * u.flow if len(f) > 2 else 0.0
            nodes.append(Node(_field(f, 0, n, "ID"), JUNCTION, _num(f, 1, n, "Elev") * u.length,
                              cfg["head_min_m"], cfg["head_max_m"], 0.0,
                              max(cfg["demand_max"], demand), demand))
        elif section == "RESERVOIRS":
            nodes.append(Node(_field(f, 0, n, "ID"), SOURCE, _num(f, 1, n, "Head") * u.length, 0.0, 0.0,
                              0.0, 0.0, None, 0.0, cfg["source_inject_max"]))
        elif section == "TANKS":
            lo, hi = _num(f, 3, n, "MinLevel") * u.length, _num(f, 4, n, "MaxLevel") * u.length
            nodes.append(Node(_field(f, 0, n, "ID"), SOURCE, _num(f, 1, n, "Elevation") * u.length, lo, hi,
                              0.0, 0.0, None, -cfg["source_inject_max"], cfg["source_inject_max"]))
        elif section == "PIPES":
            if len(f) > 5:
                roughness_seen = True
            status = f[7].upper() if len(f) > 7 else "OPEN"
            if status == "CLOSED":
                raise NetworkFileError(f"closed pipe {f[0]} is not supported", n, 1)
            edges.append(Edge(_field(f, 0, n, "ID"), _field(f, 1, n, "Node1"), _field(f, 2, n, "Node2"), PIPE,
                              _num(f, 3, n, "Length") * u.length, _num(f, 4, n, "Diameter") * u.diameter,
                              cfg["friction_factor"]))
        elif section == "PUMPS":
            pumps.append((n, f))
        elif section == "CURVES":
            cid = _field(f, 0, n, "ID")
            curves.setdefault(cid, []).append((_num(f, 1, n, "X") * u.flow, _num(f, 2, n, "Y") * u.length))
    if roughness_seen:
        warnings.warn(f"pipe roughness ignored; using friction factor {cfg['friction_factor']}", stacklevel=2)

    for n, f in pumps:
        pid, a, b = _field(f, 0, n, "ID"), _field(f, 1, n, "Node1"), _field(f, 2, n, "Node2")
        params = {f[i].upper(): f[i + 1] for i in range(3, len(f) - 1, 2)}
        curve = curves.get(params.get("HEAD", ""), [])
        if len(curve) == 1 and curve[0][0] > 0 and curve[0][1] > 0:
            q0, h0 = curve[0]
            a0, a1 = 4.0 / 3.0 * h0, -h0 / (3.0 * q0)
            gmin = cfg["pump_gain_min_m"] if cfg["pump_gain_min_m"] is not None else 0.0
            gmax = cfg["pump_gain_max_m"] if cfg["pump_gain_max_m"] is not None else a0
            edges.append(Edge(pid, a, b, PUMP, pump_a1=a1, pump_a0=a0, pump_gain_min_m=gmin,
                              pump_gain_max_m=gmax, flow_min=0.0, flow_max=4.0 * q0))
        else:
            if cfg["pump_gain_min_m"] is None or cfg["pump_gain_max_m"] is None:
                raise NetworkFileError(
                    f"pump {pid} has no one-point head curve; supply pump_gain_min_m and pump_gain_max_m", n, 1)
            edges.append(Edge(pid, a, b, PUMP, pump_gain_min_m=cfg["pump_gain_min_m"],
                              pump_gain_max_m=cfg["pump_gain_max_m"], flow_min=0.0))

    net = Network(tuple(nodes), tuple(edges), cfg["gravity"], name)
    if validate:
        problems = net.validate()
        if problems:
            raise NetworkFileError("; ".join(str(p) for p in problems))
    return net
