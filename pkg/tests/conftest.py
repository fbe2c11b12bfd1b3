import functools
import math
from dataclasses import dataclass

import numpy as np
import pytest

from wdsir.hydraulics import default_sign_pattern, solve_tree_flows
from wdsir.io import load_bundled
from wdsir.network import Edge, Network, Node
from wdsir.oracle import grid_screen
from wdsir.polytope import build_sequence
from wdsir.scheduler import solve_ops
from wdsir.support import SIRProblem

ACCEPTANCE = {}


@dataclass
class Case:
    nf: object
    ops: object
    prob: SIRProblem
    seq: object
    screen: object

    @property
    def net(self):
        return self.nf.network

    @property
    def axis_max(self):
        return np.array([self.seq.steps[0].supports[i].vertex[i] for i in range(self.prob.dimension)])


@functools.lru_cache(maxsize=None)
def bundled_case(name, rounds=3, k=9):
    nf = load_bundled(name)
    ops = solve_ops(nf.network)
    prob = SIRProblem.from_ops(nf.network, ops, nf.sir.variable_nodes)
    seq = build_sequence(prob, rounds)
    upper = np.array([seq.steps[0].supports[i].vertex[i] for i in range(prob.dimension)])
    return Case(nf, ops, prob, seq, grid_screen(prob, k, upper=upper))


@pytest.fixture(params=["system1", "system2"])
def case(request):
    return bundled_case(request.param)


def single_pipe(src_head_max=20.0, node_floor=5.0, length=1000.0, diameter=0.1, box=100.0):
    """Source S feeding junction J through one flat pipe."""
    nodes = (
        Node("S", "source", 0.0, 0.0, src_head_max, 0.0, 0.0, None, 0.0, math.inf),
        Node("J", "junction", 0.0, node_floor, 1000.0, 0.0, box, 0.0),
    )
    edges = (Edge("p", "S", "J", "pipe", length, diameter),)
    return Network(nodes, edges, name="single-pipe")


def frozen_problem(net, variable_nodes, status=None):
    """SIRProblem with the given pump status and away-from-source signs."""
    status = {p.id: True for p in net.pumps} if status is None else status
    flows = solve_tree_flows(net, None, status).flows
    sign = default_sign_pattern(net, flows, status)
    return SIRProblem(net, tuple(status[p.id] for p in net.pumps), sign, variable_nodes,
                      tuple(net.demand_vector()))


def pump_star(caps=(4.0, 3.0, 2.0), inject_max=6.0, box=10.0):
    """Frictionless curve pumps feeding leaves from one source.

    Leaf ``i`` can take at most ``caps[i]`` L/s before its pump gain falls
    below the floor, and the source limits the total, so the feasible set
    is a box cut by one plane: an exactly polyhedral region.
    """
    nodes = [Node("S", "source", 0.0, 0.0, 0.0, 0.0, 0.0, None, 0.0, inject_max)]
    edges = []
    for i, cap in enumerate(caps):
        nid = f"L{i}"
        nodes.append(Node(nid, "junction", 0.0, 10.0, 1000.0, 0.0, box, 0.0))
        # gain = 10 + (cap - q) -> at least the 10 m floor iff q <= cap
        edges.append(Edge(f"P{i}", "S", nid, "pump", pump_a1=-1.0, pump_a0=10.0 + cap,
                          pump_gain_min_m=0.0, pump_gain_max_m=100.0, flow_min=0.0))
    return Network(tuple(nodes), tuple(edges), name="pump-star")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
