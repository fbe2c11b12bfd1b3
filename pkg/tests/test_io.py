import math
import textwrap

import pytest

from wdsir.errors import NetworkFileError
from wdsir.io import BUNDLED, load_bundled, load_network, parse_network, serialize_network
from wdsir.io.datasets import bundled_text
from wdsir.io.inp import GPM_TO_LPS, INCH, FT, parse_inp_subset
from wdsir.network import headloss_coefficient

MINIMAL = textwrap.dedent("""\
    schema_version: 1
    name: tiny
    nodes:
      - {id: S, kind: source, elevation_m: 10, head_min_m: 0, head_max_m: 0,
         source_inject_min: 0, source_inject_max: 5}
      - {id: a, kind: junction, elevation_m: 0, head_min_m: 0, head_max_m: 50, demand_max: 3}
    edges:
      - {id: e, from: S, to: a, length_m: 100, diameter_m: 0.1}
    """)


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_round_trip(name):
    nf = load_bundled(name)
    again = parse_network(serialize_network(nf))
    assert again == nf
    assert serialize_network(again) == serialize_network(nf)


def test_minimal_document_uses_defaults():
    nf = parse_network(MINIMAL)
    assert nf.network.edges[0].friction_factor == 0.02
    assert nf.sir.grid_k == 9 and nf.sir.variable_nodes == ()
    assert nf.network.node("a").demand_min == 0.0
    assert math.isinf(nf.network.edges[0].flow_max)


def test_load_network_by_path(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(MINIMAL)
    assert load_network(str(p)).network.name == "tiny"
    assert load_network("system2").network.name == "system2"
    with pytest.raises(KeyError):
        bundled_text("system3")


@pytest.mark.parametrize("text", ["", "   \n", "# only a comment\n"])
def test_empty_document_points_at_the_start(text):
    with pytest.raises(NetworkFileError) as err:
        parse_network(text)
    assert (err.value.line, err.value.column) == (1, 1)
    assert "1:1" in str(err.value)


def test_unknown_key_reports_line_and_column():
    bad = MINIMAL.replace("demand_max: 3}", "demand_max: 3, colour: red}")
    with pytest.raises(NetworkFileError, match="unknown key 'colour'") as err:
        parse_network(bad)
    assert err.value.line == 6
    assert err.value.column == bad.splitlines()[5].index("colour") + 1


@pytest.mark.parametrize("edit, message", [
    (("schema_version: 1", "schema_version: 2"), "unsupported schema_version"),
    (("kind: junction", "kind: tank"), "kind must be"),
    (("length_m: 100", "length_m: long"), "must be a number"),
    (("to: a", "to: b"), "unknown node"),
    (("head_max_m: 50", "head_max_m: [50]"), "must be a number"),
    (("name: tiny", "name: tiny\nname: again"), "duplicate key"),
    (("nodes:", "nodes: {}\nx:"), "unknown key"),
])
def test_invalid_documents(edit, message):
    with pytest.raises(NetworkFileError, match=message) as err:
        parse_network(MINIMAL.replace(*edit))
    assert err.value.line >= 1 and err.value.column >= 1


def test_yaml_syntax_error_has_location():
    with pytest.raises(NetworkFileError, match="syntax error") as err:
        parse_network("schema_version: 1\nnodes: [\n")
    assert err.value.line >= 2


def test_unknown_variable_node():
    with pytest.raises(NetworkFileError, match="unknown node 'zz'"):
        parse_network(MINIMAL + "sir: {variable_nodes: [zz]}\n")


INP_MINIMAL = textwrap.dedent("""\
    [JUNCTIONS]
    ;ID   Elev   Demand
    J1    5      2.5
    J2    3      1.0
    [RESERVOIRS]
    R     40
    [PIPES]
    P1    R   J1   800   150
    P2    J1  J2   400   100
    [COORDINATES]
    J1    1  2
    [END]
    """)


def test_inp_three_node_tree():
    net = parse_inp_subset(INP_MINIMAL, name="inp")
    assert [n.id for n in net.nodes] == ["J1", "J2", "R"]
    r = net.node("R")
    assert r.is_source and r.elevation_m == 40.0 and r.head_max_m == 0.0
    assert net.node("J1").fixed_demand == 2.5
    p1 = net.edge("P1")
    assert p1.diameter_m == pytest.approx(0.15) and p1.length_m == 800.0
    assert net.headloss_coeffs[0] == pytest.approx(headloss_coefficient(800.0, 0.15))
    assert net.validate() == []


def test_inp_gpm_units_convert():
    text = INP_MINIMAL.replace("P1    R   J1   800   150", "P1    R   J1   800   6")
    net = parse_inp_subset(text.replace("P2    J1  J2   400   100", "P2    J1  J2   400   4"),
                           flow_units="GPM")
    assert net.node("R").elevation_m == pytest.approx(40 * FT)
    assert net.edge("P1").diameter_m == pytest.approx(6 * INCH)
    assert net.node("J1").fixed_demand == pytest.approx(2.5 * GPM_TO_LPS)


def test_inp_unsupported_section_is_named():
    with pytest.raises(NetworkFileError, match=r"unsupported section \[VALVES\]") as err:
        parse_inp_subset(INP_MINIMAL.replace("[COORDINATES]", "[VALVES]"))
    assert err.value.line == 10


def test_inp_missing_column():
    with pytest.raises(NetworkFileError, match="missing column Diameter") as err:
        parse_inp_subset(INP_MINIMAL.replace("P2    J1  J2   400   100", "P2    J1  J2   400"))
    assert err.value.line == 9


def test_inp_roughness_is_ignored_with_a_warning():
    text = INP_MINIMAL.replace("800   150", "800   150   100")
    with pytest.warns(UserWarning, match="roughness ignored"):
        parse_inp_subset(text)


def test_inp_closed_pipe_rejected():
    text = INP_MINIMAL.replace("400   100", "400   100  100  0  Closed")
    with pytest.raises(NetworkFileError, match="closed pipe"):
        parse_inp_subset(text)


def test_inp_one_point_curve_becomes_linear():
    text = INP_MINIMAL.replace("[PIPES]\n", "[PUMPS]\nPU  R  J1  HEAD c1\n[PIPES]\n").replace(
        "P1    R   J1   800   150\n", "").replace("[COORDINATES]", "[CURVES]\nc1  30  60\n[COORDINATES]")
    net = parse_inp_subset(text)
    pump = net.edge("PU")
    assert pump.pump_a0 == pytest.approx(80.0) and pump.pump_a1 == pytest.approx(-60.0 / 90.0)
    assert pump.pump_a0 + pump.pump_a1 * 30 == pytest.approx(60.0)
    assert pump.flow_max == 120.0


def test_inp_free_pump_needs_gain_bounds():
    text = INP_MINIMAL.replace("[PIPES]\n", "[PUMPS]\nPU  R  J1  POWER 10\n[PIPES]\n").replace(
        "P1    R   J1   800   150\n", "")
    with pytest.raises(NetworkFileError, match="pump_gain_min_m"):
        parse_inp_subset(text)
    net = parse_inp_subset(text, defaults={"pump_gain_min_m": 0.0, "pump_gain_max_m": 30.0})
    assert net.edge("PU").pump_gain_max_m == 30.0


# The standard EPANET example network, restricted to the supported sections.
NET1 = textwrap.dedent("""\
    [JUNCTIONS]
    10  710  0
    11  710  150
    12  700  150
    13  695  100
    21  700  150
    22  695  200
    23  690  150
    31  700  100
    32  710  100
    [RESERVOIRS]
    9   800
    [TANKS]
    2   850  120  100  150  50.5  0
    [PIPES]
    10   10  11  10530  18  100  0  Open
    11   11  12  5280   14  100  0  Open
    12   12  13  5280   10  100  0  Open
    21   21  22  5280   10  100  0  Open
    22   22  23  5280   12  100  0  Open
    31   31  32  5280   6   100  0  Open
    110  2   12  200    18  100  0  Open
    111  11  21  5280   10  100  0  Open
    112  12  22  5280   12  100  0  Open
    113  21  31  5280   8   100  0  Open
    121  23  32  5280   8   100  0  Open
    122  13  23  5280   6   100  0  Open
    [PUMPS]
    9    9   10  HEAD 1
    [CURVES]
    1    1500  250
    [END]
    """)


def test_net1_is_read_but_rejected_as_looped():
    with pytest.warns(UserWarning):
        net = parse_inp_subset(NET1, flow_units="GPM", validate=False)
    assert len([n for n in net.nodes if not n.is_source]) == 9
    assert {n.id for n in net.sources} == {"9", "2"}
    tank = net.node("2")
    assert tank.head_min_m == pytest.approx(100 * FT) and tank.head_max_m == pytest.approx(150 * FT)
    assert sum(e.kind == "pipe" for e in net.edges) == 12
    assert net.edge("9").pump_a0 == pytest.approx(4 / 3 * 250 * FT)
    with pytest.warns(UserWarning), pytest.raises(NetworkFileError, match="not a tree"):
        parse_inp_subset(NET1, flow_units="GPM")
