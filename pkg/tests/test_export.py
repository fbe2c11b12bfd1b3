import csv
import io
import itertools
import json
import re

import numpy as np
import pytest

from conftest import bundled_case
from wdsir.errors import ExportError
from wdsir.io.export import (FORMATS, export, grid_to_dict, polytope_to_dict, sequence_to_dict,
                             timing_to_dict)
from wdsir.oracle import agreement
from wdsir.polytope import PolytopeSequence, polytope_from_points

CUBE = polytope_from_points(np.array(list(itertools.product((0.0, 1.0), repeat=3))))


def test_unit_cube_off():
    text = export("polytope", polytope_to_dict(CUBE), "off").decode().splitlines()
    assert text[0] == "OFF" and text[1] == "8 12 0"
    tris = [list(map(int, line.split())) for line in text[10:]]
    assert len(tris) == 12 and all(t[0] == 3 for t in tris)
    # every edge of a closed triangulated surface appears in exactly two triangles
    edges = {}
    for _, a, b, c in tris:
        for e in ((a, b), (b, c), (c, a)):
            edges[frozenset(e)] = edges.get(frozenset(e), 0) + 1
    assert set(edges.values()) == {2}


def test_off_needs_three_dimensions():
    square = polytope_from_points([[0, 0], [1, 0], [1, 1], [0, 1]])
    with pytest.raises(ExportError, match="3-D"):
        export("polytope", polytope_to_dict(square), "off")


def test_polytope_json_round_trips_through_json():
    doc = polytope_to_dict(CUBE)
    assert json.loads(export("polytope", doc, "json")) == doc
    assert doc["volume"] == pytest.approx(1.0)


def test_polytope_csv_lists_vertices():
    rows = list(csv.reader(io.StringIO(export("polytope", polytope_to_dict(CUBE), "csv").decode())))
    assert rows[0] == ["d1", "d2", "d3"] and len(rows) == 9


def test_empty_sequence_has_nothing_to_export():
    doc = sequence_to_dict(PolytopeSequence((), ()))
    for kind, fmt in (("sequence", "svg"), ("sequence", "csv"), ("polytope", "off")):
        with pytest.raises(ExportError, match="nothing to export"):
            export(kind, doc, fmt)


@pytest.mark.parametrize("kind, fmt", [("grid", "svg"), ("grid", "off"), ("timing", "off"), ("volume", "json")])
def test_unsupported_pairs(kind, fmt):
    with pytest.raises(ExportError, match=f"cannot export {kind} as {fmt}"):
        export(kind, {}, fmt)


def test_relative_volume_bars(case):
    doc = sequence_to_dict(case.seq, case.prob)
    svg = export("sequence", doc, "svg").decode()
    values = re.findall(r'class="bar"[^>]*data-value="([0-9.]+)"', svg)
    assert len(values) == len(case.seq)
    assert values[-1] == "1.000000"
    assert [float(v) for v in values] == pytest.approx(case.seq.relative_volumes, abs=5e-7)


def test_polytope_from_sequence_by_index(case):
    doc = sequence_to_dict(case.seq, case.prob)
    first = json.loads(export("polytope", doc, "json", index=0))
    assert first == doc["polytopes"][0]
    assert f"node {case.prob.variable_nodes[0]}" in export("polytope", doc, "svg").decode()
    with pytest.raises(ExportError, match="no polytope"):
        export("polytope", doc, "json", index=10)


def test_exports_are_deterministic(case):
    a = sequence_to_dict(case.seq, case.prob, timing=False)
    b = sequence_to_dict(case.seq, case.prob, timing=False)
    for kind in ("sequence", "polytope"):
        for fmt in FORMATS[kind]:
            assert export(kind, a, fmt) == export(kind, b, fmt)
    assert all("elapsed_s" not in s for s in a["steps"])


def test_grid_csv_has_one_row_per_point(case):
    inside = [case.seq.final.contains(p) for p in case.screen.points]
    doc = grid_to_dict(case.screen, agreement(case.seq, case.screen), case.prob.variable_nodes, inside)
    rows = list(csv.reader(io.StringIO(export("grid", doc, "csv").decode())))
    assert len(rows) == 730
    assert rows[0][-1] == "inside_final"
    assert doc["counts"]["total"] == 729
    assert doc["agreement"][-1]["false_positives"] == 0


def test_timing_exports():
    doc = timing_to_dict([("ops", 0.01), ("sequence", 0.5)])
    svg = export("timing", doc, "svg").decode()
    assert svg.count('class="bar"') == 2
    rows = export("timing", doc, "csv").decode().splitlines()
    assert len(rows) == 3
    with pytest.raises(ExportError, match="nothing to export"):
        export("timing", timing_to_dict([]), "svg")
