"""Serializable documents for run artifacts and their renderings.

Every artifact is first turned into a plain JSON-compatible dict (schema
name plus ``schema_version``); :func:`export` renders such a dict as json,
csv, off or svg bytes. Output depends only on the dict, so identical runs
produce identical files.

Supported pairs::

    polytope  json csv off(3-D only) svg
    sequence  json csv svg (relative-volume bars)
    grid      json csv
    timing    json csv svg (seconds per stage)
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from ..errors import DegenerateHullError, ExportError
from ..hull import hull_2d

SCHEMA_VERSION = 1
FORMATS = {
    "polytope": ("json", "csv", "off", "svg"),
    "sequence": ("json", "csv", "svg"),
    "grid": ("json", "csv"),
    "timing": ("json", "csv", "svg"),
}


def _floats(a):
    return [float(x) for x in np.asarray(a, dtype=float).reshape(-1)]


def polytope_to_dict(poly) -> dict:
    from ..polytope import volume

    return {
        "schema": "polytope",
        "schema_version": SCHEMA_VERSION,
        "dimension": poly.dimension,
        "vertices": [_floats(v) for v in poly.vertices],
        "facets": [{"normal": _floats(f.normal), "offset": float(f.offset), "ring": list(f.ring)}
                   for f in poly.facets],
        "volume": volume(poly),
    }


def support_to_dict(res) -> dict:
    return {"direction": _floats(res.direction), "vertex": _floats(res.vertex),
            "objective": float(res.objective), "upper_bound": float(res.upper_bound),
            "converged": bool(res.converged), "iterations": int(res.iterations)}


def sequence_to_dict(seq, prob=None, timing=True) -> dict:
    doc = {
        "schema": "sequence",
        "schema_version": SCHEMA_VERSION,
        "polytopes": [polytope_to_dict(p) for p in seq.polytopes],
        "relative_volumes": [float(x) for x in seq.relative_volumes] if seq.polytopes else [],
        "steps": [],
    }
    for i, step in enumerate(seq.steps):
        row = {"round": i, "new_vertices": step.new_vertices, "facets_tried": step.facets_tried,
               "best_gain": float(step.best_gain), "failures": list(step.failures),
               "supports": [support_to_dict(r) for r in step.supports]}
        if timing:
            row["elapsed_s"] = float(step.elapsed_s)
        doc["steps"].append(row)
    if prob is not None:
        lo, hi = prob.box
        doc["variable_nodes"] = list(prob.variable_nodes)
        doc["box"] = {"lower": _floats(lo), "upper": _floats(hi)}
    return doc


def grid_to_dict(screen, report=None, variable_nodes=None, inside=None) -> dict:
    """``inside`` optionally marks grid points inside the final polytope."""
    points = screen.points
    rows = []
    for i, (p, v) in enumerate(zip(points, screen.verdicts)):
        row = {"demand": _floats(p), "feasible": bool(v.feasible), "residual": float(v.worst_residual),
               "constraint": v.worst_constraint}
        if inside is not None:
            row["inside_final"] = bool(inside[i])
        rows.append(row)
    feas, infeas, total = screen.counts
    doc = {"schema": "grid", "schema_version": SCHEMA_VERSION,
           "axes": [_floats(a) for a in screen.axes],
           "counts": {"feasible": feas, "infeasible": infeas, "total": total},
           "points": rows}
    if variable_nodes is not None:
        doc["variable_nodes"] = list(variable_nodes)
    if report is not None:
        doc["agreement"] = [{"polytope": j, "inside": r.inside, "false_positives": r.false_positives,
                             "covered": r.covered, "coverage": r.coverage}
                            for j, r in enumerate(report.polytopes)]
    return doc


def timing_to_dict(stages) -> dict:
    """``stages``: iterable of (name, seconds)."""
    return {"schema": "timing", "schema_version": SCHEMA_VERSION,
            "stages": [{"name": str(n), "elapsed_s": float(s)} for n, s in stages]}


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _csv(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def _fmt(x) -> str:
    return repr(float(x))


def polytope_off(doc) -> bytes:
    if doc["dimension"] != 3:
        raise ExportError("OFF export needs a 3-D polytope")
    tris = []
    for f in doc["facets"]:
        r = f["ring"]
        tris.extend((r[0], r[i], r[i + 1]) for i in range(1, len(r) - 1))
    lines = ["OFF", f"{len(doc['vertices'])} {len(tris)} 0"]
    lines += [" ".join(_fmt(x) for x in v) for v in doc["vertices"]]
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    return ("\n".join(lines) + "\n").encode()


def _svg(width, height, body) -> bytes:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]).encode()


def _bars(labels, values, title, unit, ymax=None) -> bytes:
    w, h, left, bottom, top = 80 + 70 * len(values), 260, 50, 40, 30
    ymax = ymax or (max(values) if values and max(values) > 0 else 1.0)
    plot_h = h - bottom - top
    body = [f'<text x="{w / 2:.1f}" y="18" text-anchor="middle">{title}</text>',
            f'<line x1="{left}" y1="{h - bottom}" x2="{w - 10}" y2="{h - bottom}" stroke="black"/>',
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{h - bottom}" stroke="black"/>',
            f'<text x="{left - 4}" y="{top + 4}" text-anchor="end">{ymax:.3g}</text>',
            f'<text x="{left - 4}" y="{h - bottom + 4}" text-anchor="end">0</text>']
    for i, (lab, v) in enumerate(zip(labels, values)):
        bh = plot_h * max(v, 0.0) / ymax
        x = left + 20 + 70 * i
        body.append(f'<rect class="bar" x="{x}" y="{h - bottom - bh:.2f}" width="40" height="{bh:.2f}" '
                    f'fill="steelblue" data-value="{v:.6f}"/>')
        body.append(f'<text x="{x + 20}" y="{h - bottom - bh - 4:.2f}" text-anchor="middle">{v:.4f}{unit}</text>')
        body.append(f'<text x="{x + 20}" y="{h - bottom + 16}" text-anchor="middle">{lab}</text>')
    return _svg(w, h, body)


def _projection_panel(points, axes, ox, size, names):
    sub = np.array([[p[a] for a in axes] for p in points])
    lo, hi = sub.min(axis=0), sub.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    pad = 25

    def xy(p):
        q = (p - lo) / span
        return ox + pad + q[0] * (size - 2 * pad), size - pad - q[1] * (size - 2 * pad)

    try:
        ring = hull_2d(sub).facets
        order = [e[0] for e in ring]
    except DegenerateHullError:
        order = list(range(len(sub)))
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (xy(sub[i]) for i in order))
    body = [f'<rect x="{ox}" y="0" width="{size}" height="{size}" fill="none" stroke="#ccc"/>',
            f'<polygon points="{pts}" fill="#9ecae1" stroke="#08519c"/>']
    for p in sub:
        x, y = xy(p)
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="#08519c"/>')
    body.append(f'<text x="{ox + size / 2:.1f}" y="{size - 6}" text-anchor="middle">{names[axes[0]]}</text>')
    body.append(f'<text x="{ox + 10}" y="{size / 2:.1f}" transform="rotate(-90 {ox + 10} {size / 2:.1f})" '
                f'text-anchor="middle">{names[axes[1]]}</text>')
    return body


def polytope_svg(doc, names=None) -> bytes:
    dim = doc["dimension"]
    pts = [np.array(v) for v in doc["vertices"]]
    names = names or [f"d{i + 1}" for i in range(dim)]
    if dim == 1:
        size = 240
        lo, hi = min(p[0] for p in pts), max(p[0] for p in pts)
        body = [f'<line x1="20" y1="60" x2="{size - 20}" y2="60" stroke="#08519c" stroke-width="4"/>',
                f'<text x="20" y="80">{lo:.4f}</text>',
                f'<text x="{size - 20}" y="80" text-anchor="end">{hi:.4f}</text>']
        return _svg(size, 100, body)
    pairs = [(0, 1)] if dim == 2 else [(0, 1), (0, 2), (1, 2)]
    size = 240
    body = []
    for k, axes in enumerate(pairs):
        body += _projection_panel(pts, axes, k * size, size, names)
    return _svg(size * len(pairs), size, body)


def export(kind: str, doc: dict, fmt: str, index: int = -1) -> bytes:
    """Render an artifact document. For ``polytope`` the document may be a
    sequence, in which case ``index`` selects the polytope (default last)."""
    if kind not in FORMATS or fmt not in FORMATS[kind]:
        raise ExportError(f"cannot export {kind} as {fmt}")
    if kind in ("polytope", "sequence") and doc.get("schema") == "sequence" and not doc.get("polytopes"):
        raise ExportError("nothing to export")
    if kind == "timing" and not doc.get("stages"):
        raise ExportError("nothing to export")
    if kind == "grid" and not doc.get("points"):
        raise ExportError("nothing to export")
    if kind == "polytope" and doc.get("schema") == "sequence":
        names = doc.get("variable_nodes")
        try:
            doc = doc["polytopes"][index]
        except IndexError:
            raise ExportError(f"no polytope with index {index}") from None
    else:
        names = doc.get("variable_nodes")
    if fmt == "json":
        return dumps(doc).encode()

    if kind == "polytope":
        if fmt == "csv":
            dim = doc["dimension"]
            return _csv([f"d{i + 1}" for i in range(dim)] if not names else list(names),
                        [[_fmt(x) for x in v] for v in doc["vertices"]])
        if fmt == "off":
            return polytope_off(doc)
        return polytope_svg(doc, names and [f"node {n}" for n in names])

    if kind == "sequence":
        rel = doc["relative_volumes"]
        if fmt == "csv":
            rows = [[j, len(p["vertices"]), len(p["facets"]), _fmt(p["volume"]), _fmt(rel[j])]
                    for j, p in enumerate(doc["polytopes"])]
            return _csv(["polytope", "vertices", "facets", "volume", "relative_volume"], rows)
        return _bars([f"C{j}" for j in range(len(rel))], rel, "Relative volume", "", ymax=1.0)

    if kind == "grid":
        dim = len(doc["axes"])
        header = [f"d{i + 1}" for i in range(dim)] if not names else list(names)
        header += ["feasible", "residual", "constraint"]
        with_inside = any("inside_final" in r for r in doc["points"])
        if with_inside:
            header.append("inside_final")
        rows = []
        for r in doc["points"]:
            row = [_fmt(x) for x in r["demand"]] + [int(r["feasible"]), _fmt(r["residual"]), r["constraint"]]
            if with_inside:
                row.append(int(r.get("inside_final", False)))
            rows.append(row)
        return _csv(header, rows)

    stages = doc["stages"]
    if fmt == "csv":
        return _csv(["stage", "elapsed_s"], [[s["name"], _fmt(s["elapsed_s"])] for s in stages])
    return _bars([s["name"] for s in stages], [s["elapsed_s"] for s in stages], "Time per step", "s")
