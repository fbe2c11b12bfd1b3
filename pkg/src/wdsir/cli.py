"""Command-line interface: ``wds-sir <command> ...``.

Exit codes: 0 success, 1 infeasible or invalid input data, 2 usage error.
Data goes to standard output, diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from .errors import (ExportError, NetworkFileError, OpsInfeasibleError, PreconditionError,
                     StructuralInfeasibility, WdsirError)
from .io.datasets import load_network
from .io.export import (FORMATS, dumps, export, grid_to_dict, sequence_to_dict, timing_to_dict)
from .io.inp import parse_inp_subset
from .io.netfile import NetworkFile, serialize_network
from .oracle import agreement, axis_maxima, convexity_probe, grid_screen
from .polytope import build_sequence, contains
from .scheduler import solve_ops
from .support import SIRProblem

EXIT_OK, EXIT_FINDING, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def write_atomic(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(args) -> NetworkFile:
    ref = args.network
    if ref.lower().endswith(".inp"):
        net = parse_inp_subset(Path(ref).read_text(encoding="utf-8"), flow_units=args.flow_units,
                               name=Path(ref).stem)
        return NetworkFile(net)
    return load_network(ref)


def _variable_nodes(args, nf) -> tuple[str, ...]:
    if getattr(args, "variable_nodes", None):
        return tuple(s.strip() for s in args.variable_nodes.split(",") if s.strip())
    if not nf.sir.variable_nodes:
        raise UsageError("no variable nodes: set sir.variable_nodes in the file or pass --variable-nodes")
    return nf.sir.variable_nodes


def _problem(args, nf):
    ops = solve_ops(nf.network, efficiency=nf.defaults.efficiency, tariff=nf.defaults.tariff)
    try:
        prob = SIRProblem.from_ops(nf.network, ops, _variable_nodes(args, nf))
    except PreconditionError as exc:
        raise UsageError(str(exc)) from None
    return ops, prob


def _rounds(args, nf):
    return nf.sir.rounds if args.rounds is None else args.rounds


def _emit(args, doc, human):
    if args.json:
        if args.no_timing:
            doc = _strip_timing(doc)
        sys.stdout.write(dumps(doc))
    else:
        sys.stdout.write(human.rstrip("\n") + "\n")


def _strip_timing(doc):
    if isinstance(doc, dict):
        return {k: _strip_timing(v) for k, v in doc.items() if k not in ("elapsed_s", "timing")}
    if isinstance(doc, list):
        return [_strip_timing(v) for v in doc]
    return doc


def _vec(v, digits=4):
    return "[" + ", ".join(f"{x:.{digits}f}" for x in v) + "]"


def cmd_validate(args):
    nf = _load(args)
    net = nf.network
    doc = {"name": net.name, "nodes": len(net.nodes), "edges": len(net.edges),
           "sources": [n.id for n in net.sources], "pumps": [e.id for e in net.pumps],
           "variable_nodes": list(nf.sir.variable_nodes), "valid": True}
    human = (f"{net.name or args.network}: valid tree, {len(net.nodes)} nodes, {len(net.edges)} edges, "
             f"sources {', '.join(doc['sources'])}, pumps {', '.join(doc['pumps']) or '-'}")
    _emit(args, doc, human)
    return EXIT_OK


def cmd_ops(args):
    nf = _load(args)
    net = nf.network
    ops = solve_ops(net, efficiency=nf.defaults.efficiency, tariff=nf.defaults.tariff)
    st = ops.nominal_state
    doc = {
        "pump_status": {k: bool(v) for k, v in ops.pump_status.items()},
        "sign_pattern": {e.id: s for e, s in zip(net.edges, ops.sign_pattern)},
        "energy_cost": ops.energy_cost,
        "combinations": ops.evaluated,
        "flows_lps": {e.id: float(f) * 1e3 for e, f in zip(net.edges, st.flows)},
        "pressure_heads_m": {n.id: float(h) for n, h in zip(net.nodes, st.heads)},
        "pump_gains_m": {k: float(v) for k, v in st.pump_gains.items()},
    }
    lines = ["pump status: " + (", ".join(f"{k}={'ON' if v else 'OFF'}" for k, v in ops.pump_status.items())
                                or "(no pumps)"),
             f"energy cost: {ops.energy_cost:.4f}  ({ops.evaluated} combination(s) evaluated)",
             "edge      sign   flow (L/s)"]
    for e, s, f in zip(net.edges, ops.sign_pattern, st.flows):
        lines.append(f"{e.id:<9} {s:+d}   {f * 1e3:10.4f}")
    lines.append("node      pressure head (m)")
    for n, h in zip(net.nodes, st.heads):
        lines.append(f"{n.id:<9} {h:10.4f}")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK


def _run_sir(args, nf):
    stages = []
    t = time.perf_counter()
    ops, prob = _problem(args, nf)
    stages.append(("ops", time.perf_counter() - t))
    seq = build_sequence(prob, _rounds(args, nf))
    for j, step in enumerate(seq.steps):
        stages.append(("C0 start" if j == 0 else f"C{j} expand", step.elapsed_s))
    return ops, prob, seq, stages


def cmd_sir(args):
    nf = _load(args)
    t0 = time.perf_counter()
    ops, prob, seq, stages = _run_sir(args, nf)
    k = nf.sir.grid_k if args.k is None else args.k
    t = time.perf_counter()
    upper = np.array([seq.steps[0].supports[i].vertex[i] for i in range(prob.dimension)])
    screen = grid_screen(prob, k, upper=upper)
    report = agreement(seq, screen)
    stages.append(("grid", time.perf_counter() - t))
    total = time.perf_counter() - t0
    rel = seq.relative_volumes
    doc = {
        "network": nf.network.name,
        "variable_nodes": list(prob.variable_nodes),
        "pump_status": {k2: bool(v) for k2, v in ops.pump_status.items()},
        "polytopes": len(seq),
        "vertices": [len(p.vertices) for p in seq.polytopes],
        "volumes": [float(v) for v in seq.volumes],
        "relative_volumes": [float(v) for v in rel],
        "axis_maxima": [float(x) for x in upper],
        "grid": {"k": k, "feasible": report.feasible_points, "total": report.total_points,
                 "false_positives": [r.false_positives for r in report.polytopes],
                 "coverage": report.coverages},
        "timing": {"total_s": total, "stages": [{"name": n, "elapsed_s": s} for n, s in stages]},
    }
    if args.out:
        out = Path(args.out)
        net_text = serialize_network(nf)
        inside = [contains(seq.final, p) for p in screen.points]
        settings = {"rounds": _rounds(args, nf), "k": k, "variable_nodes": list(prob.variable_nodes),
                    "inputs_sha256": hashlib.sha256(net_text.encode()).hexdigest(),
                    "pump_status": doc["pump_status"]}
        seq_doc = sequence_to_dict(seq, prob, timing=not args.no_timing)
        grid_doc = grid_to_dict(screen, report, prob.variable_nodes, inside)
        timing_doc = timing_to_dict(stages)
        write_atomic(out / "network.yaml", net_text.encode())
        write_atomic(out / "settings.json", dumps(settings).encode())
        write_atomic(out / "sequence.json", dumps(seq_doc).encode())
        write_atomic(out / "grid.json", dumps(grid_doc).encode())
        if not args.no_timing:
            write_atomic(out / "timing.json", dumps(timing_doc).encode())
            write_atomic(out / "timing.svg", export("timing", timing_doc, "svg"))
        write_atomic(out / "relative_volume.svg", export("sequence", seq_doc, "svg"))
        write_atomic(out / "final.svg", export("polytope", seq_doc, "svg"))
        if prob.dimension == 3:
            write_atomic(out / "final.off", export("polytope", seq_doc, "off"))
        doc["out"] = str(out)
    pumps = ", ".join(f"{p}={'ON' if on else 'OFF'}" for p, on in ops.pump_status.items()) or "-"
    lines = [f"variable nodes: {', '.join(prob.variable_nodes)}   pumps: {pumps}",
             f"axis maxima (L/s): {_vec(upper)}",
             "polytope  vertices  volume        relative  coverage  false+"]
    for j, p in enumerate(seq.polytopes):
        r = report.polytopes[j]
        lines.append(f"C{j:<8} {len(p.vertices):<9} {seq.volumes[j]:<13.6f} {rel[j]:<9.4f} "
                     f"{r.coverage:<9.4f} {r.false_positives}")
    lines.append(f"grid k={k}: {report.feasible_points}/{report.total_points} feasible")
    if not args.no_timing:
        lines.append(f"time: {total:.3f} s")
    if args.out:
        lines.append(f"written to {args.out}")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK if report.false_positives == 0 else EXIT_FINDING


def _parse_demand(text, dim):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"--demand must be comma-separated numbers, got {text!r}") from None
    if len(vals) != dim:
        raise UsageError(f"--demand needs {dim} values, got {len(vals)}")
    return np.array(vals)


def cmd_check(args):
    nf = _load(args)
    ops, prob, seq, _ = _run_sir(args, nf)
    d = _parse_demand(args.demand, prob.dimension)
    verdict = prob.verdict(d)
    inside = [contains(p, d) for p in seq.polytopes]
    doc = {"demand": d.tolist(), "variable_nodes": list(prob.variable_nodes), "feasible": verdict.feasible,
           "worst_residual": verdict.worst_residual, "worst_constraint": verdict.worst_constraint,
           "inside": inside}
    lines = [f"demand {_vec(d)} at nodes {', '.join(prob.variable_nodes)}",
             f"feasible: {'yes' if verdict.feasible else 'no'}  (worst residual {verdict.worst_residual:.3e}"
             f", {verdict.worst_constraint})"]
    lines += [f"inside C{j}: {'yes' if v else 'no'}" for j, v in enumerate(inside)]
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK if verdict.feasible else EXIT_FINDING


def cmd_grid(args):
    nf = _load(args)
    _, prob = _problem(args, nf)
    k = nf.sir.grid_k if args.k is None else args.k
    if k < 2:
        raise UsageError("--k must be at least 2")
    t = time.perf_counter()
    screen = grid_screen(prob, k)
    elapsed = time.perf_counter() - t
    doc = grid_to_dict(screen, variable_nodes=prob.variable_nodes)
    doc["timing"] = {"elapsed_s": elapsed}
    feas, _, total = screen.counts
    header = "  ".join(f"{'d' + v:>10}" for v in prob.variable_nodes) + "  feasible  residual"
    lines = [header]
    for p, v in zip(screen.points, screen.verdicts):
        lines.append("  ".join(f"{x:10.4f}" for x in p) + f"  {'yes' if v.feasible else 'no':>8}"
                     f"  {v.worst_residual:.3e}")
    lines.append(f"{feas}/{total} feasible")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK


def cmd_probe(args):
    nf = _load(args)
    _, prob = _problem(args, nf)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    rep = convexity_probe(prob, args.trials, args.seed, upper=axis_maxima(prob))
    doc = {"trials": rep.trials, "seed": rep.seed, "pairs": rep.pairs, "checks": rep.checks,
           "violations": rep.violations, "worst_residual": rep.worst_residual,
           "samples_drawn": rep.samples_drawn,
           "violation_examples": [list(x) for x in rep.violation_examples]}
    human = (f"{rep.pairs} pairs, {rep.checks} combinations checked (seed {rep.seed}): "
             f"{rep.violations} infeasible, worst residual {rep.worst_residual:.3e}")
    _emit(args, doc, human)
    return EXIT_OK if rep.ok else EXIT_FINDING


def cmd_export(args):
    run = Path(args.run_dir)
    if not run.is_dir():
        raise UsageError(f"{run} is not a directory")
    source = "sequence" if args.what in ("polytope", "sequence") else args.what
    path = run / f"{source}.json"
    if not path.exists():
        raise UsageError(f"{path} not found")
    doc = json.loads(path.read_text(encoding="utf-8"))
    data = export(args.what, doc, args.format, index=args.index)
    if args.output:
        write_atomic(Path(args.output), data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--no-timing", action="store_true", help="omit timing fields")

    net_args = argparse.ArgumentParser(add_help=False)
    net_args.add_argument("network", help="bundled name (system1, system2), network file or .inp file")
    net_args.add_argument("--flow-units", choices=("LPS", "GPM"), default="LPS",
                          help="flow units of an .inp file")
    net_args.add_argument("--variable-nodes", help="comma-separated node ids overriding the file")

    p = argparse.ArgumentParser(prog="wds-sir", description="Security injection regions of tree water networks.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common, net_args], help="parse and validate a network")
    sub.add_parser("ops", parents=[common, net_args], help="pump schedule at nominal demands")
    s = sub.add_parser("sir", parents=[common, net_args], help="build the inner polytope sequence")
    s.add_argument("--rounds", type=int)
    s.add_argument("--k", type=int, help="grid points per axis for the agreement report")
    s.add_argument("--out", help="run directory for artifacts")
    c = sub.add_parser("check", parents=[common, net_args], help="membership and feasibility of one demand")
    c.add_argument("--demand", required=True, help="comma-separated variable demands in L/s")
    c.add_argument("--rounds", type=int)
    g = sub.add_parser("grid", parents=[common, net_args], help="brute-force feasibility grid")
    g.add_argument("--k", type=int)
    pr = sub.add_parser("probe", parents=[common, net_args], help="convexity spot-check")
    pr.add_argument("--trials", type=int, default=500)
    pr.add_argument("--seed", type=int, default=0)
    e = sub.add_parser("export", parents=[common], help="render an artifact of a sir run")
    e.add_argument("run_dir")
    e.add_argument("--what", required=True, choices=sorted(FORMATS))
    e.add_argument("--format", required=True, choices=("json", "csv", "off", "svg"))
    e.add_argument("--index", type=int, default=-1, help="polytope index (default: final)")
    e.add_argument("--output", help="file to write instead of standard output")
    return p


COMMANDS = {"validate": cmd_validate, "ops": cmd_ops, "sir": cmd_sir, "check": cmd_check,
            "grid": cmd_grid, "probe": cmd_probe, "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NetworkFileError, OpsInfeasibleError, StructuralInfeasibility) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINDING
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WdsirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINDING


if __name__ == "__main__":
    sys.exit(main())
