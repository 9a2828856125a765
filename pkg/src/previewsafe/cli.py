"""Command line entry point.

    previewsafe validate PROBLEM
    previewsafe synth    PROBLEM -o OUT_DIR [--max-iters N] [--tol T] [--discretization euler|zoh]
    previewsafe compare  PROBLEM [-o REPORT]
    previewsafe simulate PROBLEM CERT_DIR [--runs N] [--steps M] [--seed S] [--allow-unsafe-start] [--trace FILE]
    previewsafe export   CERT_DIR [--project 0,1,3] [--format json|csv] [-o OUT]

Exit codes: 0 ok, 1 validation or parse failure, 2 synthesis not certified,
3 safety violation during simulation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import geometry as geo
from .artifacts import encode_set, load_artifacts, write_artifacts
from .controller import TraceWriter
from .geometry import GeometryError, Polytope
from .preview import PreviewError
from .problem import ProblemError, load_problem, validate_problem
from .simulator import sample_start, simulate, summarize
from .synthesis import con_inv, max_controlled_invariant
from .systems import FiniteSwitchedSystem, ModelError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CERTIFIED = 2
EXIT_UNSAFE = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _emit(payload, out: str | None):
    text = json.dumps(payload, indent=1)
    if out:
        Path(out).write_text(text)
    else:
        print(text)


def _overrides(args) -> dict:
    return {
        "tol": getattr(args, "tol", None),
        "max_iters": getattr(args, "max_iters", None),
        "discretization": getattr(args, "discretization", None),
        "seed": getattr(args, "seed", None),
    }


def _load(args):
    problem = load_problem(args.problem, _overrides(args))
    problems = validate_problem(problem)
    if problems:
        raise CliError("\n".join(str(v) for v in problems))
    return problem


def cmd_validate(args) -> int:
    problem = load_problem(args.problem, _overrides(args))
    problems = validate_problem(problem)
    report = {
        "problem": str(args.problem),
        "backend": problem.backend,
        "nodes": list(problem.automaton.nodes),
        "violations": [{"rule": v.rule, "where": str(v.where), "message": v.message} for v in problems],
        "ok": not problems,
    }
    _emit(report, None)
    return EXIT_OK if not problems else EXIT_INVALID


def cmd_synth(args) -> int:
    problem = _load(args)
    result, cert = con_inv(problem.system, problem.automaton, problem.safety, problem.options.fixpoint())
    summary = write_artifacts(args.out, problem, result, cert)
    brief = {k: summary[k] for k in ("status", "certified", "iterations", "wall_time_s")}
    brief["out"] = str(args.out)
    _emit(brief, None)
    return EXIT_OK if result.certified else EXIT_NOT_CERTIFIED


def _hull_safe(system, S):
    """Smallest common safe set the merged system must respect: the intersection of all S_i."""
    out = system.universe()
    for q in sorted(S):
        out = system.intersect(out, S[q])
    return out


def cmd_compare(args) -> int:
    problem = _load(args)
    opts = problem.options.fixpoint()
    system = problem.system
    result, _ = con_inv(system, problem.automaton, problem.safety, opts)
    base = max_controlled_invariant(system, _hull_safe(system, problem.safety), opts)
    nodes = {}
    for q, W in sorted(result.W.items()):
        nodes[str(q)] = {
            "winning": system.describe_set(W),
            "baseline_subset": bool(system.is_subset(base.set, W, 1e-6)),
            "strictly_larger": not system.is_subset(W, base.set, 1e-6),
        }
    report = {
        "certified": result.certified and base.status.value == "converged",
        "baseline": system.describe_set(base.set),
        "baseline_empty": bool(system.is_empty(base.set)),
        "nodes": nodes,
    }
    _emit(report, args.out)
    return EXIT_OK if report["certified"] else EXIT_NOT_CERTIFIED


def cmd_simulate(args) -> int:
    problem = _load(args)
    _, W, cert, status = load_artifacts(args.cert_dir, problem)
    system = problem.system
    if status.value != "converged":
        print("warning: certificate is not certified", file=sys.stderr)
    rng = np.random.default_rng(problem.options.seed)
    pool = problem.safety if args.allow_unsafe_start else W
    starts = [q for q in sorted(pool) if not system.is_empty(pool[q])]
    if args.runs and not starts:
        raise CliError("every winning set is empty; nothing to simulate", EXIT_NOT_CERTIFIED)
    traces = []
    fh = open(args.trace, "w") if args.trace else None
    try:
        writer = TraceWriter(fh) if fh else None
        for k in range(args.runs):
            q0 = starts[int(rng.integers(len(starts)))]
            if args.allow_unsafe_start:
                x0 = _unsafe_start(system, W[q0], rng)
            else:
                x0 = sample_start(system, pool[q0], rng)
            if writer:
                writer.write({"run": k, "q0": q0, "x0": x0})
            traces.append(simulate(system, problem.automaton, cert, problem.safety, x0, q0, args.steps,
                                   seed=rng.integers(2**32), trace_writer=writer))
    finally:
        if fh:
            fh.close()
    summary = summarize(traces)
    _emit(summary, args.out)
    return EXIT_UNSAFE if summary["violations"] or summary["failures"] else EXIT_OK


def _unsafe_start(system, W, rng):
    """A state of the domain outside ``W`` when one is found, otherwise any state."""
    if isinstance(system, FiniteSwitchedSystem):
        outside = [x for x in system.states if x not in W]
        pool = outside or list(system.states)
        return pool[int(rng.integers(len(pool)))]
    lo, hi = geo.bounding_box(system.X)
    x = lo + (hi - lo) * rng.random(lo.size)
    for _ in range(1000):
        if not W.contains(x):
            break
        x = lo + (hi - lo) * rng.random(lo.size)
    return x


def _project_set(system, V, coords):
    if isinstance(system, FiniteSwitchedSystem):
        raise CliError("projection only applies to polytopic sets")
    if coords is None:
        return V
    if geo.is_empty(V):
        return Polytope.empty(len(coords))
    return geo.project(V, coords)


def cmd_export(args) -> int:
    problem, W, _, _ = load_artifacts(args.cert_dir)
    system = problem.system
    coords = None if args.project is None else [int(c) for c in args.project.split(",")]
    records = {}
    for q, V in sorted(W.items()):
        if isinstance(system, FiniteSwitchedSystem):
            states = encode_set(system, V)
            records[str(q)] = {"empty": not states, "states": states}
            continue
        P = _project_set(system, V, coords)
        empty = bool(geo.is_empty(P))
        entry = {"empty": empty, "dims": coords if coords is not None else list(range(P.dim))}
        if args.hrep:
            entry["hrep"] = geo.remove_redundancy(P).to_dict() if not empty else Polytope.empty(P.dim).to_dict()
        else:
            if P.dim > 3:
                raise CliError(f"vertex output needs at most 3 dimensions, got {P.dim}; use --project or --hrep")
            entry["vertices"] = [] if empty else geo.vertices(P).tolist()
        records[str(q)] = entry

    if args.format == "json":
        text = json.dumps(records, indent=1)
    else:
        buf = io.StringIO()
        w = csv.writer(buf)
        if isinstance(system, FiniteSwitchedSystem):
            w.writerow(["node", "state"])
            for q, rec in records.items():
                for x in rec["states"]:
                    w.writerow([q, x])
        elif args.hrep:
            raise CliError("csv output carries vertices only; drop --hrep or use --format json")
        else:
            dims = next(iter(records.values()))["dims"] if records else []
            w.writerow(["node", "vertex"] + [f"x{d}" for d in dims])
            for q, rec in records.items():
                for k, v in enumerate(rec["vertices"]):
                    w.writerow([q, k] + [repr(float(c)) for c in v])
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="previewsafe", description="Safety synthesis for switched systems with preview.")
    sub = parser.add_subparsers(dest="command", required=True)

    def numerics(p):
        p.add_argument("--tol", type=float, default=None, help="set-comparison tolerance")
        p.add_argument("--max-iters", type=int, default=None, help="cap on fixed-point iterations and sweeps")
        p.add_argument("--discretization", choices=["euler", "zoh"], default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("validate", help="check a problem file")
    p.add_argument("problem")
    numerics(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="compute winning sets and the controller certificate")
    p.add_argument("problem")
    p.add_argument("-o", "--out", required=True, help="output directory")
    numerics(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", help="winning sets against the preview-agnostic invariant set")
    p.add_argument("problem")
    p.add_argument("-o", "--out", default=None)
    numerics(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="closed-loop runs from random winning-set states")
    p.add_argument("problem")
    p.add_argument("cert_dir")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--allow-unsafe-start", action="store_true", help="start anywhere in the state domain")
    p.add_argument("--trace", default=None, help="JSON-lines trace file")
    p.add_argument("-o", "--out", default=None)
    numerics(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export", help="winning sets as vertex lists or H-representations")
    p.add_argument("cert_dir")
    p.add_argument("--project", default=None, help="comma-separated 0-based coordinates to keep")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--hrep", action="store_true", help="emit H-representations instead of vertices")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "runs", 0) and args.runs < 0:
        parser.error("--runs must be >= 0")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ProblemError, PreviewError, ModelError, GeometryError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


__all__ = ["main", "build_parser"]
