"""Reading and writing synthesis results as JSON files in a directory.

``winning.json`` holds the per-node winning sets, ``certificate.json`` every
intermediate set the controller needs, ``summary.json`` iteration count,
timing and set sizes, and ``problem.json`` the problem with the options that
were actually used. Finite sets are stored as lists of state ids in
declaration order, polytopes as ``{"A", "b", "dim"}``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .geometry import Polytope
from .preview import PreviewAutomaton
from .problem import Problem, problem_from_dict
from .synthesis import NodeCertificate, SynthesisCertificate, WinningSet
from .systems import FiniteSwitchedSystem, FixpointStatus


def encode_set(system, V):
    if isinstance(system, FiniteSwitchedSystem):
        return [x for x in system.states if x in V]
    return V.to_dict()


def decode_set(system, data):
    if isinstance(system, FiniteSwitchedSystem):
        return frozenset(data)
    return Polytope.from_dict(data)


def _num(v):
    return None if v == math.inf else v


def certificate_to_dict(system, result: WinningSet, cert: SynthesisCertificate) -> dict:
    nodes = {}
    for q, c in sorted(cert.nodes.items()):
        nodes[str(q)] = {
            "holding": _num(c.holding),
            "t_min": c.t_min,
            "preview": {str(j): t for j, t in c.preview.items()},
            "reach": {str(j): [encode_set(system, V) for V in chain] for j, chain in c.reach.items()},
            "hold": {str(k): encode_set(system, V) for k, V in c.hold.items()},
        }
    return {
        "status": result.status.value,
        "certified": result.certified,
        "iterations": result.iterations,
        "automaton": cert.automaton.to_dict(),
        "nodes": nodes,
    }


def certificate_from_dict(system, data: dict) -> tuple[SynthesisCertificate, FixpointStatus]:
    G_hat = PreviewAutomaton.from_dict(data["automaton"])
    nodes = {}
    for key, c in data["nodes"].items():
        q = int(key)
        holding = math.inf if c["holding"] is None else int(c["holding"])
        nodes[q] = NodeCertificate(
            q,
            holding,
            int(c["t_min"]),
            {int(j): int(t) for j, t in c["preview"].items()},
            {int(j): [decode_set(system, V) for V in chain] for j, chain in c["reach"].items()},
            {int(k): decode_set(system, V) for k, V in c["hold"].items()},
        )
    return SynthesisCertificate(G_hat, nodes), FixpointStatus(data["status"])


def summary_dict(problem: Problem, result: WinningSet) -> dict:
    system = problem.system
    return {
        "status": result.status.value,
        "certified": result.certified,
        "iterations": result.iterations,
        "wall_time_s": result.elapsed,
        "backend": problem.backend,
        "nodes": {str(q): system.describe_set(V) for q, V in sorted(result.W.items())},
        "trace": [{"sweep": k, "node": q, "changed": ch} for k, q, ch in result.trace],
    }


def write_artifacts(out_dir, problem: Problem, result: WinningSet, cert: SynthesisCertificate) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    system = problem.system
    raw = dict(problem.raw)
    raw["options"] = {k: getattr(problem.options, k) for k in ("tol", "max_iters", "discretization", "seed")}
    summary = summary_dict(problem, result)
    files = {
        "problem.json": raw,
        "winning.json": {
            "certified": result.certified,
            "sets": {str(q): encode_set(system, V) for q, V in sorted(result.W.items())},
        },
        "certificate.json": certificate_to_dict(system, result, cert),
        "summary.json": summary,
    }
    for name, payload in files.items():
        (out / name).write_text(json.dumps(payload, indent=1))
    return summary


def load_artifacts(cert_dir, problem: Problem | None = None):
    """``(problem, winning sets, certificate, status)`` from a synthesis output directory."""
    d = Path(cert_dir)
    if problem is None:
        problem = problem_from_dict(json.loads((d / "problem.json").read_text()))
    system = problem.system
    win = json.loads((d / "winning.json").read_text())
    W = {int(q): decode_set(system, V) for q, V in win["sets"].items()}
    cert, status = certificate_from_dict(system, json.loads((d / "certificate.json").read_text()))
    return problem, W, cert, status
