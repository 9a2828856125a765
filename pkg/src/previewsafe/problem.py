"""Problem files: plant, preview automaton, safe sets and solver options in one JSON document.

Layout::

    {
      "system":    {"backend": "finite", "states": [...], "inputs": [...],
                    "modes": {"1": {"s1": {"u1": ["s1"], ...}, ...}, ...}}
                 | {"backend": "affine", "X": <set>, "U": <set>,
                    "modes": {"1": {"A": ..., "B": ..., "E": ..., "K": ..., "D": <set>}}}
                 | {"backend": "model", "model": "cruise" | "lane_keeping", "params": {...}},
      "automaton": {"nodes": 3, "edges": [{"from": 1, "to": 2, "preview": [1, 1]}], "holding": {"1": 2}},
      "safety":    {"1": <set>, ...},
      "options":   {"tol": 1e-7, "max_iters": 500, "discretization": "euler", "seed": 0}
    }

A polytope ``<set>`` is ``{"box": [lower, upper]}``, ``{"A": ..., "b": ...}``
or the string ``"X"`` for the whole state domain. Finite sets are lists of
state ids. Keys starting with ``_`` are comments and ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Polytope
from .models import DISCRETIZATIONS, MODELS
from .preview import PreviewAutomaton, Violation, validate_automaton
from .systems import (
    AffineMode,
    AffineSwitchedSystem,
    FiniteMode,
    FiniteSwitchedSystem,
    FixpointOptions,
    ModelError,
)


class ProblemError(ValueError):
    """Unreadable or inconsistent problem file; ``where`` names the offending field."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where
        self.message = message


@dataclass
class Options:
    tol: float = 1e-7
    max_iters: int = 500
    discretization: str = "euler"
    seed: int = 0

    def fixpoint(self) -> FixpointOptions:
        return FixpointOptions(max_iters=self.max_iters, tol=self.tol)


@dataclass
class Problem:
    system: object
    automaton: PreviewAutomaton
    safety: dict
    options: Options = field(default_factory=Options)
    raw: dict = field(default_factory=dict)

    @property
    def backend(self) -> str:
        return "finite" if isinstance(self.system, FiniteSwitchedSystem) else "affine"


def _polytope(data, where: str, dim: int | None, X: Polytope | None = None) -> Polytope:
    if data == "X":
        if X is None:
            raise ProblemError(where, '"X" used before the state domain is known')
        return X
    if not isinstance(data, dict):
        raise ProblemError(where, f"expected a set object, got {type(data).__name__}")
    try:
        if "box" in data:
            lo, hi = data["box"]
            P = Polytope.box(np.atleast_1d(lo), np.atleast_1d(hi))
        elif "A" in data and "b" in data:
            P = Polytope(data["A"], data["b"])
        else:
            raise ProblemError(where, 'set needs "box" or "A"/"b"')
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ProblemError):
            raise
        raise ProblemError(where, f"malformed set: {exc}") from exc
    if dim is not None and P.dim != dim:
        raise ProblemError(where, f"set has dimension {P.dim}, expected {dim}")
    return P


def _matrix(data, where: str) -> np.ndarray:
    try:
        M = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemError(where, f"not a numeric array: {exc}") from exc
    if not np.all(np.isfinite(M)):
        raise ProblemError(where, "entries must be finite")
    return M


def _finite_system(data: dict) -> FiniteSwitchedSystem:
    for key in ("states", "inputs", "modes"):
        if key not in data:
            raise ProblemError(f"system.{key}", "missing")
    states, inputs = list(data["states"]), list(data["inputs"])
    modes = {}
    for q, table in data["modes"].items():
        if q.startswith("_"):
            continue
        for x in states:
            for u in inputs:
                try:
                    succ = table[x][u]
                except (KeyError, TypeError):
                    raise ProblemError(f"system.modes.{q}.{x}.{u}", "transition missing") from None
                unknown = [y for y in succ if y not in states]
                if unknown:
                    raise ProblemError(f"system.modes.{q}.{x}.{u}", f"unknown successor states {unknown}")
        modes[int(q)] = FiniteMode.from_table({x: {u: table[x][u] for u in inputs} for x in states})
    try:
        return FiniteSwitchedSystem(states, inputs, modes)
    except ModelError as exc:
        raise ProblemError("system", str(exc)) from exc


def _affine_system(data: dict, tol: float) -> AffineSwitchedSystem:
    for key in ("X", "U", "modes"):
        if key not in data:
            raise ProblemError(f"system.{key}", "missing")
    X = _polytope(data["X"], "system.X", None)
    U = _polytope(data["U"], "system.U", None)
    modes = {}
    for q, md in data["modes"].items():
        if q.startswith("_"):
            continue
        where = f"system.modes.{q}"
        n = X.dim
        A = _matrix(md.get("A"), f"{where}.A").reshape(n, n) if "A" in md else None
        if A is None:
            raise ProblemError(f"{where}.A", "missing")
        B = _matrix(md.get("B", np.zeros((n, U.dim))), f"{where}.B")
        D = _polytope(md.get("D", {"box": [[0.0], [0.0]]}), f"{where}.D", None)
        E = _matrix(md.get("E", np.zeros((n, D.dim))), f"{where}.E")
        K = _matrix(md.get("K", np.zeros(n)), f"{where}.K")
        try:
            modes[int(q)] = AffineMode(A, B, E, K, D)
        except (ModelError, ValueError) as exc:
            raise ProblemError(where, str(exc)) from exc
    try:
        return AffineSwitchedSystem(modes, X, U, tol)
    except ModelError as exc:
        raise ProblemError("system", str(exc)) from exc


def _options(data: dict) -> Options:
    opts = Options()
    for key, value in data.items():
        if key.startswith("_"):
            continue
        if not hasattr(opts, key):
            raise ProblemError(f"options.{key}", "unknown option")
        setattr(opts, key, type(getattr(opts, key))(value))
    if opts.discretization not in DISCRETIZATIONS:
        raise ProblemError("options.discretization", f"expected one of {DISCRETIZATIONS}")
    if opts.max_iters < 0 or opts.tol <= 0:
        raise ProblemError("options", "need max_iters >= 0 and tol > 0")
    return opts


def problem_from_dict(data: dict, overrides: dict | None = None) -> Problem:
    """Build and cross-check a problem; ``overrides`` replaces option values."""
    if not isinstance(data, dict):
        raise ProblemError("<root>", "expected a JSON object")
    for key in ("system", "automaton", "safety"):
        if key not in data:
            raise ProblemError(key, "missing")
    opts = _options({**data.get("options", {}), **{k: v for k, v in (overrides or {}).items() if v is not None}})

    sysd = data["system"]
    backend = sysd.get("backend")
    if backend == "finite":
        system = _finite_system(sysd)
    elif backend == "affine":
        system = _affine_system(sysd, opts.tol)
    elif backend == "model":
        name = sysd.get("model")
        if name not in MODELS:
            raise ProblemError("system.model", f"unknown model {name!r}; expected one of {sorted(MODELS)}")
        try:
            system = MODELS[name](sysd.get("params", {}), opts.discretization)
        except KeyError as exc:
            raise ProblemError(f"system.params.{exc.args[0]}", "missing") from None
        system.tol = opts.tol
    else:
        raise ProblemError("system.backend", f"expected finite, affine or model, got {backend!r}")

    try:
        G = PreviewAutomaton.from_dict(data["automaton"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemError("automaton", f"malformed automaton: {exc!r}") from exc

    safety = {}
    for q, s in data["safety"].items():
        if q.startswith("_"):
            continue
        where = f"safety.{q}"
        if isinstance(system, FiniteSwitchedSystem):
            if not isinstance(s, list):
                raise ProblemError(where, "finite safe sets are lists of state ids")
            unknown = [x for x in s if x not in system.states]
            if unknown:
                raise ProblemError(where, f"unknown states {unknown}")
            safety[int(q)] = frozenset(s)
        else:
            safety[int(q)] = _polytope(s, where, system.n, system.X)
    return Problem(system, G, safety, opts, data)


def validate_problem(problem: Problem) -> list[Violation]:
    """Automaton rules plus agreement of node ids across automaton, modes and safety map."""
    out = list(validate_automaton(problem.automaton))
    nodes = set(problem.automaton.nodes)
    modes = set(problem.system.modes)
    for q in sorted(nodes - modes):
        out.append(Violation("missing_mode", q, "automaton node has no plant mode"))
    for q in sorted(nodes - set(problem.safety)):
        out.append(Violation("missing_safety", q, "automaton node has no safe set"))
    for q in sorted(set(problem.safety) - nodes):
        out.append(Violation("unknown_node", q, "safe set given for a node that is not in the automaton"))
    return out


def load_problem(path, overrides: dict | None = None) -> Problem:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from exc
    return problem_from_dict(data, overrides)


def bundled(name: str) -> Path:
    """Path of a bundled problem file such as ``"toy.json"``."""
    return Path(__file__).with_name("assets") / name


__all__ = [
    "Problem",
    "ProblemError",
    "Options",
    "problem_from_dict",
    "load_problem",
    "validate_problem",
    "bundled",
]
