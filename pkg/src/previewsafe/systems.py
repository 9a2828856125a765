"""Switched systems ``x(t+1) in f_q(x(t), u(t))`` with finite or affine modes.

Both backends expose the same operators over their own state-set type:
``frozenset`` of state ids for finite systems and :class:`Polytope` for
affine ones. ``pre`` is the one-step controlled predecessor restricted to the
state domain, ``pre_int`` intersects it with a safe set, and ``inv`` iterates
``pre_int`` to the maximal controlled invariant subset.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Hashable, Mapping, NamedTuple

import numpy as np

from . import geometry as geo
from .geometry import Polytope


class ModelError(Exception):
    """Malformed system definition or unknown mode."""


class BackendMismatch(ModelError, TypeError):
    pass


class InvariantViolation(AssertionError):
    """A theoretically guaranteed set relation failed numerically."""


class FixpointStatus(str, enum.Enum):
    CONVERGED = "converged"
    CAPPED = "iteration_capped"


@dataclass(frozen=True)
class FixpointOptions:
    max_iters: int = 500
    tol: float = geo.EPS
    check_monotone: bool = True


class FixpointResult(NamedTuple):
    set: object
    status: FixpointStatus
    iterations: int


# --------------------------------------------------------------------------
# finite backend


@dataclass(frozen=True)
class FiniteMode:
    """Nondeterministic transition table ``(state, input) -> successors``."""

    transitions: Mapping[tuple[Hashable, Hashable], frozenset]

    @classmethod
    def from_table(cls, table: Mapping) -> FiniteMode:
        """Build from ``{state: {input: [successors]}}``."""
        trans = {}
        for x, row in table.items():
            for u, succ in row.items():
                trans[(x, u)] = frozenset(succ)
        return cls(trans)

    def successors(self, x, u) -> frozenset:
        return self.transitions[(x, u)]


# --------------------------------------------------------------------------
# affine backend


@dataclass(frozen=True, eq=False)
class AffineMode:
    """``x+ = A x + B u + E d + K`` with ``d`` ranging over the polytope ``D``."""

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    K: np.ndarray
    D: Polytope

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        E = np.asarray(self.E, dtype=float).reshape(n, -1)
        K = np.asarray(self.K, dtype=float).reshape(n)
        if A.shape != (n, n):
            raise ModelError(f"A must be square, got {A.shape}")
        if E.shape[1] != self.D.dim:
            raise ModelError(f"E has {E.shape[1]} columns but D has dimension {self.D.dim}")
        if self.D.dim and geo.is_empty(self.D):
            raise ModelError("disturbance set D is empty")
        for name, val in (("A", A), ("B", B), ("E", E), ("K", K)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        # vertices of E D make every tightening a matrix product instead of one LP per row
        ED = (geo.vertices(self.D) @ E.T) if 0 < self.D.dim <= 3 else None
        object.__setattr__(self, "_ED_vertices", ED)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def step(self, x, u, d) -> np.ndarray:
        return self.A @ np.asarray(x, float) + self.B @ np.atleast_1d(u) + self.E @ np.atleast_1d(d) + self.K

    def tightening(self, V: Polytope) -> np.ndarray:
        """Per-row worst-case disturbance contribution ``max_{d in D} a E d``."""
        if self.E.shape[1] == 0:
            return np.zeros(V.n_constraints)
        if self._ED_vertices is not None and len(self._ED_vertices):
            return np.max(V.A @ self._ED_vertices.T, axis=1)
        return np.array([geo.support(self.D, a @ self.E) for a in V.A])

    def input_polytope(self, x, V: Polytope, U: Polytope) -> Polytope:
        """Inputs ``u in U`` with ``A x + B u + E d + K in V`` for every ``d``."""
        Vn = geo.normalize(V)
        if Vn.is_canonical_empty():
            return Polytope.empty(self.m)
        w = self.tightening(Vn)
        x = np.asarray(x, float).ravel()
        A_u = Vn.A @ self.B
        b_u = Vn.b - w - Vn.A @ (self.A @ x + self.K)
        return Polytope(np.vstack([A_u, U.A]), np.concatenate([b_u, U.b]))


# --------------------------------------------------------------------------
# systems


class SwitchedSystem:
    """Common interface; node id ``q`` selects mode ``modes[q]``."""

    backend = ""

    def __init__(self, modes: Mapping[int, object]):
        if len(modes) < 1:
            raise ModelError("a switched system needs at least one mode")
        self.modes = dict(sorted(modes.items()))

    @property
    def mode_ids(self) -> list[int]:
        return list(self.modes)

    def mode(self, q: int):
        try:
            return self.modes[q]
        except KeyError:
            raise ModelError(f"unknown mode {q!r}") from None

    # set algebra, specialized per backend
    def universe(self):
        raise NotImplementedError

    def empty_set(self):
        raise NotImplementedError

    def intersect(self, P, Q):
        raise NotImplementedError

    def is_subset(self, P, Q, tol: float = geo.EPS) -> bool:
        raise NotImplementedError

    def is_empty(self, P) -> bool:
        raise NotImplementedError

    def equals(self, P, Q, tol: float = geo.EPS) -> bool:
        return self.is_subset(P, Q, tol) and self.is_subset(Q, P, tol)

    def check_set(self, V):
        raise NotImplementedError

    def pre(self, q: int, V):
        raise NotImplementedError

    def pre_int(self, q: int, V, S):
        """``pre(q, V) & S``."""
        self.check_set(S)
        if self.is_empty(V) or self.is_empty(S):
            return self.empty_set()
        return self.intersect(self.pre(q, V), S)

    def inv(self, q: int, S, opts: FixpointOptions | None = None) -> FixpointResult:
        """Maximal controlled invariant subset of ``S`` under mode ``q``.

        Iterates ``V <- pre_int(q, V, S)`` from ``V = S`` until ``V`` stops
        shrinking or ``opts.max_iters`` passes have run.
        """
        opts = opts or FixpointOptions()
        V = S
        for k in range(opts.max_iters):
            V_next = self.pre_int(q, V, S)
            if opts.check_monotone and not self.is_subset(V_next, V, opts.tol):
                raise InvariantViolation(f"invariance iterate grew at step {k + 1} of mode {q}")
            if self.is_subset(V, V_next, opts.tol):
                return FixpointResult(V_next, FixpointStatus.CONVERGED, k + 1)
            V = V_next
        return FixpointResult(V, FixpointStatus.CAPPED, opts.max_iters)

    def merged(self) -> SwitchedSystem:
        """Single-mode system whose dynamics cover every mode at once."""
        raise NotImplementedError

    def describe_set(self, V) -> dict:
        raise NotImplementedError


class FiniteSwitchedSystem(SwitchedSystem):
    backend = "finite"

    def __init__(self, states, inputs, modes: Mapping[int, FiniteMode]):
        super().__init__(modes)
        self.states = list(states)
        self.inputs = list(inputs)
        self.X = frozenset(self.states)
        if len(self.X) != len(self.states):
            raise ModelError("duplicate state ids")
        for q, mode in self.modes.items():
            for x in self.states:
                for u in self.inputs:
                    succ = mode.transitions.get((x, u))
                    if not succ:
                        raise ModelError(f"mode {q}: no successor for state {x!r} under input {u!r}")
                    if not succ <= self.X:
                        raise ModelError(f"mode {q}: successor of ({x!r}, {u!r}) outside the state space")

    def universe(self):
        return self.X

    def empty_set(self):
        return frozenset()

    def intersect(self, P, Q):
        return frozenset(P) & frozenset(Q)

    def is_subset(self, P, Q, tol=geo.EPS):
        return frozenset(P) <= frozenset(Q)

    def is_empty(self, P):
        return len(P) == 0

    def check_set(self, V):
        if isinstance(V, Polytope):
            raise BackendMismatch("finite system received a polytope")
        if not frozenset(V) <= self.X:
            raise ModelError(f"states {sorted(map(str, frozenset(V) - self.X))} not in X")

    def pre(self, q, V):
        self.check_set(V)
        mode = self.mode(q)
        V = frozenset(V)
        return frozenset(
            x for x in self.states if any(mode.transitions[(x, u)] <= V for u in self.inputs)
        )

    def admissible_inputs(self, q, x, V) -> list:
        mode = self.mode(q)
        return [u for u in self.inputs if mode.transitions[(x, u)] <= V]

    def merged(self):
        table = {}
        for x in self.states:
            for u in self.inputs:
                table[(x, u)] = frozenset().union(*(m.transitions[(x, u)] for m in self.modes.values()))
        return FiniteSwitchedSystem(self.states, self.inputs, {1: FiniteMode(table)})

    def describe_set(self, V):
        ordered = [x for x in self.states if x in V]
        return {"states": ordered, "size": len(ordered)}


class AffineSwitchedSystem(SwitchedSystem):
    backend = "affine"

    def __init__(self, modes: Mapping[int, AffineMode], X: Polytope, U: Polytope, tol: float = geo.EPS):
        super().__init__(modes)
        self.X = X
        self.U = U
        self.tol = tol
        n = X.dim
        for q, mode in self.modes.items():
            if mode.n != n:
                raise ModelError(f"mode {q} has state dimension {mode.n}, X has {n}")
            if mode.m != U.dim:
                raise ModelError(f"mode {q} has input dimension {mode.m}, U has {U.dim}")

    @property
    def n(self) -> int:
        return self.X.dim

    @property
    def m(self) -> int:
        return self.U.dim

    def universe(self):
        return self.X

    def empty_set(self):
        return Polytope.empty(self.n)

    def intersect(self, P, Q):
        return geo.intersect(P, Q, self.tol)

    def is_subset(self, P, Q, tol=None):
        return geo.is_subset(P, Q, self.tol if tol is None else tol)

    def is_empty(self, P):
        return geo.is_empty(P)

    def check_set(self, V):
        if not isinstance(V, Polytope):
            raise BackendMismatch("affine system expects a Polytope")
        if V.dim != self.n:
            raise geo.DimensionError(f"set has dimension {V.dim}, system state has {self.n}")

    def pre(self, q, V):
        """Project the lifted set ``{(x, u) : x in X, u in U, f_q(x, u) in V}`` onto x.

        Each row of ``V`` is tightened by the support of ``E D`` along it, which
        makes the membership robust to every disturbance.
        """
        self.check_set(V)
        mode = self.mode(q)
        n, m = self.n, self.m
        Vn = geo.normalize(V)
        if Vn.is_canonical_empty() or geo.is_empty(Vn):
            return self.empty_set()
        w = mode.tightening(Vn)
        rows = [
            np.hstack([Vn.A @ mode.A, Vn.A @ mode.B]),
            np.hstack([self.X.A, np.zeros((self.X.n_constraints, m))]),
            np.hstack([np.zeros((self.U.n_constraints, n)), self.U.A]),
        ]
        rhs = [Vn.b - w - Vn.A @ mode.K, self.X.b, self.U.b]
        lifted = Polytope(np.vstack(rows), np.concatenate(rhs))
        if m == 0:
            return geo.remove_redundancy(lifted, self.tol)
        return geo.project(lifted, range(n), self.tol)

    def admissible_inputs(self, q, x, V) -> Polytope:
        return self.mode(q).input_polytope(x, V, self.U)

    def merged(self):
        modes = list(self.modes.values())
        first = modes[0]
        for mode in modes[1:]:
            for name in ("A", "B", "E", "K"):
                if not np.allclose(getattr(mode, name), getattr(first, name)):
                    raise ModelError(
                        f"cannot merge modes with different {name}; only disturbance sets may differ"
                    )
        pts = np.vstack([geo.vertices(m.D) for m in modes])
        D = geo.hull_of_vertices(pts)
        return AffineSwitchedSystem({1: AffineMode(first.A, first.B, first.E, first.K, D)}, self.X, self.U, self.tol)

    def describe_set(self, V):
        out = {"empty": geo.is_empty(V), "constraints": int(V.n_constraints)}
        if not out["empty"]:
            lo, hi = geo.bounding_box(V)
            out["bounding_box"] = [lo.tolist(), hi.tolist()]
            out["volume"] = geo.volume(V)
        return out
