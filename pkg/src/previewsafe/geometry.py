"""H-representation polytopes and the set operations used by the fixed-point engine.

A :class:`Polytope` is the set ``{x : A x <= b}``. Every operation is a pure
function returning a new polytope; instances never change after construction.
The empty set has a single canonical encoding, the one-row system
``0 . x <= -1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

EPS = 1e-7
_ZERO_ROW = 1e-12
_LP_BOX = 1e9
QHULL_MAX_DIM = 6
QHULL_MIN_RADIUS = 1e-6


class GeometryError(Exception):
    """Raised for malformed polytopes and LP failures."""


class DimensionError(GeometryError):
    pass


@dataclass(frozen=True)
class LpOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float = float("nan")
    point: np.ndarray | None = None


def solve_lp(c, A, b, A_eq=None, b_eq=None, bounds=(None, None)) -> LpOutcome:
    """Maximize ``c . x`` subject to ``A x <= b`` (and optional equalities)."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, c.size)
    b = np.asarray(b, dtype=float).ravel()
    res = linprog(
        -c,
        A_ub=A if A.shape[0] else None,
        b_ub=b if A.shape[0] else None,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if res.status == 0:
        return LpOutcome("optimal", float(-res.fun), np.asarray(res.x, dtype=float))
    if res.status == 2:
        return LpOutcome("infeasible")
    if res.status == 3:
        return LpOutcome("unbounded", float("inf"))
    raise GeometryError(f"LP solver failed (status {res.status}): {res.message}")


class Polytope:
    """The convex set ``{x : A x <= b}`` in ``R^dim``.

    Parameters
    ----------
    A : array_like, shape (m, n)
    b : array_like, shape (m,)
    """

    __slots__ = ("A", "b", "dim", "_empty", "_verts")

    def __init__(self, A, b):
        A = np.array(A, dtype=float, ndmin=2)
        b = np.array(b, dtype=float).ravel()
        if A.shape[0] == 0 and A.ndim == 2 and b.size == 0:
            pass
        elif A.shape[0] != b.size:
            raise GeometryError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if not np.all(np.isfinite(A)) or np.any(np.isnan(b)):
            raise GeometryError("A must be finite and b must not contain NaN")
        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b
        self.dim = A.shape[1]
        self._empty = None
        self._verts = None  # vertex cache, filled by the qhull path of remove_redundancy

    # -- constructors -----------------------------------------------------
    @classmethod
    def box(cls, lower, upper) -> Polytope:
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape:
            raise DimensionError("lower and upper bounds differ in length")
        n = lower.size
        A = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([upper, -lower])
        keep = np.isfinite(b)
        return cls(A[keep].reshape(-1, n), b[keep])

    @classmethod
    def empty(cls, dim: int) -> Polytope:
        P = cls(np.zeros((1, dim)), [-1.0])
        P._empty = True
        return P

    @classmethod
    def universe(cls, dim: int) -> Polytope:
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def from_dict(cls, data: dict) -> Polytope:
        A = np.array(data["A"], dtype=float)
        if A.ndim == 1:
            A = A.reshape(-1, int(data.get("dim", 1)))
        if A.size == 0:
            A = np.zeros((0, int(data.get("dim", A.shape[-1] if A.ndim == 2 else 0))))
        return cls(A, data["b"])

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist(), "dim": self.dim}

    # -- basic queries ----------------------------------------------------
    @property
    def n_constraints(self) -> int:
        return self.A.shape[0]

    def is_canonical_empty(self) -> bool:
        return (
            self.A.shape[0] == 1
            and not np.any(self.A)
            and self.b[0] < 0
        )

    def contains(self, x, tol: float = EPS) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise DimensionError(f"point has dimension {x.size}, polytope has {self.dim}")
        return bool(np.all(self.A @ x <= self.b + tol))

    def slack(self, x) -> float:
        """Smallest constraint slack ``min(b - A x)`` after row normalization."""
        P = normalize(self)
        if P.n_constraints == 0:
            return float("inf")
        return float(np.min(P.b - P.A @ np.asarray(x, dtype=float).ravel()))

    def __repr__(self):
        return f"Polytope(dim={self.dim}, rows={self.n_constraints})"

    def __and__(self, other: Polytope) -> Polytope:
        return intersect(self, other)

    def __le__(self, other: Polytope) -> bool:
        return is_subset(self, other)


def _check_dims(P: Polytope, Q: Polytope):
    if P.dim != Q.dim:
        raise DimensionError(f"dimension mismatch: {P.dim} vs {Q.dim}")


def normalize(P: Polytope) -> Polytope:
    """Scale every row of ``A`` to unit norm; drop trivially true zero rows."""
    norms = np.linalg.norm(P.A, axis=1)
    zero = norms <= _ZERO_ROW
    if np.any(zero & (P.b < -_ZERO_ROW)):
        return Polytope.empty(P.dim)
    keep = ~zero
    A = P.A[keep] / norms[keep, None]
    b = P.b[keep] / norms[keep]
    out = Polytope(A.reshape(-1, P.dim), b)
    out._empty = P._empty
    return out


def is_empty(P: Polytope) -> bool:
    """True iff ``{x : A x <= b}`` has no point."""
    if P._empty is not None:
        return P._empty
    if P.is_canonical_empty():
        result = True
    elif P.n_constraints == 0:
        result = False
    else:
        out = solve_lp(np.zeros(P.dim), P.A, P.b)
        result = out.status == "infeasible"
    P._empty = result
    return result


def support(P: Polytope, c) -> float:
    """``max_{x in P} c . x``; ``inf`` when unbounded in direction ``c``."""
    c = np.asarray(c, dtype=float).ravel()
    if c.size != P.dim:
        raise DimensionError(f"direction has dimension {c.size}, polytope has {P.dim}")
    out = solve_lp(c, P.A, P.b)
    if out.status == "infeasible":
        raise GeometryError("support function of an empty polytope")
    return out.value


def bounding_box(P: Polytope) -> tuple[np.ndarray, np.ndarray]:
    n = P.dim
    upper = np.array([support(P, e) for e in np.eye(n)])
    lower = -np.array([support(P, -e) for e in np.eye(n)])
    return lower, upper


def _dedupe_rows(A: np.ndarray, b: np.ndarray, tol: float):
    # rows assumed normalized; for identical normals keep the tightest offset
    if A.shape[0] <= 1:
        return A, b
    order = np.lexsort(np.round(A, 9).T[::-1])
    A, b = A[order], b[order]
    keep_A, keep_b = [A[0]], [b[0]]
    for a_row, b_val in zip(A[1:], b[1:]):
        if np.max(np.abs(a_row - keep_A[-1])) <= 1e-9:
            keep_b[-1] = min(keep_b[-1], b_val)
        else:
            keep_A.append(a_row)
            keep_b.append(b_val)
    return np.array(keep_A), np.array(keep_b)


def _qhull_reduce(A: np.ndarray, b: np.ndarray, tol: float):
    """Non-redundant rows and vertices of a bounded, full-dimensional polytope via qhull.

    Returns ``None`` when qhull is not applicable (thin or unbounded set,
    numerical trouble); the caller then falls back to one LP per row. Every
    dropped row is checked against the vertices of the kept rows, so a row
    qhull misses is put back rather than silently lost.
    """
    from scipy.spatial import HalfspaceIntersection, QhullError

    n = A.shape[1]
    if not 2 <= n <= QHULL_MAX_DIM:
        return None
    try:
        center, radius = chebyshev_center(Polytope(A, b))
    except GeometryError:
        return None
    if not np.isfinite(radius) or radius < QHULL_MIN_RADIUS or radius >= _LP_BOX / 10:
        return None
    try:
        hs = HalfspaceIntersection(np.hstack([A, -b[:, None]]), center)
        active = np.unique(np.concatenate([np.asarray(f, dtype=int) for f in hs.dual_facets]))
    except (QhullError, ValueError):
        return None
    verts = hs.intersections
    if verts.size == 0 or not np.all(np.isfinite(verts)) or np.max(np.abs(verts)) > _LP_BOX / 10:
        return None
    keep = np.zeros(A.shape[0], dtype=bool)
    keep[active] = True
    verts = _unique_rows(verts, 1e-9)
    missed = ~keep & np.any(A @ verts.T > b[:, None] + tol, axis=1)
    if np.any(missed):
        return None
    return keep, verts


def _unique_rows(V: np.ndarray, tol: float) -> np.ndarray:
    key = np.round(V / max(tol, 1e-12)).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return V[np.sort(idx)]


def remove_redundancy(P: Polytope, tol: float = EPS) -> Polytope:
    """Drop every constraint whose removal leaves the set unchanged.

    Bounded full-dimensional sets of dimension 2 to ``QHULL_MAX_DIM`` go
    through qhull's halfspace intersection. Otherwise a row ``a . x <= beta``
    is redundant when ``max a . x`` over the remaining rows (with this one
    relaxed by one unit) does not exceed ``beta + tol``.
    """
    P = normalize(P)
    if P.is_canonical_empty() or is_empty(P):
        return Polytope.empty(P.dim)
    if P.n_constraints <= 1:
        return P
    A, b = _dedupe_rows(P.A, P.b, tol)
    fast = _qhull_reduce(A, b, tol)
    if fast is not None:
        keep, verts = fast
        out_P = Polytope(A[keep], b[keep])
        out_P._empty = False
        out_P._verts = verts
        return out_P

    m = A.shape[0]
    keep = np.ones(m, dtype=bool)

    # rows strictly slack over the bounding box are slack over P, hence redundant
    try:
        lo, hi = bounding_box(Polytope(A, b))
    except GeometryError:
        lo = hi = None
    if lo is not None and np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
        box_max = np.maximum(A * lo, A * hi).sum(axis=1)
        keep &= ~(box_max < b - tol)

    for i in range(m):
        if not keep[i]:
            continue
        keep[i] = False
        A_rest = np.vstack([A[keep], A[i]])
        b_rest = np.concatenate([b[keep], [b[i] + 1.0]])
        out = solve_lp(A[i], A_rest, b_rest)
        if out.status == "optimal" and out.value <= b[i] + tol:
            continue
        keep[i] = True
    out_P = Polytope(A[keep], b[keep])
    out_P._empty = False
    return out_P


def intersect(P: Polytope, Q: Polytope, tol: float = EPS) -> Polytope:
    _check_dims(P, Q)
    if P.is_canonical_empty() or Q.is_canonical_empty():
        return Polytope.empty(P.dim)
    stacked = Polytope(np.vstack([P.A, Q.A]), np.concatenate([P.b, Q.b]))
    return remove_redundancy(stacked, tol)


def is_subset(P: Polytope, Q: Polytope, tol: float = EPS) -> bool:
    """True iff every point of ``P`` satisfies every row of ``Q`` within ``tol``."""
    _check_dims(P, Q)
    if is_empty(P):
        return True
    Qn = normalize(Q)
    if Qn.is_canonical_empty():
        return False
    if P._verts is not None:
        return bool(np.all(Qn.A @ P._verts.T <= Qn.b[:, None] + tol))
    for row, (a, beta) in enumerate(zip(Qn.A, Qn.b)):
        try:
            out = solve_lp(a, P.A, P.b)
        except GeometryError as exc:
            raise GeometryError(f"containment LP failed on row {row}: {exc}") from exc
        if out.status == "unbounded" or out.value > beta + tol:
            return False
    return True


def equals(P: Polytope, Q: Polytope, tol: float = EPS) -> bool:
    return is_subset(P, Q, tol) and is_subset(Q, P, tol)


def _eliminate(A: np.ndarray, b: np.ndarray, k: int):
    """One Fourier-Motzkin step removing column ``k``."""
    col = A[:, k]
    pos = col > _ZERO_ROW
    neg = col < -_ZERO_ROW
    zero = ~(pos | neg)
    Ap, bp = A[pos] / col[pos, None], b[pos] / col[pos]
    An, bn = A[neg] / -col[neg, None], b[neg] / -col[neg]
    # every (p, n) pair: (a_p + a_n) x <= b_p + b_n, column k cancels
    combA = (Ap[:, None, :] + An[None, :, :]).reshape(-1, A.shape[1])
    combb = (bp[:, None] + bn[None, :]).ravel()
    newA = np.vstack([A[zero], combA])
    newb = np.concatenate([b[zero], combb])
    return np.delete(newA, k, axis=1), newb


def project(P: Polytope, keep, tol: float = EPS) -> Polytope:
    """Orthogonal projection onto the coordinates ``keep`` (in that order).

    Other coordinates are removed by Fourier-Motzkin elimination, pruning
    redundant rows after each eliminated variable.
    """
    keep = [int(k) for k in keep]
    if not keep:
        raise GeometryError("projection needs at least one coordinate to keep")
    if len(set(keep)) != len(keep) or min(keep) < 0 or max(keep) >= P.dim:
        raise DimensionError(f"invalid coordinates {keep} for dimension {P.dim}")
    current = remove_redundancy(P, tol)
    if current.is_canonical_empty():
        return Polytope.empty(len(keep))
    labels = list(range(P.dim))
    for var in [v for v in range(P.dim) if v not in keep]:
        k = labels.index(var)
        A, b = _eliminate(current.A, current.b, k)
        labels.pop(k)
        current = remove_redundancy(Polytope(A.reshape(-1, len(labels)), b), tol)
        if current.is_canonical_empty():
            return Polytope.empty(len(keep))
    order = [labels.index(k) for k in keep]
    return Polytope(current.A[:, order], current.b)


def affine_preimage(P: Polytope, M, c=None) -> Polytope:
    """``{y : M y + c in P}``."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.shape[0] != P.dim:
        raise DimensionError(f"map output {M.shape[0]} does not match polytope dim {P.dim}")
    c = np.zeros(P.dim) if c is None else np.asarray(c, dtype=float).ravel()
    if P.is_canonical_empty():
        return Polytope.empty(M.shape[1])
    return Polytope(P.A @ M, P.b - P.A @ c)


def chebyshev_center(P: Polytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball inside ``P`` (radius may be 0)."""
    Pn = normalize(P)
    if Pn.is_canonical_empty():
        raise GeometryError("Chebyshev center of an empty polytope")
    n = P.dim
    if Pn.n_constraints == 0:
        return np.zeros(n), float("inf")
    if n == 1 and np.any(Pn.A[:, 0] > 0) and np.any(Pn.A[:, 0] < 0):
        # an interval: the midpoint, no LP needed
        hi = np.min(Pn.b[Pn.A[:, 0] > 0])
        lo = np.max(-Pn.b[Pn.A[:, 0] < 0])
        if lo > hi:
            raise GeometryError("Chebyshev center of an empty polytope")
        return np.array([(lo + hi) / 2]), (hi - lo) / 2
    A = np.hstack([Pn.A, np.ones((Pn.n_constraints, 1))])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    bounds = [(None, None)] * n + [(0, _LP_BOX)]
    out = solve_lp(c, A, Pn.b, bounds=bounds)
    if out.status != "optimal":
        raise GeometryError(f"Chebyshev center LP is {out.status}")
    return out.point[:n], out.point[n]


def vertices(P: Polytope, tol: float = 1e-9) -> np.ndarray:
    """Vertices of a bounded polytope of dimension at most 3, by brute force.

    Every ``dim``-subset of constraints is solved as an equality system and
    the feasible solutions are kept. Lower-dimensional sets are handled
    because the same vertex may come from several subsets.
    """
    n = P.dim
    if n > 3:
        raise DimensionError("vertex enumeration is limited to dimension <= 3")
    Pn = normalize(P)
    if Pn.is_canonical_empty() or is_empty(Pn):
        return np.zeros((0, n))
    A, b = Pn.A, Pn.b
    found = []
    for rows in itertools.combinations(range(A.shape[0]), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if np.all(A @ x <= b + 1e-7):
            found.append(x)
    if not found:
        return np.zeros((0, n))
    pts = np.array(found)
    uniq = []
    for p in pts:
        if not any(np.max(np.abs(p - q)) <= max(tol, 1e-7) for q in uniq):
            uniq.append(p)
    return np.array(uniq)


def volume(P: Polytope) -> float | None:
    """Lebesgue measure for dimension <= 3, ``None`` above that."""
    if P.dim > 3:
        return None
    V = vertices(P)
    if len(V) == 0:
        return 0.0
    if P.dim == 1:
        return float(V.max() - V.min())
    from scipy.spatial import ConvexHull, QhullError

    try:
        return float(ConvexHull(V).volume)
    except (QhullError, ValueError):
        return 0.0


def hull_of_vertices(V) -> Polytope:
    """H-representation of the convex hull of points (dimension <= 3)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n = V.shape[1]
    if n == 1:
        return Polytope.box([V.min()], [V.max()])
    from scipy.spatial import ConvexHull

    hull = ConvexHull(V)
    eq = hull.equations
    return remove_redundancy(Polytope(eq[:, :-1], -eq[:, -1]))
