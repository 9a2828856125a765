"""Runtime safety controller extracted from a synthesis certificate.

The controller keeps only a few counters: the active mode, how many steps
ago it was entered, and the pending announcement if any. Each step it picks
a target set from the certificate and returns an input that drives every
successor into that set.

Target selection for a node with holding time ``H`` and least preview time
``T_min``, after ``n`` steps in the node:

* announcement active, switch to ``d`` in ``l >= 1`` steps: ``reach[d][l - 1]``,
  so the state lands in ``W_d`` exactly when the switch happens;
* otherwise: ``hold[max(T_min, H - n - 1)]``.

Worked trace (``H = 3``, ``T_min = 1``): enter at ``n = 0`` inside
``hold[3] = W``, aim for ``hold[2]``, then ``hold[1]``, then stay in
``hold[1]`` until an announcement arrives.

Announcements with a preview time above the edge's lower bound are held back
and activated once their switch is exactly ``lo`` steps away, so the
controller only ever sees the reduced automaton.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import geometry as geo
from .geometry import Polytope
from .preview import PreviewAutomaton, PreviewError, PreviewInput, infer_reduced_input
from .synthesis import SynthesisCertificate
from .systems import AffineSwitchedSystem, FiniteSwitchedSystem, SwitchedSystem

RELAXED_TOL = 1e-6


class ControllerError(RuntimeError):
    pass


class InfeasibleStateError(ControllerError):
    """No input keeps the state in the target set."""

    code = "infeasible_state"


class SwitchError(ControllerError):
    """The environment switched in a way the automaton does not allow."""


class Pending(NamedTuple):
    dest: int
    countdown: int


@dataclass(frozen=True)
class ControllerState:
    mode: int
    steps_in_mode: int = 0
    pending: Pending | None = None
    raw_pending: PreviewInput | None = None
    reduced: PreviewInput | None = None
    time: int = 0

    def __post_init__(self):
        if self.pending is not None and self.pending.countdown < 0:
            raise ControllerError(f"negative countdown {self.pending.countdown}")


class TargetSet(NamedTuple):
    kind: str  # "hold" | "reach"
    index: int
    dest: int | None = None

    def label(self) -> str:
        return f"hold[{self.index}]" if self.kind == "hold" else f"reach[{self.dest}][{self.index}]"


def initial_state(mode: int, time: int = 0) -> ControllerState:
    return ControllerState(mode, 0, None, None, None, time)


def _activate(cs: ControllerState) -> ControllerState:
    if cs.reduced is not None and cs.pending is None and cs.time >= cs.reduced.t:
        return replace(cs, pending=Pending(cs.reduced.dest, cs.reduced.switch_time - cs.time))
    return cs


def target_for(cert: SynthesisCertificate, cs: ControllerState) -> TargetSet:
    cs = _activate(cs)
    node = cert[cs.mode]
    if cs.pending is not None:
        if cs.pending.countdown < 1:
            raise ControllerError(f"switch to {cs.pending.dest} is due; call on_switch first")
        return TargetSet("reach", cs.pending.countdown - 1, cs.pending.dest)
    return TargetSet("hold", node.hold_index(cs.steps_in_mode + 1))


def target_set(cert: SynthesisCertificate, target: TargetSet, mode: int):
    node = cert[mode]
    if target.kind == "hold":
        return node.hold[target.index]
    return node.reach[target.dest][target.index]


def current_set(cert: SynthesisCertificate, cs: ControllerState):
    """Set the state is guaranteed to lie in right now, if the run is winning."""
    cs = _activate(cs)
    node = cert[cs.mode]
    if cs.pending is not None:
        return node.reach[cs.pending.dest][cs.pending.countdown]
    return node.hold[node.hold_index(cs.steps_in_mode)]


def _tightened(system: AffineSwitchedSystem, mode: int, V, relax: float, cache: dict):
    """Normalized ``V`` with disturbance tightening, ``relax`` added to each row; cached per set."""
    key = (mode, id(V), relax)
    hit = cache.get(key)
    if hit is None or hit[0] is not V:
        Vn = geo.normalize(V)
        if Vn.is_canonical_empty() or geo.is_empty(Vn):
            hit = (V, None, None)
        else:
            md = system.mode(mode)
            b = Vn.b - md.tightening(Vn) + relax * np.maximum(1.0, np.abs(Vn.b))
            hit = (V, Vn.A, b)
        cache[key] = hit
    return hit[1], hit[2]


def choose_input(system: SwitchedSystem, mode: int, x, V, cache: dict | None = None):
    """Deterministic input driving every successor of ``x`` into ``V``.

    Finite systems take the first admissible input in declaration order;
    affine systems take the Chebyshev center of the admissible input
    polytope, retrying once with the target relaxed by ``RELAXED_TOL``.
    """
    if isinstance(system, FiniteSwitchedSystem):
        ok = system.admissible_inputs(mode, x, V)
        if not ok:
            raise InfeasibleStateError(f"no input keeps {x!r} in the target set under mode {mode}")
        return ok[0]
    if isinstance(system, AffineSwitchedSystem):
        cache = {} if cache is None else cache
        md = system.mode(mode)
        x = np.asarray(x, float).ravel()
        for relax in (0.0, RELAXED_TOL):
            A, b = _tightened(system, mode, V, relax, cache)
            if A is None:
                break
            P = Polytope(np.vstack([A @ md.B, system.U.A]),
                         np.concatenate([b - A @ (md.A @ x + md.K), system.U.b]))
            try:
                u, _ = geo.chebyshev_center(P)
            except geo.GeometryError:
                continue
            return u
        raise InfeasibleStateError(f"no input keeps x={x.tolist()} in the target set under mode {mode}")
    raise ControllerError(f"unsupported backend {type(system).__name__}")


def step(system: SwitchedSystem, cert: SynthesisCertificate, cs: ControllerState, x):
    """Input for state ``x`` and the controller state after this step.

    Returns ``(u, next_state, target)``.
    """
    if cs.mode not in cert.nodes:
        raise ControllerError(f"unknown mode {cs.mode}")
    cs = _activate(cs)
    target = target_for(cert, cs)
    u = choose_input(system, cs.mode, x, target_set(cert, target, cs.mode), cert.cache)
    pending = None if cs.pending is None else Pending(cs.pending.dest, cs.pending.countdown - 1)
    nxt = replace(cs, steps_in_mode=cs.steps_in_mode + 1, pending=pending, time=cs.time + 1)
    return u, nxt, target


def receive_preview(cs: ControllerState, p, G: PreviewAutomaton) -> ControllerState:
    """Register an announcement from the environment at time ``cs.time``.

    ``G`` is the original automaton, whose intervals are used to check ``p``.
    """
    p = PreviewInput(*p)
    if p.t != cs.time:
        raise PreviewError(f"announcement stamped t={p.t} received at t={cs.time}")
    if cs.raw_pending is not None:
        raise PreviewError(f"announcement at t={p.t} while the switch to {cs.raw_pending.dest} is still pending")
    if p.switch_time - (cs.time - cs.steps_in_mode) < G.holding[cs.mode]:
        raise PreviewError(
            f"switch at t={p.switch_time} violates holding time {G.holding[cs.mode]} of node {cs.mode}"
        )
    reduced = infer_reduced_input(G, p, cs.mode)
    return _activate(replace(cs, raw_pending=p, reduced=reduced))


def on_switch(cs: ControllerState, new_mode: int) -> ControllerState:
    """The environment switched to ``new_mode`` at time ``cs.time``."""
    cs = _activate(cs)
    if cs.pending is None or cs.pending.dest != new_mode or cs.pending.countdown != 0:
        raise SwitchError(f"switch to {new_mode} at t={cs.time} does not match pending announcement {cs.pending}")
    return ControllerState(new_mode, 0, None, None, None, cs.time)


class TraceWriter:
    """JSON-lines log: one object per controller step plus preview and switch events."""

    def __init__(self, fh):
        self.fh = fh

    def write(self, record: dict):
        self.fh.write(json.dumps(record, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (set, frozenset)):
        return sorted(v, key=str)
    raise TypeError(f"cannot serialise {type(v).__name__}")
