"""Closed-loop runs of the extracted controller against an adversarial environment.

:func:`simulate` draws one random admissible announcement sequence and
random disturbances; :func:`exhaustive_check` enumerates every environment
choice on a finite instance up to a fixed depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from . import geometry as geo
from .preview import (
    INF,
    PreviewAutomaton,
    PreviewInput,
    random_input_sequence,
    validate_input_sequence,
)
from .synthesis import SynthesisCertificate
from .systems import FiniteSwitchedSystem, SwitchedSystem

SAFE_TOL = 1e-6


class SimulationError(RuntimeError):
    pass


class BudgetExceeded(SimulationError):
    pass


@dataclass
class StepRecord:
    time: int
    mode: int
    state: object
    input: object
    preview: tuple | None
    safe: bool
    margin: float | None = None
    target: str | None = None

    def to_dict(self) -> dict:
        state = self.state.tolist() if isinstance(self.state, np.ndarray) else self.state
        u = self.input.tolist() if isinstance(self.input, np.ndarray) else self.input
        return {
            "time": self.time,
            "mode": self.mode,
            "state": state,
            "input": u,
            "preview": list(self.preview) if self.preview else None,
            "safe": self.safe,
            "margin": self.margin,
            "target": self.target,
        }


@dataclass
class RunTrace:
    steps: list[StepRecord] = field(default_factory=list)
    previews: list[PreviewInput] = field(default_factory=list)
    failure: str | None = None

    @property
    def safe(self) -> bool:
        return self.failure is None and all(s.safe for s in self.steps)

    @property
    def violations(self) -> int:
        return sum(not s.safe for s in self.steps)

    @property
    def min_margin(self) -> float | None:
        margins = [s.margin for s in self.steps if s.margin is not None]
        return min(margins) if margins else None

    @property
    def modes(self) -> list[int]:
        return [s.mode for s in self.steps]

    def events(self) -> list[dict]:
        return [s.to_dict() for s in self.steps]


def _safety(system: SwitchedSystem, S, x, tol: float) -> tuple[bool, float | None]:
    if isinstance(system, FiniteSwitchedSystem):
        return x in S, None
    margin = S.slack(x)
    return margin >= -tol, margin


class DisturbanceSampler:
    """Vertex of ``D`` with probability 0.5, otherwise uniform inside ``D``."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._cache = {}

    def _prepare(self, D):
        key = id(D)
        if key not in self._cache:
            verts = geo.vertices(D) if D.dim <= 3 else None
            lo, hi = geo.bounding_box(D)
            self._cache[key] = (D, verts, lo, hi)
        return self._cache[key]

    def sample(self, D) -> np.ndarray:
        _, verts, lo, hi = self._prepare(D)
        if verts is not None and len(verts) and self.rng.random() < 0.5:
            return verts[int(self.rng.integers(len(verts)))]
        for _ in range(1000):
            d = lo + (hi - lo) * self.rng.random(lo.size)
            if D.contains(d):
                return d
        return geo.chebyshev_center(D)[0]


def simulate(system: SwitchedSystem, G: PreviewAutomaton, cert: SynthesisCertificate, S: dict, x0, q0: int,
             horizon: int, seed=0, inputs=None, trace_writer: ctl.TraceWriter | None = None,
             safe_tol: float = SAFE_TOL) -> RunTrace:
    """One closed-loop run of ``horizon`` steps.

    ``inputs`` overrides the random announcement sequence. An infeasible
    controller state ends the run early with ``failure`` set.
    """
    rng = np.random.default_rng(seed)
    if inputs is None:
        inputs = random_input_sequence(G, q0, horizon, rng)
    inputs = [PreviewInput(*p) for p in inputs]
    check = validate_input_sequence(G, q0, inputs)
    if not check:
        raise SimulationError(f"environment produced an invalid announcement sequence: {check.detail}")
    sampler = DisturbanceSampler(rng)
    out = RunTrace(previews=inputs)
    x = x0 if isinstance(system, FiniteSwitchedSystem) else np.asarray(x0, float)
    cs = ctl.initial_state(q0)
    queue = list(inputs)

    def log(rec):
        if trace_writer is not None:
            trace_writer.write(rec)

    for t in range(horizon):
        while True:
            cs = ctl._activate(cs)
            if cs.pending is not None and cs.pending.countdown == 0:
                log({"time": t, "event": "switch", "from": cs.mode, "to": cs.pending.dest})
                cs = ctl.on_switch(cs, cs.pending.dest)
                continue
            if queue and queue[0].t == t and cs.raw_pending is None:
                p = queue.pop(0)
                log({"time": t, "event": "preview", "t": p.t, "tau": p.tau, "dest": p.dest})
                cs = ctl.receive_preview(cs, p, G)
                continue
            break
        safe, margin = _safety(system, S[cs.mode], x, safe_tol)
        preview = None if cs.raw_pending is None else tuple(cs.raw_pending)
        try:
            u, nxt, target = ctl.step(system, cert, cs, x)
        except ctl.InfeasibleStateError as exc:
            out.steps.append(StepRecord(t, cs.mode, x, None, preview, safe, margin, None))
            out.failure = f"infeasible_state at t={t}: {exc}"
            log({"time": t, "event": "failure", "detail": out.failure})
            break
        rec = StepRecord(t, cs.mode, x, u, preview, safe, margin, target.label())
        out.steps.append(rec)
        log(rec.to_dict())
        mode = system.mode(cs.mode)
        if isinstance(system, FiniteSwitchedSystem):
            succ = sorted(mode.successors(x, u), key=str)
            x = succ[int(rng.integers(len(succ)))]
        else:
            x = mode.step(x, u, sampler.sample(mode.D))
        cs = nxt
    return out


@dataclass
class ExhaustiveVerdict:
    safe: bool
    explored: int
    counterexample: list | None = None

    def __bool__(self):
        return self.safe


def exhaustive_check(system: FiniteSwitchedSystem, G: PreviewAutomaton, cert: SynthesisCertificate, S: dict,
                     depth: int, starts: dict | None = None, budget: int = 2_000_000,
                     inf_cap: int = 3) -> ExhaustiveVerdict:
    """Every announcement schedule and plant successor up to ``depth`` steps.

    ``G`` may carry preview intervals; each admissible preview time is a
    separate branch (an unbounded interval is cut at ``lo + inf_cap``).
    Starts default to every state of every winning set. A controller that
    finds no input counts as a violation.
    """
    if not isinstance(system, FiniteSwitchedSystem):
        raise SimulationError("exhaustive_check needs a finite system")
    if starts is None:
        starts = cert.winning
    seen = set()

    def key(x, cs, d):
        H = G.holding[cs.mode]
        n = cs.steps_in_mode if H == INF else min(cs.steps_in_mode, int(H))
        raw = None
        if cs.raw_pending is not None:
            raw = (cs.raw_pending.dest, cs.raw_pending.switch_time - cs.time, cs.reduced.t - cs.time)
        return (x, cs.mode, n, raw, d)

    def taus(i, j):
        lo, hi = G.preview[(i, j)]
        return range(lo, (lo + inf_cap if hi == INF else hi) + 1)

    def settle(cs):
        cs = ctl._activate(cs)
        if cs.pending is not None and cs.pending.countdown == 0:
            cs = ctl.on_switch(cs, cs.pending.dest)
        return cs

    def branches(cs):
        """Controller states after the environment's choices at the current time."""
        cs = settle(cs)
        out = [cs]
        if cs.raw_pending is None and not G.is_sink(cs.mode):
            H = G.holding[cs.mode]
            for j in G.post(cs.mode):
                for tau in taus(cs.mode, j):
                    if cs.steps_in_mode + tau < H:
                        continue
                    nxt = settle(ctl.receive_preview(cs, (cs.time, tau, j), G))
                    out.extend(branches(nxt) if nxt.mode != cs.mode else [nxt])
        return out

    def explore(x, cs, d, path):
        if d == 0:
            return None
        for b in branches(cs):
            k = key(x, b, d)
            if k in seen:
                continue
            seen.add(k)
            if len(seen) > budget:
                raise BudgetExceeded(f"more than {budget} positions explored")
            here = path + [(b.time, b.mode, x, tuple(b.raw_pending) if b.raw_pending else None)]
            if x not in S[b.mode]:
                return here
            try:
                u, nxt, _ = ctl.step(system, cert, b, x)
            except ctl.InfeasibleStateError:
                return here + ["infeasible"]
            for y in sorted(system.mode(b.mode).successors(x, u), key=str):
                bad = explore(y, nxt, d - 1, here)
                if bad is not None:
                    return bad
        return None

    for q0 in sorted(starts):
        for x0 in sorted(starts[q0], key=str):
            bad = explore(x0, ctl.initial_state(q0), depth, [])
            if bad is not None:
                return ExhaustiveVerdict(False, len(seen), bad)
    return ExhaustiveVerdict(True, len(seen))


def sample_start(system: SwitchedSystem, W, rng: np.random.Generator):
    """Random point of a winning set (uniform over states, or rejection in the box)."""
    if isinstance(system, FiniteSwitchedSystem):
        states = sorted(W, key=str)
        if not states:
            raise SimulationError("cannot sample from an empty set")
        return states[int(rng.integers(len(states)))]
    if geo.is_empty(W):
        raise SimulationError("cannot sample from an empty set")
    lo, hi = geo.bounding_box(W)
    for _ in range(10_000):
        x = lo + (hi - lo) * rng.random(lo.size)
        if W.contains(x, tol=0.0):
            return x
    return geo.chebyshev_center(W)[0]


def summarize(traces: list[RunTrace]) -> dict:
    margins = [t.min_margin for t in traces if t.min_margin is not None]
    return {
        "runs": len(traces),
        "violations": sum(t.violations for t in traces),
        "failures": sum(t.failure is not None for t in traces),
        "min_margin": min(margins) if margins else None,
    }


__all__ = [
    "RunTrace",
    "StepRecord",
    "ExhaustiveVerdict",
    "BudgetExceeded",
    "SimulationError",
    "simulate",
    "exhaustive_check",
    "sample_start",
    "summarize",
]
