"""Preview automata: admissible switching signals and their announcements.

A preview automaton has one node per mode, directed edges for the allowed
switches, a preview-time interval on each edge (how many steps before the
switch it is announced) and a least holding time on each node. Sink nodes
have no outgoing edges and an infinite holding time.

Holding time semantics used throughout the package: after entering a node at
time ``s`` the next switch happens at some time ``s' >= s + H``. That is the
reading under which the ``InvPre`` recursion in :mod:`previewsafe.synthesis`
is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

INF = math.inf
SAMPLING_CAP = 16


class PreviewError(ValueError):
    pass


def _as_bound(value):
    if value is None:
        return INF
    if isinstance(value, float) and math.isinf(value):
        return INF
    return int(value)


class PreviewAutomaton:
    """Nodes ``1..s``, edges with preview intervals, per-node holding times.

    Parameters
    ----------
    nodes : iterable of int
    preview : mapping ``(i, j) -> (lo, hi)``
        Preview-time interval of each edge. ``hi`` may be ``math.inf``.
    holding : mapping ``i -> H``
        Least holding time; ``math.inf`` for sinks. Missing entries default to
        ``inf``.
    """

    def __init__(self, nodes: Iterable[int], preview: Mapping, holding: Mapping):
        self.nodes = tuple(sorted(int(q) for q in nodes))
        self.preview = {
            (int(i), int(j)): (_as_bound(lo), _as_bound(hi)) for (i, j), (lo, hi) in preview.items()
        }
        self.holding = {q: INF for q in self.nodes}
        for q, h in holding.items():
            self.holding[int(q)] = _as_bound(h)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.preview)

    def post(self, i: int) -> list[int]:
        return sorted(j for (a, j) in self.preview if a == i)

    def is_sink(self, i: int) -> bool:
        return not self.post(i)

    @property
    def sinks(self) -> list[int]:
        return [q for q in self.nodes if self.is_sink(q)]

    @property
    def non_sinks(self) -> list[int]:
        return [q for q in self.nodes if not self.is_sink(q)]

    def lower(self, i: int, j: int) -> int:
        return self.preview[(i, j)][0]

    def t_min(self, i: int) -> int:
        return min(self.lower(i, j) for j in self.post(i))

    def is_reduced(self) -> bool:
        return all(lo == hi for lo, hi in self.preview.values())

    def __eq__(self, other):
        if not isinstance(other, PreviewAutomaton):
            return NotImplemented
        return (self.nodes, self.preview, self.holding) == (other.nodes, other.preview, other.holding)

    def __repr__(self):
        return f"PreviewAutomaton(nodes={list(self.nodes)}, edges={self.edges})"

    # -- JSON --------------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> PreviewAutomaton:
        nodes = data["nodes"]
        nodes = range(1, int(nodes) + 1) if isinstance(nodes, int) else nodes
        preview = {}
        for e in data.get("edges", []):
            lo, hi = e["preview"] if isinstance(e["preview"], (list, tuple)) else (e["preview"],) * 2
            key = (int(e["from"]), int(e["to"]))
            if key in preview:
                raise PreviewError(f"duplicate edge {key}")
            preview[key] = (lo, hi)
        return cls(nodes, preview, data.get("holding", {}))

    def to_dict(self) -> dict:
        enc = lambda v: None if v == INF else int(v)  # noqa: E731
        return {
            "nodes": len(self.nodes) if self.nodes == tuple(range(1, len(self.nodes) + 1)) else list(self.nodes),
            "edges": [
                {"from": i, "to": j, "preview": [enc(lo), enc(hi)]} for (i, j), (lo, hi) in sorted(self.preview.items())
            ],
            "holding": {str(q): enc(h) for q, h in self.holding.items()},
        }


@dataclass(frozen=True)
class Violation:
    rule: str
    where: object
    message: str

    def __str__(self):
        return f"[{self.rule}] {self.where}: {self.message}"


def validate_automaton(G: PreviewAutomaton) -> list[Violation]:
    """Structural checks; an empty list means the automaton is well formed."""
    out = []
    node_set = set(G.nodes)
    for q, h in G.holding.items():
        if q not in node_set:
            out.append(Violation("unknown_node", q, "holding time given for a node that does not exist"))
    for (i, j), (lo, hi) in sorted(G.preview.items()):
        if i not in node_set or j not in node_set:
            out.append(Violation("unknown_node", (i, j), "edge endpoint is not a node"))
        if i == j:
            out.append(Violation("self_loop", (i, j), "self-loops are not allowed"))
        if lo == INF:
            out.append(Violation("preview_interval", (i, j), "lower preview bound must be finite"))
        elif not (0 <= lo <= hi):
            out.append(Violation("preview_interval", (i, j), f"need 0 <= lo <= hi, got [{lo}, {hi}]"))
    for q in G.nodes:
        h = G.holding.get(q, INF)
        if G.is_sink(q):
            if h != INF:
                out.append(Violation("sink_holding", q, f"sink node must have infinite holding time, got {h}"))
            continue
        if h == INF:
            out.append(Violation("holding_finite", q, "non-sink node must have a finite holding time"))
            continue
        if h < 1:
            out.append(Violation("holding_positive", q, f"holding time must be >= 1, got {h}"))
        lows = [G.preview[(q, j)][0] for j in G.post(q)]
        if all(lo != INF for lo in lows) and h < min(lows):
            out.append(
                Violation("holding_vs_preview", q, f"holding time {h} is below the least preview time {min(lows)}")
            )
    return out


class PreviewInput(NamedTuple):
    """Announcement at time ``t`` that the mode switches to ``dest`` at ``t + tau``."""

    t: int
    tau: int
    dest: int

    @property
    def switch_time(self) -> int:
        return self.t + self.tau


@dataclass(frozen=True)
class SequenceCheck:
    valid: bool
    index: int | None = None
    clause: int | None = None
    detail: str = ""

    def __bool__(self):
        return self.valid


def validate_input_sequence(G: PreviewAutomaton, q0: int, seq) -> SequenceCheck:
    """Check the three admissibility clauses for every input, in order.

    (1) announcements are non-negative and never precede the previous switch;
    (2) the switch follows an edge and its preview time lies in the edge interval;
    (3) consecutive switches are at least the holding time of the node apart.
    Indices in the result are 1-based, matching the input numbering.
    """
    if q0 not in G.nodes:
        return SequenceCheck(False, 0, None, f"initial node {q0} is not in the automaton")
    prev_switch, prev_node = 0, q0
    for k, raw in enumerate(seq, start=1):
        p = PreviewInput(*raw)
        if p.tau < 0 or prev_switch > p.t:
            return SequenceCheck(
                False, k, 1, f"preview at t={p.t} (tau={p.tau}) precedes the previous switch at {prev_switch}"
            )
        if (prev_node, p.dest) not in G.preview:
            return SequenceCheck(False, k, 2, f"no edge ({prev_node}, {p.dest})")
        lo, hi = G.preview[(prev_node, p.dest)]
        if not lo <= p.tau <= hi:
            return SequenceCheck(False, k, 2, f"tau={p.tau} outside [{lo}, {hi}] on edge ({prev_node}, {p.dest})")
        dwell = p.switch_time - prev_switch
        if dwell < G.holding[prev_node]:
            return SequenceCheck(
                False, k, 3, f"switch after {dwell} steps in node {prev_node}, holding time is {G.holding[prev_node]}"
            )
        prev_switch, prev_node = p.switch_time, p.dest
    return SequenceCheck(True)


class Segment(NamedTuple):
    start: int
    end: float  # inclusive; inf for the final segment
    node: int


def execution_of(G: PreviewAutomaton, q0: int, seq) -> list[Segment]:
    check = validate_input_sequence(G, q0, seq)
    if not check:
        raise PreviewError(f"invalid preview input #{check.index} (clause {check.clause}): {check.detail}")
    seq = [PreviewInput(*p) for p in seq]
    starts = [0] + [p.switch_time for p in seq]
    nodes = [q0] + [p.dest for p in seq]
    ends = [s - 1 for s in starts[1:]] + [INF]
    segments = [Segment(s, e, q) for s, e, q in zip(starts, ends, nodes)]
    for a, b in zip(segments, segments[1:]):
        assert a.end + 1 == b.start and a.start <= a.end
    return segments


def node_at(execution: list[Segment], t: int) -> int:
    for seg in execution:
        if seg.start <= t <= seg.end:
            return seg.node
    raise PreviewError(f"time {t} is not covered by the execution")


def reduce_to_lower_bounds(G: PreviewAutomaton) -> PreviewAutomaton:
    """Copy of ``G`` with each preview interval collapsed to its lower bound."""
    return PreviewAutomaton(G.nodes, {e: (lo, lo) for e, (lo, _) in G.preview.items()}, G.holding)


def infer_reduced_input(G: PreviewAutomaton, p: PreviewInput, source: int) -> PreviewInput:
    """Delay an announcement so that it carries exactly the least preview time.

    The switch time is unchanged: ``(t, tau, j) -> (t + tau - lo, lo, j)``.
    """
    p = PreviewInput(*p)
    key = (source, p.dest)
    if key not in G.preview:
        raise PreviewError(f"no edge {key}")
    lo, hi = G.preview[key]
    if not lo <= p.tau <= hi:
        raise PreviewError(f"tau={p.tau} outside [{lo}, {hi}] on edge {key}")
    return PreviewInput(p.t + p.tau - lo, lo, p.dest)


def random_input_sequence(G: PreviewAutomaton, q0: int, horizon: int, seed) -> list[PreviewInput]:
    """Sample an admissible announcement sequence whose switches reach ``horizon``.

    Destinations are uniform over successors, preview times uniform over the
    edge interval (capped at ``lo + SAMPLING_CAP`` when unbounded) and dwell
    times uniform between the least admissible dwell and twice that plus one.
    """
    rng = np.random.default_rng(seed)
    seq = []
    node, entry = q0, 0
    while entry < horizon and not G.is_sink(node):
        succ = G.post(node)
        dest = succ[int(rng.integers(len(succ)))]
        lo, hi = G.preview[(node, dest)]
        hi = lo + SAMPLING_CAP if hi == INF else hi
        tau = int(rng.integers(lo, hi + 1))
        least = max(int(G.holding[node]), tau)
        switch = entry + least + int(rng.integers(0, least + 2))
        seq.append(PreviewInput(switch - tau, tau, dest))
        node, entry = dest, switch
    return seq
