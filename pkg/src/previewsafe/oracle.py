"""Brute-force ground truth for finite instances.

The preview automaton is unrolled into an explicit phase graph, the phase
graph is paired with the plant, and the safety game on the product is solved
by a greatest-fixed-point iteration over (state, phase) positions. Nothing
here reuses :mod:`previewsafe.synthesis`; the two are compared in tests.

Phase encoding
--------------
Phases describe what the environment has committed to *between* time steps:

``hold(i, c)``
    node ``i`` is active, no announcement is pending, ``c`` steps have
    elapsed since entry, saturated at ``H_i - min_j lo_ij`` (beyond that every
    announcement is admissible anyway).
``pending(i, j, l)``
    node ``i`` is active and a switch to ``j`` happens ``l >= 1`` steps after
    the next one.
``sink(i)``
    node ``i`` has no outgoing edges.

Each step the environment first picks a branch (stay quiet, or announce some
``j`` with a preview time ``tau`` that respects the holding time), the
controller then picks an input knowing that branch, and finally the plant
moves nondeterministically. A zero preview time switches the node before the
controller acts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .preview import INF, PreviewAutomaton, PreviewError


class Phase(NamedTuple):
    kind: str  # "hold" | "pending" | "sink"
    node: int
    clock: int = 0
    dest: int = 0


class Branch(NamedTuple):
    mode: int | None  # None for an immediate (zero-preview) switch
    next: Phase


@dataclass
class ExpandedAutomaton:
    phases: list[Phase]
    entry: dict[int, Phase]
    branches: dict[Phase, list[Branch]]

    def phases_of(self, node: int) -> list[Phase]:
        return [p for p in self.phases if p.node == node]


def phase_bound(G: PreviewAutomaton, i: int) -> float:
    """``H_i - min_j T_ij + sum_j T_ij`` for a reduced automaton; 1 for sinks."""
    if G.is_sink(i):
        return 1
    lows = [G.lower(i, j) for j in G.post(i)]
    return G.holding[i] - min(lows) + sum(lows)


def expand_automaton(G: PreviewAutomaton, intervals: bool = False, inf_cap: int = 4) -> ExpandedAutomaton:
    """Unroll ``G`` into its phase graph.

    With ``intervals=False`` the automaton must already have singleton
    preview times. With ``intervals=True`` every preview time in each edge
    interval is a separate environment branch; an unbounded interval is
    truncated to ``lo + inf_cap``.
    """
    if not intervals and not G.is_reduced():
        raise PreviewError("expand_automaton needs singleton preview times (pass intervals=True otherwise)")

    def taus(i, j):
        lo, hi = G.preview[(i, j)]
        hi = lo + inf_cap if hi == INF else hi
        return range(lo, hi + 1)

    entry = {}
    branches: dict[Phase, list[Branch]] = {}
    todo = []
    for q in G.nodes:
        entry[q] = Phase("sink", q) if G.is_sink(q) else Phase("hold", q, 0)
        todo.append(entry[q])

    while todo:
        p = todo.pop()
        if p in branches:
            continue
        out = []
        if p.kind == "sink":
            out.append(Branch(p.node, p))
        elif p.kind == "pending":
            nxt = entry[p.dest] if p.clock == 1 else Phase("pending", p.node, p.clock - 1, p.dest)
            out.append(Branch(p.node, nxt))
        else:
            i, c = p.node, p.clock
            H = G.holding[i]
            cap = max(0, H - min(G.preview[(i, j)][0] for j in G.post(i)))
            out.append(Branch(i, Phase("hold", i, min(c + 1, cap))))
            for j in G.post(i):
                for tau in taus(i, j):
                    if c + tau < H:
                        continue
                    if tau == 0:
                        out.append(Branch(None, entry[j]))
                    elif tau == 1:
                        out.append(Branch(i, entry[j]))
                    else:
                        out.append(Branch(i, Phase("pending", i, tau - 1, j)))
        branches[p] = out
        todo.extend(b.next for b in out if b.next not in branches)

    phases = sorted(branches, key=lambda p: (p.node, p.kind, p.dest, p.clock))
    return ExpandedAutomaton(phases, entry, branches)


def solve_product_game(plant, expanded: ExpandedAutomaton, S: dict) -> dict[int, frozenset]:
    """Per-node winning sets of the safety game on plant x phase graph.

    ``plant`` is a finite switched system; only its ``states``, ``inputs`` and
    per-mode transition tables are read.
    """
    states = list(plant.states)
    inputs = list(plant.inputs)
    table = {q: mode.transitions for q, mode in plant.modes.items()}
    safe = {q: frozenset(s) for q, s in S.items()}

    win = {(x, p): True for x in states for p in expanded.phases}

    def branch_ok(x, br: Branch) -> bool:
        if br.mode is None:
            return win[(x, br.next)]
        if x not in safe[br.mode]:
            return False
        trans = table[br.mode]
        return any(all(win[(y, br.next)] for y in trans[(x, u)]) for u in inputs)

    changed = True
    while changed:
        changed = False
        for key, ok in win.items():
            if not ok:
                continue
            x, p = key
            if not all(branch_ok(x, br) for br in expanded.branches[p]):
                win[key] = False
                changed = True

    return {
        q: frozenset(x for x in states if win[(x, phase)])
        for q, phase in expanded.entry.items()
    }


def oracle_winning_sets(plant, G: PreviewAutomaton, S: dict, intervals: bool | None = None,
                        inf_cap: int = 4) -> dict[int, frozenset]:
    """Convenience wrapper: expand then solve."""
    if intervals is None:
        intervals = not G.is_reduced()
    return solve_product_game(plant, expand_automaton(G, intervals, inf_cap), S)


__all__ = [
    "Phase",
    "Branch",
    "ExpandedAutomaton",
    "phase_bound",
    "expand_automaton",
    "solve_product_game",
    "oracle_winning_sets",
]
