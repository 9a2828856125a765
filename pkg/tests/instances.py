"""Random finite instances and the bundled toy problem, shared by tests."""

import random

from previewsafe.preview import INF, PreviewAutomaton
from previewsafe.systems import FiniteMode, FiniteSwitchedSystem


def toy_system():
    """Two-mode, three-state plant: mode 1 keeps s1, mode 2 keeps s2."""
    f1 = FiniteMode.from_table({
        "s1": {"u1": ["s1"], "u2": ["s2"]},
        "s2": {"u1": ["s3"], "u2": ["s3"]},
        "s3": {"u1": ["s3"], "u2": ["s3"]},
    })
    f2 = FiniteMode.from_table({
        "s1": {"u1": ["s3"], "u2": ["s3"]},
        "s2": {"u1": ["s2"], "u2": ["s1"]},
        "s3": {"u1": ["s3"], "u2": ["s3"]},
    })
    return FiniteSwitchedSystem(["s1", "s2", "s3"], ["u1", "u2"], {1: f1, 2: f2})


def toy_automaton(tau=1, holding=3):
    return PreviewAutomaton([1, 2], {(1, 2): (tau, tau), (2, 1): (tau, tau)}, {1: holding, 2: holding})


TOY_SAFE = {1: frozenset({"s1", "s2"}), 2: frozenset({"s1", "s2"})}


def random_finite_instance(rng: random.Random, *, max_states=8, max_modes=3, max_inputs=2,
                           max_holding=4, max_tau=3, interval_width=0, with_inf=False):
    """A random plant, automaton and safety specification.

    Transition tables favour self-loops and mostly deterministic moves so that
    winning sets are frequently nonempty and depend on the preview structure.
    """
    n = rng.randint(2, max_states)
    s = rng.randint(1, max_modes)
    m = rng.randint(1, max_inputs)
    states = [f"x{k}" for k in range(n)]
    inputs = [f"u{k}" for k in range(m)]
    modes = {}
    for q in range(1, s + 1):
        table = {}
        for x in states:
            for u in inputs:
                r = rng.random()
                if r < 0.35:
                    table[(x, u)] = frozenset([x])
                else:
                    table[(x, u)] = frozenset(rng.sample(states, 1 if r < 0.8 or n < 2 else 2))
        modes[q] = FiniteMode(table)
    plant = FiniteSwitchedSystem(states, inputs, modes)

    preview = {}
    for i in range(1, s + 1):
        if s > 1 and rng.random() < 0.75:
            targets = [j for j in range(1, s + 1) if j != i]
            for j in rng.sample(targets, rng.randint(1, len(targets))):
                lo = rng.randint(0, max_tau)
                hi = lo + rng.randint(0, interval_width)
                preview[(i, j)] = (lo, hi)
    if with_inf and preview:
        e = rng.choice(sorted(preview))
        preview[e] = (preview[e][0], INF)
    holding = {}
    for i in range(1, s + 1):
        lows = [lo for (a, _), (lo, _) in preview.items() if a == i]
        if lows:
            holding[i] = rng.randint(max(1, min(lows)), max(max_holding, min(lows)))
        else:
            holding[i] = INF
    G = PreviewAutomaton(range(1, s + 1), preview, holding)
    safe = {q: frozenset(rng.sample(states, rng.randint(1, n))) for q in range(1, s + 1)}
    return plant, G, safe
