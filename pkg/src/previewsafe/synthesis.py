"""Maximal winning sets under preview: the ``InvPre`` operator and ``ConInv``.

``con_inv`` collapses every preview interval to its lower bound (which does
not change the winning sets), computes plain invariant sets for sink nodes,
then sweeps the non-sink nodes in ascending order applying ``inv_pre`` until
no set shrinks any more. Every intermediate set of the final sweep is kept in
a :class:`SynthesisCertificate`, which is all the runtime controller needs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .preview import (
    PreviewAutomaton,
    PreviewError,
    reduce_to_lower_bounds,
    validate_automaton,
)
from .systems import FixpointOptions, FixpointStatus, InvariantViolation, SwitchedSystem


class SynthesisError(ValueError):
    pass


@dataclass
class NodeCertificate:
    """Intermediate sets of one node.

    ``reach[j][l]`` holds the states from which ``W_j`` can be reached in
    exactly ``l`` steps while staying safe in this node, so ``reach[j][0]`` is
    ``W_j``. ``hold[k]`` for ``k = t_min .. holding`` are the sets the state
    must occupy while no announcement is pending; ``hold[holding]`` is the
    node's winning set. Sink nodes carry ``hold = {0: W}`` and no ``reach``.
    """

    node: int
    holding: float
    t_min: int
    preview: dict[int, int] = field(default_factory=dict)
    reach: dict[int, list] = field(default_factory=dict)
    hold: dict[int, object] = field(default_factory=dict)

    @property
    def is_sink(self) -> bool:
        return self.holding == math.inf

    @property
    def winning(self):
        return self.hold[0] if self.is_sink else self.hold[int(self.holding)]

    def hold_index(self, steps_in_mode: int) -> int:
        """Index of the set the state must be in after ``steps_in_mode`` steps."""
        if self.is_sink:
            return 0
        return max(self.t_min, int(self.holding) - steps_in_mode)


@dataclass
class SynthesisCertificate:
    automaton: PreviewAutomaton
    nodes: dict[int, NodeCertificate]
    cache: dict = field(default_factory=dict, repr=False, compare=False)  # controller scratch space

    def __getitem__(self, node: int) -> NodeCertificate:
        return self.nodes[node]

    @property
    def winning(self) -> dict:
        return {q: c.winning for q, c in self.nodes.items()}


@dataclass
class WinningSet:
    W: dict
    status: FixpointStatus
    iterations: int
    trace: list = field(default_factory=list)  # (sweep, node, changed)
    elapsed: float = 0.0

    @property
    def certified(self) -> bool:
        return self.status == FixpointStatus.CONVERGED

    def __getitem__(self, node):
        return self.W[node]


@dataclass
class InvPreResult:
    set: object
    certificate: NodeCertificate
    status: FixpointStatus


def inv_pre(system: SwitchedSystem, G_hat: PreviewAutomaton, i: int, W: dict, S: dict,
            opts: FixpointOptions | None = None) -> InvPreResult:
    """One ``InvPre`` evaluation for non-sink node ``i`` of a reduced automaton."""
    opts = opts or FixpointOptions()
    if not G_hat.is_reduced():
        raise SynthesisError("inv_pre needs singleton preview times; reduce the automaton first")
    if G_hat.is_sink(i):
        raise SynthesisError(f"node {i} is a sink; its winning set is a plain invariant set")
    S_i = S[i]
    post = G_hat.post(i)
    T = {j: G_hat.lower(i, j) for j in post}

    reach = {}
    for j in post:
        chain = [W[j]]
        for _ in range(T[j]):
            chain.append(system.pre_int(i, chain[-1], S_i))
        reach[j] = chain

    t_min = min(T.values())
    # zero-preview chains are not inside S_i yet, so the core is clipped to it
    core = S_i
    for j in post:
        core = system.intersect(core, reach[j][T[j]])
    inner = system.inv(i, core, opts)
    hold = {t_min: inner.set}

    H = int(G_hat.holding[i])
    for k in range(t_min + 1, H + 1):
        C = system.pre_int(i, hold[k - 1], S_i)
        for j in post:
            if T[j] >= k:
                C = system.intersect(C, reach[j][T[j]])
        hold[k] = C

    result = hold[H]
    if opts.check_monotone and not system.is_subset(result, S_i, opts.tol):
        raise InvariantViolation(f"InvPre of node {i} left its safe set")
    cert = NodeCertificate(i, H, t_min, T, reach, hold)
    return InvPreResult(result, cert, inner.status)


def con_inv(system: SwitchedSystem, G: PreviewAutomaton, S: dict,
            opts: FixpointOptions | None = None,
            max_sweeps: int | None = None) -> tuple[WinningSet, SynthesisCertificate]:
    """Maximal winning set of ``system`` under preview automaton ``G``.

    Returns the sets with a status; ``iteration_capped`` means some inner
    invariant-set computation or the outer sweep loop hit its cap, in which
    case the sets are over-approximations and must not be trusted.
    """
    opts = opts or FixpointOptions()
    problems = validate_automaton(G)
    if problems:
        raise PreviewError("; ".join(map(str, problems)))
    missing = [q for q in G.nodes if q not in S]
    if missing:
        raise SynthesisError(f"no safe set for nodes {missing}")
    unknown = [q for q in G.nodes if q not in system.modes]
    if unknown:
        raise SynthesisError(f"automaton nodes {unknown} have no matching mode")
    max_sweeps = opts.max_iters if max_sweeps is None else max_sweeps

    started = time.perf_counter()
    G_hat = reduce_to_lower_bounds(G)
    W = {q: S[q] for q in G.nodes}
    certs = {}
    status = FixpointStatus.CONVERGED

    for q in G_hat.sinks:
        res = system.inv(q, S[q], opts)
        W[q] = res.set
        certs[q] = NodeCertificate(q, math.inf, 0, hold={0: res.set})
        if res.status != FixpointStatus.CONVERGED:
            status = FixpointStatus.CAPPED

    trace = []
    sweeps = 0
    non_sinks = G_hat.non_sinks
    while True:
        if sweeps >= max_sweeps:
            status = FixpointStatus.CAPPED
            break
        previous = dict(W)
        for q in non_sinks:
            res = inv_pre(system, G_hat, q, W, S, opts)
            if res.status != FixpointStatus.CONVERGED:
                status = FixpointStatus.CAPPED
            if opts.check_monotone and not system.is_subset(res.set, W[q], opts.tol):
                raise InvariantViolation(f"winning-set iterate of node {q} grew in sweep {sweeps}")
            changed = not system.is_subset(previous[q], res.set, opts.tol)
            trace.append((sweeps, q, changed))
            W[q] = res.set
            certs[q] = res.certificate
        sweeps += 1
        if not any(changed for k, _, changed in trace if k == sweeps - 1):
            break

    result = WinningSet(W, status, sweeps, trace, time.perf_counter() - started)
    return result, SynthesisCertificate(G_hat, certs)


def verify_fixed_point(system: SwitchedSystem, G: PreviewAutomaton, S: dict, W: dict,
                       opts: FixpointOptions | None = None) -> list[int]:
    """Nodes whose set does not satisfy its fixed-point equation.

    Non-sink ``i`` needs ``W_i = InvPre_i(W)``; sink ``j`` needs
    ``W_j = Inv_j(S_j)``.
    """
    opts = opts or FixpointOptions()
    G_hat = reduce_to_lower_bounds(G)
    bad = []
    for q in G_hat.nodes:
        if G_hat.is_sink(q):
            expected = system.inv(q, S[q], opts).set
        else:
            expected = inv_pre(system, G_hat, q, W, S, opts).set
        if not system.equals(expected, W[q], opts.tol * 10):
            bad.append(q)
    return bad


def max_controlled_invariant(system: SwitchedSystem, S_hull, opts: FixpointOptions | None = None):
    """Preview-agnostic baseline: invariant set of the mode-merged system."""
    merged = system.merged()
    return merged.inv(merged.mode_ids[0], S_hull, opts)


def common_safe_set(system: SwitchedSystem, S: dict):
    out = system.universe()
    for q in sorted(S):
        out = system.intersect(out, S[q])
    return out
