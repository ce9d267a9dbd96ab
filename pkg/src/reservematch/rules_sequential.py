"""Sequential category updating over a precedence order.

Three interchangeable implementations of the same rule:

* ``flow``: the reference form; every candidate fix is a feasibility check
  on the full three-layer network with accumulating lower bounds.
* ``compact``: the same checks on the grouped network; fixed agents are
  removed from the network (group, group-edge, category and class-target
  bounds all shrink by one).
* ``bipartite``: maintains an explicit matching and certifies each candidate
  by an alternating-structure search (cycle through the vacated category,
  equal-class category endpoints, or an unmatched-agent entry paired with a
  drop).

All three return the identical matching; the fixed set equals the matched
set on termination, which is asserted every run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .bipartite import (
    AlternatingPath,
    EligibilityGraph,
    GraphMatching,
    START_UNMATCHED,
    build_graph,
    forward_reach,
    maximum_matching,
    send_reach,
)
from .model import (
    AnySystem,
    Matching,
    SequentialReserveSystem,
    as_sequential,
)
from .netflow import (
    OPEN_CLASS,
    PREF_CLASS,
    build_compact_network,
    build_reserve_network,
    feasible_flow,
    flow_to_matching,
    max_flow,
)

TraceSink = Callable[[dict], None]

IMPLEMENTATIONS = ("flow", "compact", "bipartite")


def dual_maximum_matching(system: AnySystem) -> tuple[GraphMatching, int, int]:
    """A matching that is simultaneously maximum-cardinality and maximum in
    preferential-category assignments: match the preferential subgraph to its
    maximum first, then augment in the full graph (augmentation preserves all
    per-category loads except the endpoint gain)."""
    seq = as_sequential(system)
    graph = build_graph(seq.base)
    category_mask = [seq.is_beneficial(c) for c in range(seq.num_categories)]
    stage1 = maximum_matching(graph, category_mask=category_mask)
    b = stage1.size()
    match = maximum_matching(graph, seed=stage1)
    m = match.size()
    assert _beneficiary_load(match, seq) == b
    return match, b, m


def _beneficiary_load(match: GraphMatching, seq: SequentialReserveSystem) -> int:
    return sum(match.load[c] for c in seq.preferential)


def scu_feasibility_check(
    system: AnySystem,
    fixed: Sequence[tuple[int, int]],
    agent: int,
    category: int,
    b: Optional[int] = None,
    m: Optional[int] = None,
) -> bool:
    """Does some matching fix every pair in ``fixed``, assign ``agent`` to
    ``category``, and keep both maxima? Decided exactly by a feasibility pass
    on the reserve network with unit lower bounds on the pinned edges and
    class-total lower bounds b and m-b."""
    seq = as_sequential(system)
    if not seq.base.is_eligible(agent, category):
        raise ValueError(f"agent {agent} is not eligible for category {category}")
    if any(agent == a for a, _ in fixed):
        raise ValueError(f"agent {agent} is already fixed")
    if b is None or m is None:
        _, b, m = dual_maximum_matching(seq)
    rn = build_reserve_network(seq)
    net = rn.network
    for a, c in fixed:
        net.set_lower(rn.assign_edge[(a, c)], 1)
    net.set_lower(rn.assign_edge[(agent, category)], 1)
    net.set_lower(rn.class_edge[PREF_CLASS], b)
    net.set_lower(rn.class_edge[OPEN_CLASS], m - b)
    return feasible_flow(net) is not None


def scu_allocate(
    system: AnySystem,
    impl: str = "compact",
    trace_sink: Optional[TraceSink] = None,
) -> Matching:
    """Run the sequential rule; basic instances are coerced to an empty
    preferential set and a single tier."""
    seq = as_sequential(system)
    if impl == "flow":
        return _scu_flow(seq, trace_sink)
    if impl == "compact":
        return _scu_compact(seq, trace_sink)
    if impl == "bipartite":
        return _scu_bipartite(seq, trace_sink)
    raise ValueError(f"unknown implementation {impl!r}; expected one of {IMPLEMENTATIONS}")


def _emit(
    sink: Optional[TraceSink],
    event: str,
    *,
    seq: SequentialReserveSystem,
    fixed: Sequence[tuple[int, int]],
    processed: Sequence[int],
    **extra,
) -> None:
    if sink is None:
        return
    record = {
        "event": event,
        "fixed": [[a, c] for a, c in fixed],
        "processed_categories": sorted(processed),
    }
    record.update(extra)
    sink(record)


# ---------------------------------------------------------------------------
# Reference flow implementation


def _scu_flow(seq: SequentialReserveSystem, sink: Optional[TraceSink]) -> Matching:
    rn = build_reserve_network(seq)
    net = rn.network
    open_edge = rn.class_edge[OPEN_CLASS]
    pref_edge = rn.class_edge[PREF_CLASS]
    total_capacity = sum(seq.capacities)

    net.set_upper(open_edge, 0)
    b = max_flow(net).total
    net.set_upper(open_edge, total_capacity)
    net.set_lower(pref_edge, b)
    m = max_flow(net).total
    net.set_lower(open_edge, m - b)

    fixed: list[tuple[int, int]] = []
    in_x: set[int] = set()
    fixed_count = [0] * seq.num_categories
    processed: list[int] = []
    _emit(sink, "init", seq=seq, fixed=fixed, processed=processed, b=b, m=m)
    for c in seq.precedence.strict_sequence():
        for agent in seq.base.eligible_agents(c):
            if agent in in_x:
                continue
            if fixed_count[c] == seq.capacities[c]:
                break
            edge = rn.assign_edge[(agent, c)]
            net.set_lower(edge, 1)
            if feasible_flow(net) is not None:
                fixed.append((agent, c))
                in_x.add(agent)
                fixed_count[c] += 1
                _emit(sink, "fixed", seq=seq, fixed=fixed, processed=processed,
                      agent=agent, category=c)
            else:
                net.set_lower(edge, 0)
        processed.append(c)
    final = feasible_flow(net)
    assert final is not None
    matching = flow_to_matching(rn, final)
    assert set(matching.matched_agents()) == in_x, "fixed set must equal matched set"
    assert matching.matched_count() == m
    assert matching.beneficiary_count(seq.preferential) == b
    _emit(sink, "done", seq=seq, fixed=fixed, processed=processed)
    return matching


# ---------------------------------------------------------------------------
# Compact flow implementation


def _scu_compact(seq: SequentialReserveSystem, sink: Optional[TraceSink]) -> Matching:
    cn = build_compact_network(seq)
    net = cn.network
    open_edge = cn.class_edge[OPEN_CLASS]
    pref_edge = cn.class_edge[PREF_CLASS]
    total_capacity = sum(seq.capacities)

    net.set_upper(open_edge, 0)
    b = max_flow(net).total
    net.set_upper(open_edge, total_capacity)
    net.set_lower(pref_edge, b)
    m = max_flow(net).total

    need_pref, need_open = b, m - b
    net.set_lower(pref_edge, need_pref)
    net.set_lower(open_edge, need_open)

    ledger: list[tuple[int, int]] = []
    in_x: set[int] = set()
    fixed_count = [0] * seq.num_categories
    processed: list[int] = []
    _emit(sink, "init", seq=seq, fixed=ledger, processed=processed, b=b, m=m)
    for c in seq.precedence.strict_sequence():
        for agent in seq.base.eligible_agents(c):
            if agent in in_x:
                continue
            if fixed_count[c] == seq.capacities[c]:
                break
            k = cn.group_of[agent]
            edge = cn.assign_edge[(k, c)]
            if net.upper[edge] < 1:
                continue
            net.set_lower(edge, 1)
            feasible = feasible_flow(net) is not None
            net.set_lower(edge, 0)
            if feasible:
                ledger.append((agent, c))
                in_x.add(agent)
                fixed_count[c] += 1
                # remove the fixed unit from the remaining network
                net.set_upper(cn.group_edge[k], net.upper[cn.group_edge[k]] - 1)
                net.set_upper(edge, net.upper[edge] - 1)
                net.set_upper(cn.category_edge[c], net.upper[cn.category_edge[c]] - 1)
                if seq.is_beneficial(c):
                    need_pref -= 1
                    net.set_lower(pref_edge, need_pref)
                else:
                    need_open -= 1
                    net.set_lower(open_edge, need_open)
                _emit(sink, "fixed", seq=seq, fixed=ledger, processed=processed,
                      agent=agent, category=c)
        processed.append(c)
    final = feasible_flow(net)
    assert final is not None
    matching = flow_to_matching(cn, final, ledger)
    assert matching.matched_count() == m, "fixed set must equal matched set"
    assert matching.beneficiary_count(seq.preferential) == b
    _emit(sink, "done", seq=seq, fixed=ledger, processed=processed)
    return matching


# ---------------------------------------------------------------------------
# Bipartite implementation


@dataclass
class SCUState:
    """Working state: fixed agents in insertion order, processed categories,
    the evolving matching, and the two maxima."""

    graph: EligibilityGraph
    mu: GraphMatching
    b: int
    m: int
    X: list[tuple[int, int]] = field(default_factory=list)
    in_x: set[int] = field(default_factory=set)
    Y: set[int] = field(default_factory=set)
    fixed_count: dict[int, int] = field(default_factory=dict)

    def fix(self, agent: int, category: int) -> None:
        self.X.append((agent, category))
        self.in_x.add(agent)
        self.fixed_count[category] = self.fixed_count.get(category, 0) + 1


def scu_state_init(system: AnySystem) -> SCUState:
    seq = as_sequential(system)
    mu, b, m = dual_maximum_matching(seq)
    return SCUState(graph=build_graph(seq.base), mu=mu, b=b, m=m)


FIXED = "fixed"
NO_CHANGE = "no-change"


def scu_bipartite_step(
    system: AnySystem, state: SCUState, agent: int, category: int
) -> str:
    """One candidate evaluation while ``category`` is being processed.

    Case 1: already matched there -> fix. Case 2: unmatched -> replace the
    lowest-priority occupant. Case 3: matched elsewhere -> apply a
    rebalancing alternating structure when one exists.
    """
    seq = as_sequential(system)
    graph, mu = state.graph, state.mu
    cur = mu.assignment[agent]
    if cur == category:
        state.fix(agent, category)
        _check_state(seq, state)
        return FIXED
    if cur is None:
        if seq.capacities[category] == 0:
            return NO_CHANGE
        assert mu.load[category] == seq.capacities[category], (
            "an unmatched eligible agent next to a slack category contradicts "
            "maximum cardinality"
        )
        lowest = max(
            mu.members[category], key=lambda a: seq.base.position(category, a)
        )
        if seq.base.position(category, agent) < seq.base.position(category, lowest):
            assert lowest not in state.in_x
            mu.unassign(lowest)
            mu.assign(agent, category)
            state.fix(agent, category)
            _check_state(seq, state)
            return FIXED
        return NO_CHANGE
    moves = _case3_plan(seq, state, agent, category)
    if moves is None:
        return NO_CHANGE
    for mover, target in moves:
        if target is None:
            mu.unassign(mover)
        else:
            mu.assign(mover, target)
    state.fix(agent, category)
    _check_state(seq, state)
    return FIXED


def _path_moves(path: AlternatingPath) -> list[tuple[int, Optional[int]]]:
    nodes = path.nodes
    offset = 0 if path.start_kind == START_UNMATCHED else 1
    return [(nodes[p], nodes[p + 1]) for p in range(offset, len(nodes) - 1, 2)]


def _case3_plan(
    seq: SequentialReserveSystem, state: SCUState, agent: int, c: int
) -> Optional[list[tuple[int, Optional[int]]]]:
    """Certificate search for matching ``agent`` (currently elsewhere) to c.

    Any valid alternative matching differs from the current one by a single
    alternating component through the forced move, so it is one of: the bare
    move (same class, room); a shed chain from c into a vacancy of the vacated
    category's class (the vacated slot itself closes a cycle); a refill chain
    into the vacated category from an equal-class loser; both chains with
    equal-class far endpoints; or an unmatched-agent refill paired with a
    dropped occupant.
    """
    graph, mu = state.graph, state.mu
    caps = seq.capacities
    cls = [1 if seq.is_beneficial(d) else 0 for d in range(seq.num_categories)]
    cur = mu.assignment[agent]
    assert cur is not None and cur != c
    if caps[c] == 0:
        return None
    room = mu.load[c] < caps[c]
    forced: list[tuple[int, Optional[int]]] = [(agent, c)]
    if room and cls[c] == cls[cur]:
        return forced

    frozen_a = state.in_x | {agent}
    frozen_c = set(state.Y)
    fwd = forward_reach(graph, mu, c, frozen_a, frozen_c, no_expand=frozenset({cur}))

    def forward_path_moves(target: int) -> list[tuple[int, Optional[int]]]:
        moves: list[tuple[int, Optional[int]]] = []
        node = target
        while node != c:
            prev, mover = fwd.parent[node]
            moves.append((mover, node))
            node = prev
        moves.reverse()
        return moves

    # shed chain ending in the vacated category's class (cycle closes at cur)
    if cur in fwd.entered:
        return forced + forward_path_moves(cur)
    for target in sorted(fwd.entered):
        if target == cur:
            continue
        if mu.load[target] < caps[target] and cls[target] == cls[cur]:
            return forced + forward_path_moves(target)

    send = send_reach(graph, mu, cur, frozen_a, frozen_c | {c})

    def send_path_moves(origin: int) -> list[tuple[int, Optional[int]]]:
        moves: list[tuple[int, Optional[int]]] = []
        node = origin
        while node != cur:
            nxt, mover = send.parent[node]
            moves.append((mover, nxt))
            node = nxt
        return moves

    # refill chain into the vacated slot from an equal-class loser
    if room:
        for origin in sorted(send.senders):
            if cls[origin] == cls[c]:
                return forced + send_path_moves(origin)

    # both chains, far endpoints of equal class
    for klass in (0, 1):
        target = next(
            (
                t
                for t in sorted(fwd.entered)
                if t != cur and cls[t] == klass and mu.load[t] < caps[t]
            ),
            None,
        )
        origin = next(
            (o for o in sorted(send.senders) if cls[o] == klass), None
        )
        if target is not None and origin is not None:
            return forced + forward_path_moves(target) + send_path_moves(origin)

    # unmatched-agent refill paired with a dropped occupant
    refill: Optional[list[tuple[int, Optional[int]]]] = None
    for w in range(graph.num_agents):
        if w in frozen_a or mu.assignment[w] is not None:
            continue
        for e in graph.agent_adj[w]:
            if e == cur:
                refill = [(w, cur)]
                break
            if e in send.senders:
                refill = [(w, e)] + send_path_moves(e)
                break
        if refill is not None:
            break
    if refill is not None:
        droppable = [x for x in mu.members[c] if x not in state.in_x]
        if droppable:
            victim = max(droppable, key=lambda x: seq.base.position(c, x))
            return forced + [(victim, None)] + refill
        if room:
            for other in range(seq.num_categories):
                if other in (c, cur) or other in frozen_c or cls[other] != cls[c]:
                    continue
                candidates = [x for x in mu.members[other] if x not in frozen_a]
                if candidates:
                    victim = max(
                        candidates, key=lambda x: seq.base.position(other, x)
                    )
                    return forced + [(victim, None)] + refill
    return None


def _check_state(seq: SequentialReserveSystem, state: SCUState) -> None:
    mu = state.mu
    for c, cap in enumerate(seq.capacities):
        assert mu.load[c] <= cap, f"category {c} over capacity"
    assert mu.size() == state.m, "cardinality must stay maximal"
    assert _beneficiary_load(mu, seq) == state.b, "beneficiary count must stay maximal"
    for a, c in state.X:
        assert mu.assignment[a] == c, f"fixed agent {a} moved"


def _scu_bipartite(seq: SequentialReserveSystem, sink: Optional[TraceSink]) -> Matching:
    state = scu_state_init(seq)
    processed: list[int] = []
    _emit(sink, "init", seq=seq, fixed=state.X, processed=processed,
          b=state.b, m=state.m, matching=list(state.mu.assignment))
    for c in seq.precedence.strict_sequence():
        for agent in seq.base.eligible_agents(c):
            if agent in state.in_x:
                continue
            if state.fixed_count.get(c, 0) == seq.capacities[c]:
                break
            action = scu_bipartite_step(seq, state, agent, c)
            if action == FIXED:
                _emit(sink, "fixed", seq=seq, fixed=state.X, processed=processed,
                      agent=agent, category=c,
                      matching=list(state.mu.assignment))
        state.Y.add(c)
        processed.append(c)
    matching = state.mu.to_matching()
    assert set(matching.matched_agents()) == state.in_x, (
        "fixed set must equal matched set"
    )
    assert matching.matched_count() == state.m
    assert matching.beneficiary_count(seq.preferential) == state.b
    _emit(sink, "done", seq=seq, fixed=state.X, processed=processed,
          matching=list(state.mu.assignment))
    return matching
