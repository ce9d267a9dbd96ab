"""Allocation rules for basic instances: deferred acceptance, reverse
rejecting, and maximum-matching adjustment.

All three are deterministic given their inputs; scan orders are ascending
index unless an explicit order override is supplied.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

from .bipartite import EligibilityGraph, GraphMatching, build_graph, maximum_matching
from .model import InstanceError, Matching, ReserveSystem


class PrefsNotEligible(ValueError):
    """A preference list names a category the agent is not eligible for."""


class NotMaximumSeed(ValueError):
    """The supplied initial matching is not maximum-cardinality."""


# ---------------------------------------------------------------------------
# Deferred acceptance


def default_preferences(system: ReserveSystem) -> tuple[tuple[int, ...], ...]:
    """Ascending category index over each agent's eligible set."""
    return tuple(system.agent_categories(a) for a in range(system.num_agents))


def _validate_preferences(
    system: ReserveSystem, prefs: Sequence[Sequence[int]]
) -> tuple[tuple[int, ...], ...]:
    if len(prefs) != system.num_agents:
        raise InstanceError(
            f"expected {system.num_agents} preference lists, got {len(prefs)}"
        )
    out = []
    for a, lst in enumerate(prefs):
        eligible = set(system.agent_categories(a))
        for c in lst:
            if c not in eligible:
                raise PrefsNotEligible(
                    f"agent {a} lists category {c} but is not eligible for it"
                )
        if len(set(lst)) != len(lst) or set(lst) != eligible:
            raise InstanceError(
                f"agent {a}'s preference list is not a permutation of their "
                f"eligible categories"
            )
        out.append(tuple(lst))
    return tuple(out)


def da_allocate(
    system: ReserveSystem, prefs: Optional[Sequence[Sequence[int]]] = None
) -> Matching:
    """Deferred acceptance: unmatched agents propose down their preference
    lists; each category re-selects its tentative holders plus the round's
    applicants by priority up to capacity."""
    if prefs is None:
        ranked = default_preferences(system)
    else:
        ranked = _validate_preferences(system, prefs)
    held: list[Optional[int]] = [None] * system.num_agents
    pointer = [0] * system.num_agents

    while True:
        proposals: dict[int, list[int]] = {}
        for a in range(system.num_agents):
            if held[a] is None and pointer[a] < len(ranked[a]):
                proposals.setdefault(ranked[a][pointer[a]], []).append(a)
        if not proposals:
            break
        for c in sorted(proposals):
            pool = [a for a in range(system.num_agents) if held[a] == c]
            pool.extend(proposals[c])
            pool.sort(key=lambda a: system.position(c, a))
            keep = set(pool[: system.capacities[c]])
            for a in pool:
                if a in keep:
                    held[a] = c
                else:
                    held[a] = None
                    pointer[a] += 1
    return Matching(tuple(held))


# ---------------------------------------------------------------------------
# Reverse rejecting


def _validate_permutation(order: Sequence[int], size: int, what: str) -> tuple[int, ...]:
    if sorted(order) != list(range(size)):
        raise InstanceError(f"{what} must be a permutation of 0..{size - 1}")
    return tuple(order)


class _ThresholdGraph:
    """Eligibility graph with per-category priority thresholds and removed
    agents; supports journaled augmentation with rollback."""

    def __init__(self, system: ReserveSystem, graph: EligibilityGraph):
        self.system = system
        self.graph = graph
        self.removed = [False] * system.num_agents
        self.thresh = [
            system.priorities[c].eligible_cutoff for c in range(system.num_categories)
        ]
        self.tight: dict[int, int] = {}
        self.banned: Optional[int] = None

    def active(self, agent: int, c: int) -> bool:
        if self.removed[agent] or agent == self.banned:
            return False
        pos = self.system.position(c, agent)
        limit = self.thresh[c]
        if c in self.tight:
            limit = min(limit, self.tight[c])
        return pos < limit

    def begin_check(self, agent: int) -> None:
        self.banned = agent
        self.tight = {
            c: self.system.position(c, agent)
            for c in self.system.agent_categories(agent)
        }

    def commit_check(self) -> None:
        assert self.banned is not None
        self.removed[self.banned] = True
        for c, pos in self.tight.items():
            self.thresh[c] = min(self.thresh[c], pos)
        self.banned = None
        self.tight = {}

    def abort_check(self) -> None:
        self.banned = None
        self.tight = {}


def _augment_once(
    tg: _ThresholdGraph, match: GraphMatching, journal: list[tuple[int, Optional[int]]]
) -> bool:
    """One multi-source augmenting-path search over all free agents."""
    graph = tg.graph
    free = [
        a
        for a in range(graph.num_agents)
        if match.assignment[a] is None and not tg.removed[a] and a != tg.banned
    ]
    visited = set(free)
    parent: dict[int, tuple[int, int]] = {}
    queue = deque(free)
    while queue:
        a = queue.popleft()
        for c in graph.agent_adj[a]:
            if not tg.active(a, c):
                continue
            if match.load[c] < graph.capacities[c]:
                cur, target = a, c
                while True:
                    journal.append((cur, match.assignment[cur]))
                    match.assign(cur, target)
                    if cur in parent:
                        prev, shared = parent[cur]
                        cur, target = prev, shared
                    else:
                        return True
            for b in sorted(match.members[c]):
                if b not in visited:
                    visited.add(b)
                    parent[b] = (a, c)
                    queue.append(b)
    return False


def rev_allocate(system: ReserveSystem, baseline: Sequence[int]) -> Matching:
    """Reverse rejecting: walk the baseline order backwards, rejecting each
    agent whose removal (together with all strictly lower-priority edges in
    the categories they are eligible for) keeps a maximum matching of the
    original size; return a maximum matching of the surviving graph."""
    order = _validate_permutation(baseline, system.num_agents, "baseline")
    graph = build_graph(system)
    match = maximum_matching(graph)
    m = match.size()
    tg = _ThresholdGraph(system, graph)

    for agent in reversed(order):
        tg.begin_check(agent)
        journal: list[tuple[int, Optional[int]]] = []
        if match.assignment[agent] is not None:
            journal.append((agent, match.assignment[agent]))
            match.unassign(agent)
        for c in list(tg.tight):
            pos = tg.tight[c]
            for b in sorted(match.members[c]):
                if system.position(c, b) > pos:
                    journal.append((b, c))
                    match.unassign(b)
        recovered = True
        while match.size() < m:
            if not _augment_once(tg, match, journal):
                recovered = False
                break
        if recovered:
            tg.commit_check()
        else:
            tg.abort_check()
            for agent_id, old in reversed(journal):
                if old is None:
                    match.unassign(agent_id)
                else:
                    match.assign(agent_id, old)

    # Deterministic final pass from scratch on the surviving graph.
    agent_adj = []
    for a in range(system.num_agents):
        if tg.removed[a]:
            agent_adj.append(())
        else:
            agent_adj.append(
                tuple(c for c in graph.agent_adj[a] if system.position(c, a) < tg.thresh[c])
            )
    category_adj: list[list[int]] = [[] for _ in range(system.num_categories)]
    for a, adj in enumerate(agent_adj):
        for c in adj:
            category_adj[c].append(a)
    final_graph = EligibilityGraph(
        tuple(agent_adj),
        tuple(tuple(adj) for adj in category_adj),
        graph.capacities,
    )
    final = maximum_matching(final_graph)
    assert final.size() == m
    return final.to_matching()


# ---------------------------------------------------------------------------
# Maximum matching adjustment


DISPLACED = "displaced"
SKIPPED = "skipped"
ACCEPTED = "accepted"


@dataclass(frozen=True)
class TraceEntry:
    agent: int
    category: int
    outcome: str
    displaced: Optional[int] = None


@dataclass(frozen=True)
class MMATrace:
    """Proposal log sufficient to replay the adjustment phase exactly."""

    initial: Matching
    log: tuple[TraceEntry, ...]

    def replay(self, num_categories: int) -> Matching:
        match = GraphMatching.from_matching(self.initial, num_categories)
        for entry in self.log:
            if entry.outcome == DISPLACED:
                assert match.assignment[entry.displaced] == entry.category
                match.unassign(entry.displaced)
                match.assign(entry.agent, entry.category)
            elif entry.outcome == ACCEPTED:
                match.assign(entry.agent, entry.category)
        return match.to_matching()


def mma_allocate(
    system: ReserveSystem,
    initial: Optional[GraphMatching] = None,
    agent_order: Optional[Sequence[int]] = None,
    category_order: Optional[Sequence[int]] = None,
) -> tuple[Matching, MMATrace]:
    """Maximum matching adjustment: start from a maximum matching, then let
    unmatched agents displace the lowest-priority occupant of any eligible
    category that ranks them higher. Each (agent, category) pair is checked
    at most once; a displaced agent re-enters the proposal pool.
    """
    graph = build_graph(system)
    if initial is None:
        match = maximum_matching(graph)
    else:
        match = initial.copy()
        best = maximum_matching(graph, seed=match)
        if best.size() != match.size():
            raise NotMaximumSeed(
                f"seed has {match.size()} matched agents, maximum is {best.size()}"
            )
    initial_matching = match.to_matching()

    if agent_order is None:
        agent_rank = list(range(system.num_agents))
    else:
        order = _validate_permutation(agent_order, system.num_agents, "agent order")
        agent_rank = [0] * system.num_agents
        for rank, a in enumerate(order):
            agent_rank[a] = rank
    if category_order is None:
        cat_rank = list(range(system.num_categories))
    else:
        order = _validate_permutation(
            category_order, system.num_categories, "category order"
        )
        cat_rank = [0] * system.num_categories
        for rank, c in enumerate(order):
            cat_rank[c] = rank
    cats_of = [
        sorted(system.agent_categories(a), key=lambda c: (cat_rank[c], c))
        for a in range(system.num_agents)
    ]

    considered: list[set[int]] = [set() for _ in range(system.num_agents)]
    log: list[TraceEntry] = []
    pool = [
        (agent_rank[a], a)
        for a in range(system.num_agents)
        if match.assignment[a] is None
    ]
    heapq.heapify(pool)
    while pool:
        _, agent = heapq.heappop(pool)
        if match.assignment[agent] is not None:
            continue  # stale entry
        for c in cats_of[agent]:
            if c in considered[agent]:
                continue
            considered[agent].add(c)
            if match.load[c] < graph.capacities[c]:
                # unreachable from a maximum seed; kept for trace completeness
                match.assign(agent, c)
                log.append(TraceEntry(agent, c, ACCEPTED))
                break
            if not match.members[c]:
                continue  # zero-capacity category
            lowest = max(match.members[c], key=lambda b: system.position(c, b))
            if system.position(c, agent) < system.position(c, lowest):
                match.unassign(lowest)
                match.assign(agent, c)
                log.append(TraceEntry(agent, c, DISPLACED, lowest))
                heapq.heappush(pool, (agent_rank[lowest], lowest))
                break
            log.append(TraceEntry(agent, c, SKIPPED))
    return match.to_matching(), MMATrace(initial_matching, tuple(log))
