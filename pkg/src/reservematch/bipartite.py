"""Eligibility graphs, maximum-cardinality matching, and alternating paths.

The matching side generalizes Hopcroft-Karp to categories with multi-unit
capacity (no node duplication; categories carry loads). All searches scan
adjacency in ascending index order so results are deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .model import Matching, ReserveSystem

_INF = float("inf")


class InvalidSeed(ValueError):
    """Seed matching violates capacities or eligibility."""


class PathInconsistent(ValueError):
    """Alternating path does not fit the matching it is applied to."""


@dataclass(frozen=True)
class EligibilityGraph:
    """Bipartite agent-category graph with per-category capacities.

    Adjacency lists are sorted ascending by index; an edge (i, c) exists iff
    agent i is eligible for category c.
    """

    agent_adj: tuple[tuple[int, ...], ...]
    category_adj: tuple[tuple[int, ...], ...]
    capacities: tuple[int, ...]

    @property
    def num_agents(self) -> int:
        return len(self.agent_adj)

    @property
    def num_categories(self) -> int:
        return len(self.category_adj)

    def num_edges(self) -> int:
        return sum(len(adj) for adj in self.agent_adj)

    def has_edge(self, agent: int, c: int) -> bool:
        return c in self.agent_adj[agent]


def build_graph(system: ReserveSystem) -> EligibilityGraph:
    agent_adj: list[list[int]] = [[] for _ in range(system.num_agents)]
    category_adj: list[list[int]] = [[] for _ in range(system.num_categories)]
    for c in range(system.num_categories):
        for agent in system.eligible_agents(c):
            agent_adj[agent].append(c)
            category_adj[c].append(agent)
    return EligibilityGraph(
        agent_adj=tuple(tuple(sorted(adj)) for adj in agent_adj),
        category_adj=tuple(tuple(sorted(adj)) for adj in category_adj),
        capacities=system.capacities,
    )


class GraphMatching:
    """Mutable working matching over an eligibility graph."""

    __slots__ = ("assignment", "load", "members")

    def __init__(self, num_agents: int, num_categories: int):
        self.assignment: list[Optional[int]] = [None] * num_agents
        self.load: list[int] = [0] * num_categories
        self.members: list[set[int]] = [set() for _ in range(num_categories)]

    def copy(self) -> "GraphMatching":
        other = GraphMatching(len(self.assignment), len(self.load))
        other.assignment = list(self.assignment)
        other.load = list(self.load)
        other.members = [set(m) for m in self.members]
        return other

    def assign(self, agent: int, c: int) -> None:
        old = self.assignment[agent]
        if old is not None:
            self.load[old] -= 1
            self.members[old].discard(agent)
        self.assignment[agent] = c
        self.load[c] += 1
        self.members[c].add(agent)

    def unassign(self, agent: int) -> None:
        old = self.assignment[agent]
        if old is not None:
            self.load[old] -= 1
            self.members[old].discard(agent)
            self.assignment[agent] = None

    def size(self) -> int:
        return sum(1 for c in self.assignment if c is not None)

    def to_matching(self) -> Matching:
        return Matching(tuple(self.assignment))

    @classmethod
    def from_matching(cls, matching: Matching, num_categories: int) -> "GraphMatching":
        gm = cls(len(matching.assignment), num_categories)
        for agent, c in enumerate(matching.assignment):
            if c is not None:
                gm.assign(agent, c)
        return gm

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GraphMatching) and self.assignment == other.assignment

    def __repr__(self) -> str:
        pairs = {a: c for a, c in enumerate(self.assignment) if c is not None}
        return f"GraphMatching({pairs})"


def _validate_seed(graph: EligibilityGraph, seed: GraphMatching) -> None:
    for agent, c in enumerate(seed.assignment):
        if c is None:
            continue
        if not graph.has_edge(agent, c):
            raise InvalidSeed(f"seed matches agent {agent} to ineligible category {c}")
    for c, load in enumerate(seed.load):
        if load > graph.capacities[c]:
            raise InvalidSeed(
                f"seed overfills category {c}: {load} > {graph.capacities[c]}"
            )


def maximum_matching(
    graph: EligibilityGraph,
    seed: Optional[GraphMatching] = None,
    agent_mask: Optional[Sequence[bool]] = None,
    category_mask: Optional[Sequence[bool]] = None,
) -> GraphMatching:
    """Maximum-cardinality matching via Hopcroft-Karp with category loads.

    Augments the seed when one is given: matched agents never become
    unmatched, only reassigned along augmenting paths. Masks restrict the
    search to a subgraph (used for the preferential-side initial matching).
    """
    if seed is not None:
        _validate_seed(graph, seed)
        match = seed.copy()
    else:
        match = GraphMatching(graph.num_agents, graph.num_categories)

    def agent_ok(a: int) -> bool:
        return agent_mask is None or agent_mask[a]

    def cat_ok(c: int) -> bool:
        return category_mask is None or category_mask[c]

    n = graph.num_agents
    dist: list[float] = [0.0] * n

    def bfs() -> bool:
        queue: deque[int] = deque()
        for a in range(n):
            if agent_ok(a) and match.assignment[a] is None:
                dist[a] = 0
                queue.append(a)
            else:
                dist[a] = _INF
        frontier = _INF
        while queue:
            a = queue.popleft()
            if dist[a] >= frontier:
                continue
            for c in graph.agent_adj[a]:
                if not cat_ok(c):
                    continue
                if match.load[c] < graph.capacities[c]:
                    if frontier == _INF:
                        frontier = dist[a] + 1
                else:
                    for b in sorted(match.members[c]):
                        if dist[b] == _INF:
                            dist[b] = dist[a] + 1
                            queue.append(b)
        return frontier != _INF

    def dfs(a: int) -> bool:
        for c in graph.agent_adj[a]:
            if not cat_ok(c):
                continue
            if match.load[c] < graph.capacities[c]:
                match.assign(a, c)
                return True
            for b in sorted(match.members[c]):
                if dist[b] == dist[a] + 1 and dfs(b):
                    match.assign(a, c)
                    return True
        dist[a] = _INF
        return False

    while bfs():
        for a in range(n):
            if agent_ok(a) and match.assignment[a] is None:
                dfs(a)
    return match


# ---------------------------------------------------------------------------
# Alternating paths

START_LOSES = "loses"  # start category sheds one unit along the path
END_VACANCY = "vacancy"  # end category absorbs one unit into a free slot
START_UNMATCHED = "unmatched"  # path starts at an unmatched agent
END_TERMINAL = "terminal"  # end category was explicitly requested


@dataclass(frozen=True)
class AlternatingPath:
    """A unit shift along matched/eligible edges.

    ``nodes`` alternates category, agent, category, ... Each agent in the
    sequence is currently matched to the category on its left and moves to
    the category on its right. A path whose first node is an agent starts
    with an unmatched agent entering the second node.
    """

    nodes: tuple[int, ...]
    start_kind: str
    end_kind: str

    def agents(self) -> tuple[int, ...]:
        offset = 1 if self.start_kind != START_UNMATCHED else 0
        return self.nodes[offset::2]

    def categories(self) -> tuple[int, ...]:
        offset = 0 if self.start_kind != START_UNMATCHED else 1
        return self.nodes[offset::2]


def apply_path(
    match: GraphMatching,
    path: AlternatingPath,
    graph: Optional[EligibilityGraph] = None,
) -> GraphMatching:
    """Symmetric-difference update: each path agent flips between its two
    adjacent categories (or between its single adjacent category and being
    unmatched, at an agent endpoint). Applying the same path twice returns
    the original matching. With a graph, eligibility and capacities of the
    result are verified."""
    result = match.copy()
    nodes = path.nodes
    start = 0 if path.start_kind == START_UNMATCHED else 1
    for pos in range(start, len(nodes), 2):
        agent = nodes[pos]
        left = nodes[pos - 1] if pos > 0 else None
        right = nodes[pos + 1] if pos + 1 < len(nodes) else None
        current = match.assignment[agent]
        if right is not None and current == right:
            target = left
        elif left is not None and current == left:
            target = right
        elif current is None and (left is None or right is None):
            target = right if left is None else left
        else:
            raise PathInconsistent(
                f"agent {agent} is matched to {current}, not to a path-adjacent "
                f"category"
            )
        if target is None:
            result.unassign(agent)
        else:
            if graph is not None and not graph.has_edge(agent, target):
                raise PathInconsistent(
                    f"agent {agent} is not eligible for category {target}"
                )
            result.assign(agent, target)
    if graph is not None:
        for c, load in enumerate(result.load):
            if load > graph.capacities[c]:
                raise PathInconsistent(f"category {c} over capacity after update")
    return result


def find_alternating_path(
    graph: EligibilityGraph,
    match: GraphMatching,
    start: Optional[int] = None,
    end: Optional[int] = None,
    frozen_agents: Iterable[int] = (),
    frozen_categories: Iterable[int] = (),
    end_classes: Optional[Sequence[int]] = None,
    required_end_class: Optional[int] = None,
    from_unmatched: bool = False,
) -> Optional[AlternatingPath]:
    """Search for a unit-shift path, exhaustively over the reachable structure.

    * ``start=c``: the path sheds one unit from c and ends at a category with
      a free slot (or exactly at ``end`` when given, regardless of room; the
      caller owns that context, e.g. a slot about to be vacated).
    * ``end=c`` with ``from_unmatched``: the path starts at an unmatched
      agent and pushes one unit into c.
    * ``end=c`` alone: the path sheds from some other category into c.

    Frozen agents/categories never appear inside the path. ``end_classes``
    with ``required_end_class`` filters the free endpoint by class.
    """
    frozen_a = set(frozen_agents)
    frozen_c = set(frozen_categories)

    if start is not None:
        reach = forward_reach(graph, match, start, frozen_a, frozen_c)
        if end is not None:
            if end in reach.entered:
                return _build_forward_path(reach, start, end, END_TERMINAL)
            return None
        for c in sorted(reach.entered):
            if match.load[c] >= graph.capacities[c]:
                continue
            if required_end_class is not None and end_classes is not None:
                if end_classes[c] != required_end_class:
                    continue
            return _build_forward_path(reach, start, c, END_VACANCY)
        return None

    if end is None:
        raise ValueError("either start or end must be given")

    send = send_reach(graph, match, end, frozen_a, frozen_c)
    if from_unmatched:
        for w in range(graph.num_agents):
            if w in frozen_a or match.assignment[w] is not None:
                continue
            for e in graph.agent_adj[w]:
                if e == end:
                    return AlternatingPath((w, end), START_UNMATCHED, END_TERMINAL)
                if e in send.senders:
                    tail = _build_send_path(send, e, end)
                    return AlternatingPath((w,) + tail, START_UNMATCHED, END_TERMINAL)
        return None

    for origin in sorted(send.senders):
        if required_end_class is not None and end_classes is not None:
            if end_classes[origin] != required_end_class:
                continue
        return AlternatingPath(
            _build_send_path(send, origin, end), START_LOSES, END_TERMINAL
        )
    return None


@dataclass
class ForwardReach:
    entered: set[int]
    parent: dict[int, tuple[int, int]]  # category -> (previous category, agent moved)


def forward_reach(
    graph: EligibilityGraph,
    match: GraphMatching,
    start: int,
    frozen_agents: set[int],
    frozen_categories: set[int],
    no_expand: frozenset[int] = frozenset(),
) -> ForwardReach:
    """Categories reachable by shifting units away from ``start``.

    Each step moves one currently-matched, non-frozen agent from the frontier
    category to another category it is eligible for. Passing through a full
    category is legal (its load change cancels); only the endpoint needs
    room, which the caller checks. ``no_expand`` categories may be entered
    but are never shifted out of again.
    """
    entered: set[int] = set()
    parent: dict[int, tuple[int, int]] = {}
    queue: deque[int] = deque([start])
    expanded = {start}
    while queue:
        d = queue.popleft()
        for x in sorted(match.members[d]):
            if x in frozen_agents:
                continue
            for e in graph.agent_adj[x]:
                if e == d or e == start or e in frozen_categories:
                    continue
                if e not in entered:
                    entered.add(e)
                    parent[e] = (d, x)
                    if e not in expanded and e not in no_expand:
                        expanded.add(e)
                        queue.append(e)
    return ForwardReach(entered, parent)


def _build_forward_path(
    reach: ForwardReach, start: int, target: int, end_kind: str
) -> AlternatingPath:
    nodes: list[int] = [target]
    c = target
    while c != start:
        d, x = reach.parent[c]
        nodes.append(x)
        nodes.append(d)
        c = d
    nodes.reverse()
    return AlternatingPath(tuple(nodes), START_LOSES, end_kind)


@dataclass
class SendReach:
    senders: set[int]
    parent: dict[int, tuple[int, int]]  # category -> (next category, agent moved)


def send_reach(
    graph: EligibilityGraph,
    match: GraphMatching,
    end: int,
    frozen_agents: set[int],
    frozen_categories: set[int],
) -> SendReach:
    """Categories that can push one unit into ``end`` through chained moves."""
    senders: set[int] = set()
    parent: dict[int, tuple[int, int]] = {}
    queue: deque[int] = deque([end])
    seen = {end}
    while queue:
        e = queue.popleft()
        for c in range(graph.num_categories):
            if c in seen or c in frozen_categories:
                continue
            mover = None
            for y in sorted(match.members[c]):
                if y in frozen_agents:
                    continue
                if graph.has_edge(y, e):
                    mover = y
                    break
            if mover is not None:
                senders.add(c)
                parent[c] = (e, mover)
                seen.add(c)
                queue.append(c)
    return SendReach(senders, parent)


def _build_send_path(send: SendReach, origin: int, end: int) -> tuple[int, ...]:
    nodes: list[int] = [origin]
    c = origin
    while c != end:
        e, y = send.parent[c]
        nodes.append(y)
        nodes.append(e)
        c = e
    return tuple(nodes)
