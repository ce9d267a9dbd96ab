"""Directed flow networks with per-edge lower and upper bounds.

Provides max-flow (Dinic), feasibility under lower bounds via the standard
circulation transformation (subtract lower bounds, add an excess/deficit
supernode pair, saturate), and the three-layer reserve networks: one node
per agent, or the compact variant with one node per group of agents sharing
an eligibility set. All flows are integral; augmentation order is fixed by
edge id, so results are deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .model import Matching, SequentialReserveSystem


class Infeasible(ValueError):
    """No flow satisfies the lower bounds."""


class DecodeAmbiguity(ValueError):
    """Compact flow carries units not pinned by the assignment ledger."""


@dataclass(frozen=True)
class Flow:
    """Integral per-edge flow values plus the total leaving the source."""

    values: tuple[int, ...]
    total: int


class BoundedFlowNetwork:
    """Edge list with mutable bounds; solved by fresh single-use passes."""

    __slots__ = ("num_nodes", "source", "sink", "names", "src", "dst", "lower", "upper")

    def __init__(
        self,
        num_nodes: int,
        source: int,
        sink: int,
        names: Optional[list[str]] = None,
    ):
        self.num_nodes = num_nodes
        self.source = source
        self.sink = sink
        self.names = names or [str(v) for v in range(num_nodes)]
        self.src: list[int] = []
        self.dst: list[int] = []
        self.lower: list[int] = []
        self.upper: list[int] = []

    def add_edge(self, u: int, v: int, lower: int = 0, upper: int = 0) -> int:
        if lower < 0 or upper < lower:
            raise ValueError(f"bad bounds ({lower}, {upper}) on edge {u}->{v}")
        self.src.append(u)
        self.dst.append(v)
        self.lower.append(lower)
        self.upper.append(upper)
        return len(self.src) - 1

    def num_edges(self) -> int:
        return len(self.src)

    def set_lower(self, edge_id: int, value: int) -> None:
        self.lower[edge_id] = value

    def set_upper(self, edge_id: int, value: int) -> None:
        self.upper[edge_id] = value

    def to_dot(self) -> str:
        """Graphviz export; edges labeled with their (lower, upper) pair."""
        lines = ["digraph flow {", "  rankdir=LR;"]
        for v in range(self.num_nodes):
            lines.append(f'  n{v} [label="{self.names[v]}"];')
        for e in range(self.num_edges()):
            lines.append(
                f'  n{self.src[e]} -> n{self.dst[e]} '
                f'[label="({self.lower[e]}, {self.upper[e]})"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


class _Dinic:
    """Plain max-flow core on non-negative capacities."""

    def __init__(self, num_nodes: int):
        self.n = num_nodes
        self.to: list[int] = []
        self.cap: list[int] = []
        self.adj: list[list[int]] = [[] for _ in range(num_nodes)]

    def add(self, u: int, v: int, cap: int) -> int:
        arc = len(self.to)
        self.to.append(v)
        self.cap.append(cap)
        self.adj[u].append(arc)
        self.to.append(u)
        self.cap.append(0)
        self.adj[v].append(arc + 1)
        return arc

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        while True:
            level = [-1] * self.n
            level[s] = 0
            queue: deque[int] = deque([s])
            while queue:
                u = queue.popleft()
                for arc in self.adj[u]:
                    v = self.to[arc]
                    if self.cap[arc] > 0 and level[v] < 0:
                        level[v] = level[u] + 1
                        queue.append(v)
            if level[t] < 0:
                return flow
            it = [0] * self.n

            def dfs(u: int, limit: int) -> int:
                if u == t:
                    return limit
                while it[u] < len(self.adj[u]):
                    arc = self.adj[u][it[u]]
                    v = self.to[arc]
                    if self.cap[arc] > 0 and level[v] == level[u] + 1:
                        pushed = dfs(v, min(limit, self.cap[arc]))
                        if pushed > 0:
                            self.cap[arc] -= pushed
                            self.cap[arc ^ 1] += pushed
                            return pushed
                    it[u] += 1
                return 0

            while True:
                pushed = dfs(s, 1 << 60)
                if pushed == 0:
                    break
                flow += pushed

    def flow_on(self, arc: int, original_cap: int) -> int:
        return original_cap - self.cap[arc]


def _verify(network: BoundedFlowNetwork, values: list[int]) -> None:
    balance = [0] * network.num_nodes
    for e in range(network.num_edges()):
        f = values[e]
        if not network.lower[e] <= f <= network.upper[e]:
            raise AssertionError(
                f"edge {e} flow {f} outside [{network.lower[e]}, {network.upper[e]}]"
            )
        balance[network.src[e]] -= f
        balance[network.dst[e]] += f
    for v in range(network.num_nodes):
        if v in (network.source, network.sink):
            continue
        if balance[v] != 0:
            raise AssertionError(f"conservation violated at node {v}")


def feasible_flow(network: BoundedFlowNetwork) -> Optional[Flow]:
    """Some integral flow meeting all bounds, or None when none exists."""
    for e in range(network.num_edges()):
        if network.lower[e] > network.upper[e]:
            return None
    n = network.num_nodes
    super_s, super_t = n, n + 1
    dinic = _Dinic(n + 2)
    excess = [0] * n
    edge_arcs: list[int] = []
    for e in range(network.num_edges()):
        lo, up = network.lower[e], network.upper[e]
        edge_arcs.append(dinic.add(network.src[e], network.dst[e], up - lo))
        excess[network.dst[e]] += lo
        excess[network.src[e]] -= lo
    dinic.add(network.sink, network.source, 1 << 60)
    need = 0
    for v in range(n):
        if excess[v] > 0:
            dinic.add(super_s, v, excess[v])
            need += excess[v]
        elif excess[v] < 0:
            dinic.add(v, super_t, -excess[v])
    if dinic.max_flow(super_s, super_t) < need:
        return None
    values = [
        network.lower[e] + dinic.flow_on(edge_arcs[e], network.upper[e] - network.lower[e])
        for e in range(network.num_edges())
    ]
    _verify(network, values)
    total = sum(
        values[e] for e in range(network.num_edges()) if network.src[e] == network.source
    ) - sum(
        values[e] for e in range(network.num_edges()) if network.dst[e] == network.source
    )
    return Flow(tuple(values), total)


def max_flow(network: BoundedFlowNetwork) -> Flow:
    """Maximum integral source-to-sink flow; honors lower bounds when present.

    Raises Infeasible when lower bounds admit no flow at all.
    """
    if all(lo == 0 for lo in network.lower):
        dinic = _Dinic(network.num_nodes)
        arcs = [
            dinic.add(network.src[e], network.dst[e], network.upper[e])
            for e in range(network.num_edges())
        ]
        total = dinic.max_flow(network.source, network.sink)
        values = [dinic.flow_on(arcs[e], network.upper[e]) for e in range(network.num_edges())]
        _verify(network, values)
        return Flow(tuple(values), total)

    base = feasible_flow(network)
    if base is None:
        raise Infeasible("lower bounds admit no feasible flow")
    dinic = _Dinic(network.num_nodes)
    arcs = []
    for e in range(network.num_edges()):
        arc = dinic.add(network.src[e], network.dst[e], network.upper[e] - base.values[e])
        # allow pushing flow back down to the lower bound
        dinic.cap[arc ^ 1] = base.values[e] - network.lower[e]
        arcs.append(arc)
    extra = dinic.max_flow(network.source, network.sink)
    values = [
        base.values[e] + (network.upper[e] - base.values[e] - dinic.cap[arcs[e]])
        for e in range(network.num_edges())
    ]
    _verify(network, values)
    return Flow(tuple(values), base.total + extra)


# ---------------------------------------------------------------------------
# Reserve networks

OPEN_CLASS = "open"
PREF_CLASS = "preferential"


@dataclass
class ReserveNetwork:
    """Three-layer network: source -> agents -> categories -> class nodes -> sink."""

    network: BoundedFlowNetwork
    agent_node: dict[int, int]
    category_node: dict[int, int]
    class_node: dict[str, int]
    agent_edge: dict[int, int] = field(default_factory=dict)
    assign_edge: dict[tuple[int, int], int] = field(default_factory=dict)
    category_edge: dict[int, int] = field(default_factory=dict)
    class_edge: dict[str, int] = field(default_factory=dict)

    def class_of(self, system: SequentialReserveSystem, c: int) -> str:
        return PREF_CLASS if system.is_beneficial(c) else OPEN_CLASS


@dataclass
class CompactReserveNetwork:
    """Same layering with agents grouped by identical eligibility sets."""

    network: BoundedFlowNetwork
    group_of: dict[int, int]
    group_members: dict[int, tuple[int, ...]]
    group_node: dict[int, int]
    category_node: dict[int, int]
    class_node: dict[str, int]
    group_edge: dict[int, int] = field(default_factory=dict)
    assign_edge: dict[tuple[int, int], int] = field(default_factory=dict)
    category_edge: dict[int, int] = field(default_factory=dict)
    class_edge: dict[str, int] = field(default_factory=dict)


def build_reserve_network(system: SequentialReserveSystem) -> ReserveNetwork:
    base = system.base
    total_capacity = sum(base.capacities)
    names = ["s"]
    agent_node = {}
    for a in range(base.num_agents):
        agent_node[a] = len(names)
        names.append(f"i{a}")
    category_node = {}
    for c in range(base.num_categories):
        category_node[c] = len(names)
        names.append(f"c{c}")
    open_node = len(names)
    names.append("C0")
    pref_node = len(names)
    names.append("C*")
    sink = len(names)
    names.append("t")
    net = BoundedFlowNetwork(len(names), source=0, sink=sink, names=names)

    rn = ReserveNetwork(
        network=net,
        agent_node=agent_node,
        category_node=category_node,
        class_node={OPEN_CLASS: open_node, PREF_CLASS: pref_node},
    )
    for a in range(base.num_agents):
        rn.agent_edge[a] = net.add_edge(0, agent_node[a], 0, 1)
    for c in range(base.num_categories):
        for a in base.eligible_agents(c):
            rn.assign_edge[(a, c)] = net.add_edge(agent_node[a], category_node[c], 0, 1)
    for c in range(base.num_categories):
        target = pref_node if system.is_beneficial(c) else open_node
        rn.category_edge[c] = net.add_edge(
            category_node[c], target, 0, base.capacities[c]
        )
    rn.class_edge[OPEN_CLASS] = net.add_edge(open_node, sink, 0, total_capacity)
    rn.class_edge[PREF_CLASS] = net.add_edge(pref_node, sink, 0, total_capacity)
    return rn


def agent_groups(system: SequentialReserveSystem) -> dict[int, tuple[int, ...]]:
    """Partition agents by identical eligible-category sets.

    Group ids are assigned in ascending order of each group's smallest member.
    """
    by_set: dict[tuple[int, ...], list[int]] = {}
    for a in range(system.num_agents):
        key = system.base.agent_categories(a)
        by_set.setdefault(key, []).append(a)
    ordered = sorted(by_set.values(), key=lambda members: members[0])
    return {k: tuple(members) for k, members in enumerate(ordered)}


def build_compact_network(system: SequentialReserveSystem) -> CompactReserveNetwork:
    base = system.base
    total_capacity = sum(base.capacities)
    groups = agent_groups(system)
    names = ["s"]
    group_node = {}
    for k in sorted(groups):
        group_node[k] = len(names)
        names.append(f"k{k}")
    category_node = {}
    for c in range(base.num_categories):
        category_node[c] = len(names)
        names.append(f"c{c}")
    open_node = len(names)
    names.append("C0")
    pref_node = len(names)
    names.append("C*")
    sink = len(names)
    names.append("t")
    net = BoundedFlowNetwork(len(names), source=0, sink=sink, names=names)

    cn = CompactReserveNetwork(
        network=net,
        group_of={a: k for k, members in groups.items() for a in members},
        group_members=groups,
        group_node=group_node,
        category_node=category_node,
        class_node={OPEN_CLASS: open_node, PREF_CLASS: pref_node},
    )
    for k in sorted(groups):
        size = len(groups[k])
        cn.group_edge[k] = net.add_edge(0, group_node[k], 0, size)
        eligible = system.base.agent_categories(groups[k][0])
        for c in eligible:
            cn.assign_edge[(k, c)] = net.add_edge(
                group_node[k], category_node[c], 0, size
            )
    for c in range(base.num_categories):
        target = pref_node if system.is_beneficial(c) else open_node
        cn.category_edge[c] = net.add_edge(
            category_node[c], target, 0, base.capacities[c]
        )
    cn.class_edge[OPEN_CLASS] = net.add_edge(open_node, sink, 0, total_capacity)
    cn.class_edge[PREF_CLASS] = net.add_edge(pref_node, sink, 0, total_capacity)
    return cn


def flow_to_matching(
    reserve,
    flow: Flow,
    ledger: Optional[list[tuple[int, int]]] = None,
) -> Matching:
    """Decode a flow into a matching.

    Full networks decode directly from the agent->category unit edges. The
    compact case needs the fix ledger built up by the sequential procedure;
    any group flow beyond the ledger is ambiguous by construction and
    rejected.
    """
    if isinstance(reserve, ReserveNetwork):
        num_agents = len(reserve.agent_node)
        assignment: list[Optional[int]] = [None] * num_agents
        for (a, c), e in reserve.assign_edge.items():
            if flow.values[e] == 1:
                if assignment[a] is not None:
                    raise DecodeAmbiguity(f"agent {a} carries two units")
                assignment[a] = c
        return Matching(tuple(assignment))

    if not isinstance(reserve, CompactReserveNetwork):
        raise TypeError(f"cannot decode against {type(reserve).__name__}")
    ledger = ledger or []
    num_agents = len(reserve.group_of)
    assignment: list[Optional[int]] = [None] * num_agents
    for a, c in ledger:
        if assignment[a] is not None:
            raise DecodeAmbiguity(f"ledger fixes agent {a} twice")
        assignment[a] = c
    # Fixed units are removed from the compact network as they are pinned,
    # so a terminal flow carries no group units at all.
    for (k, c), e in reserve.assign_edge.items():
        if flow.values[e] > 0:
            raise DecodeAmbiguity(
                f"group {k} carries {flow.values[e]} unpinned units into category {c}"
            )
    return Matching(tuple(assignment))
