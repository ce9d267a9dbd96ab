"""Shared helpers for the test suite: sweep generators and the exhaustive
adjustment-rule execution-tree enumerator used by the characterization
checks."""

from __future__ import annotations

import random

from reservematch import axioms
from reservematch.cli import GeneratorSpec
from reservematch.model import (
    HybridMarker,
    Matching,
    PrecedenceOrder,
    PriorityRanking,
    ReserveSystem,
    SequentialReserveSystem,
)


def fundamental_verdicts(system, matching, max_size):
    return [
        axioms.check_eligibility(system, matching),
        axioms.check_respect_priorities(system, matching),
        axioms.check_nonwasteful(system, matching),
        axioms.check_max_cardinality(system, matching, max_size),
    ]


def sweep_instance(rng: random.Random, max_agents=6, max_categories=3):
    """One seeded draw from the small-instance grid (capacities <= 2)."""
    spec = GeneratorSpec(
        num_agents=rng.randint(1, max_agents),
        num_categories=rng.randint(1, max_categories),
        capacity=rng.choice(["uniform:0:2", "uniform:1:2", "const:1"]),
        density=rng.choice([0.2, 0.4, 0.6, 0.8, 1.0]),
        preferential_fraction=rng.choice([0.0, 0.0, 0.4, 0.8]),
        tier_scheme=rng.choice(["equal", "strict", "strict", "random:2"]),
        seed=rng.randrange(1 << 30),
    )
    return spec.build()


def hybrid_instance(rng: random.Random, num_agents: int) -> SequentialReserveSystem:
    """Early-open / preferential / late-open split with universally eligible
    open categories (the setting the two-clause order-preservation form was
    written for)."""
    n_early, n_pref, n_late = 1, rng.randint(1, 2), 1
    cats = n_early + n_pref + n_late
    early = frozenset(range(n_early))
    pref = frozenset(range(n_early, n_early + n_pref))
    late = frozenset(range(n_early + n_pref, cats))
    priorities = []
    tiers = []
    for c in range(cats):
        order = list(range(num_agents))
        rng.shuffle(order)
        cutoff = rng.randint(0, num_agents) if c in pref else num_agents
        priorities.append(PriorityRanking(tuple(order), cutoff))
        tiers.append(0 if c in early else 1 if c in pref else 2)
    base = ReserveSystem(
        num_agents,
        cats,
        tuple(rng.randint(0, 2) for _ in range(cats)),
        tuple(priorities),
    )
    return SequentialReserveSystem(
        base=base,
        preferential=pref,
        precedence=PrecedenceOrder(tuple(tiers)),
        hybrid=HybridMarker(early, late),
    )


def mma_induced_matchings(system, maxima) -> set[Matching]:
    """All adjustment-phase outcomes over every maximum matching and every
    nondeterministic proposal order, via memoized state-space search."""
    results: set[Matching] = set()
    for start in maxima.max_cardinality_matchings:
        initial = tuple(start.assignment)
        seen = set()
        stack = [(initial, frozenset())]
        while stack:
            assignment, considered = stack.pop()
            if (assignment, considered) in seen:
                continue
            seen.add((assignment, considered))
            moves = []
            for agent in range(system.num_agents):
                if assignment[agent] is not None:
                    continue
                for c in system.agent_categories(agent):
                    if (agent, c) in considered:
                        continue
                    members = [a for a, d in enumerate(assignment) if d == c]
                    marked = considered | {(agent, c)}
                    if members:
                        lowest = max(members, key=lambda a: system.position(c, a))
                        if system.position(c, agent) < system.position(c, lowest):
                            nxt = list(assignment)
                            nxt[agent] = c
                            nxt[lowest] = None
                            moves.append((tuple(nxt), marked))
                            continue
                    moves.append((assignment, marked))
            if moves:
                stack.extend(moves)
            else:
                results.add(Matching(assignment))
    return results
