"""Domain model: rationing instances, matchings, and their canonical JSON forms.

Agents and categories are dense integer indices (0..n-1). Every category
ranks all agents; a cutoff position splits the ranking into an eligible
prefix and an ineligible tail. A sequential instance adds a set of
preferential-treatment categories and a weak precedence order expressed as
integer tiers (equal tiers are processed simultaneously).

All types are immutable after validation and safe to share across solver
runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Union


class InstanceError(ValueError):
    """Instance or matching data failed validation."""


class DuplicateAgentInRanking(InstanceError):
    pass


class RankingIncomplete(InstanceError):
    pass


class NegativeCapacity(InstanceError):
    pass


class UnknownCategoryInPreferential(InstanceError):
    pass


class TierCountMismatch(InstanceError):
    pass


@dataclass(frozen=True)
class PriorityRanking:
    """A strict total order over all agents plus an eligibility cutoff.

    Agents at positions < ``eligible_cutoff`` are eligible; the relative
    order of agents below the cutoff carries no meaning.
    """

    ordered_agents: tuple[int, ...]
    eligible_cutoff: int
    _pos: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_pos", {a: p for p, a in enumerate(self.ordered_agents)}
        )

    def position(self, agent: int) -> int:
        return self._pos[agent]

    def is_eligible(self, agent: int) -> bool:
        return self._pos[agent] < self.eligible_cutoff

    def eligible(self) -> tuple[int, ...]:
        """Eligible agents, highest priority first."""
        return self.ordered_agents[: self.eligible_cutoff]


@dataclass(frozen=True)
class ReserveSystem:
    """A basic instance: capacities and one priority ranking per category."""

    num_agents: int
    num_categories: int
    capacities: tuple[int, ...]
    priorities: tuple[PriorityRanking, ...]

    def __post_init__(self) -> None:
        if len(self.capacities) != self.num_categories:
            raise InstanceError(
                f"expected {self.num_categories} capacities, got {len(self.capacities)}"
            )
        if len(self.priorities) != self.num_categories:
            raise InstanceError(
                f"expected {self.num_categories} rankings, got {len(self.priorities)}"
            )
        for c, q in enumerate(self.capacities):
            if q < 0:
                raise NegativeCapacity(f"category {c} has negative capacity {q}")
        for c, ranking in enumerate(self.priorities):
            seen: set[int] = set()
            for a in ranking.ordered_agents:
                if a in seen:
                    raise DuplicateAgentInRanking(
                        f"agent {a} appears twice in the ranking of category {c}"
                    )
                if not 0 <= a < self.num_agents:
                    raise RankingIncomplete(
                        f"ranking of category {c} names unknown agent {a}"
                    )
                seen.add(a)
            if len(seen) != self.num_agents:
                raise RankingIncomplete(
                    f"ranking of category {c} lists {len(seen)} of "
                    f"{self.num_agents} agents"
                )
            if not 0 <= ranking.eligible_cutoff <= self.num_agents:
                raise InstanceError(
                    f"category {c} cutoff {ranking.eligible_cutoff} out of range"
                )

    def eligible_agents(self, c: int) -> tuple[int, ...]:
        """Agents eligible for category c, highest priority first."""
        return self.priorities[c].eligible()

    def is_eligible(self, agent: int, c: int) -> bool:
        return self.priorities[c].is_eligible(agent)

    def position(self, c: int, agent: int) -> int:
        return self.priorities[c].position(agent)

    def compare_priority(self, c: int, a: int, b: int) -> bool:
        """True iff agent a ranks strictly above agent b at category c."""
        if a == b:
            raise ValueError("compare_priority requires two distinct agents")
        return self.position(c, a) < self.position(c, b)

    def agent_categories(self, agent: int) -> tuple[int, ...]:
        """Categories the agent is eligible for, ascending index."""
        return tuple(
            c for c in range(self.num_categories) if self.is_eligible(agent, c)
        )


@dataclass(frozen=True)
class PrecedenceOrder:
    """Tier per category; smaller tiers are processed earlier, ties together."""

    tier_of: tuple[int, ...]

    def __post_init__(self) -> None:
        for c, t in enumerate(self.tier_of):
            if t < 0:
                raise InstanceError(f"category {c} has negative tier {t}")

    def before(self, c: int, d: int) -> bool:
        """Strictly earlier tier (the strict relation; ties are incomparable)."""
        return self.tier_of[c] < self.tier_of[d]

    def strict_sequence(self) -> tuple[int, ...]:
        """Processing order: by tier, ties broken by ascending category index."""
        return tuple(
            sorted(range(len(self.tier_of)), key=lambda c: (self.tier_of[c], c))
        )

    def is_strict(self) -> bool:
        return len(set(self.tier_of)) == len(self.tier_of)


@dataclass(frozen=True)
class HybridMarker:
    """Names the split of open categories into an early and a late block."""

    open_early: frozenset[int]
    open_late: frozenset[int]


@dataclass(frozen=True)
class SequentialReserveSystem:
    """A basic instance plus preferential categories and a precedence order."""

    base: ReserveSystem
    preferential: frozenset[int]
    precedence: PrecedenceOrder
    hybrid: Optional[HybridMarker] = None

    def __post_init__(self) -> None:
        for c in self.preferential:
            if not 0 <= c < self.base.num_categories:
                raise UnknownCategoryInPreferential(
                    f"preferential set names unknown category {c}"
                )
        if len(self.precedence.tier_of) != self.base.num_categories:
            raise TierCountMismatch(
                f"expected {self.base.num_categories} tiers, got "
                f"{len(self.precedence.tier_of)}"
            )
        if self.hybrid is not None:
            opens = self.open_categories()
            if self.hybrid.open_early | self.hybrid.open_late != opens or (
                self.hybrid.open_early & self.hybrid.open_late
            ):
                raise InstanceError("hybrid marker must partition the open categories")

    @property
    def num_agents(self) -> int:
        return self.base.num_agents

    @property
    def num_categories(self) -> int:
        return self.base.num_categories

    @property
    def capacities(self) -> tuple[int, ...]:
        return self.base.capacities

    def is_beneficial(self, c: int) -> bool:
        return c in self.preferential

    def open_categories(self) -> frozenset[int]:
        return frozenset(range(self.num_categories)) - self.preferential


AnySystem = Union[ReserveSystem, SequentialReserveSystem]


def as_sequential(system: AnySystem) -> SequentialReserveSystem:
    """Coerce a basic instance: empty preferential set, all tiers equal."""
    if isinstance(system, SequentialReserveSystem):
        return system
    return SequentialReserveSystem(
        base=system,
        preferential=frozenset(),
        precedence=PrecedenceOrder((0,) * system.num_categories),
    )


def base_of(system: AnySystem) -> ReserveSystem:
    return system.base if isinstance(system, SequentialReserveSystem) else system


@dataclass(frozen=True)
class Matching:
    """Partial assignment of agents to categories (None = unmatched)."""

    assignment: tuple[Optional[int], ...]

    def category_of(self, agent: int) -> Optional[int]:
        return self.assignment[agent]

    def matched_agents(self) -> tuple[int, ...]:
        return tuple(a for a, c in enumerate(self.assignment) if c is not None)

    def matched_count(self) -> int:
        return sum(1 for c in self.assignment if c is not None)

    def loads(self, num_categories: int) -> tuple[int, ...]:
        loads = [0] * num_categories
        for c in self.assignment:
            if c is not None:
                loads[c] += 1
        return tuple(loads)

    def agents_in(self, c: int) -> tuple[int, ...]:
        return tuple(a for a, d in enumerate(self.assignment) if d == c)

    def beneficiary_count(self, preferential: frozenset[int]) -> int:
        return sum(1 for c in self.assignment if c is not None and c in preferential)


def check_capacities(matching: Matching, system: AnySystem) -> None:
    base = base_of(system)
    loads = matching.loads(base.num_categories)
    for c, (load, cap) in enumerate(zip(loads, base.capacities)):
        if load > cap:
            raise InstanceError(
                f"category {c} holds {load} agents but has capacity {cap}"
            )


# ---------------------------------------------------------------------------
# Canonical JSON forms


def canonical_json(obj: Any) -> str:
    """Fixed serialization: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def validate_instance(raw: Mapping[str, Any]) -> AnySystem:
    """Validate parsed instance data; returns a sequential instance only when
    the data carries a preferential set or tiers."""
    try:
        num_agents = int(raw["agents"])
        categories = list(raw["categories"])
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed instance data: {exc}") from exc
    if num_agents < 0:
        raise InstanceError(f"negative agent count {num_agents}")

    num_categories = len(categories)
    ids = sorted(int(entry["id"]) for entry in categories)
    if ids != list(range(num_categories)):
        raise InstanceError(
            f"category ids must be exactly 0..{num_categories - 1}, got {ids}"
        )
    by_id = {int(entry["id"]): entry for entry in categories}

    capacities = []
    priorities = []
    for c in range(num_categories):
        entry = by_id[c]
        capacities.append(int(entry["capacity"]))
        ranking = tuple(int(a) for a in entry["ranking"])
        cutoff = int(entry["eligible_cutoff"])
        priorities.append(PriorityRanking(ranking, cutoff))
    base = ReserveSystem(num_agents, num_categories, tuple(capacities), tuple(priorities))

    has_pref = "preferential" in raw and raw["preferential"] is not None
    has_tiers = "tiers" in raw and raw["tiers"] is not None
    if not has_pref and not has_tiers:
        return base

    preferential = frozenset(int(c) for c in raw.get("preferential") or [])
    tiers = raw["tiers"] if has_tiers else [0] * num_categories
    if len(tiers) != num_categories:
        raise TierCountMismatch(
            f"expected {num_categories} tiers, got {len(tiers)}"
        )
    hybrid = None
    if raw.get("hybrid") is not None:
        hybrid = HybridMarker(
            open_early=frozenset(int(c) for c in raw["hybrid"]["open_early"]),
            open_late=frozenset(int(c) for c in raw["hybrid"]["open_late"]),
        )
    return SequentialReserveSystem(
        base=base,
        preferential=preferential,
        precedence=PrecedenceOrder(tuple(int(t) for t in tiers)),
        hybrid=hybrid,
    )


def instance_to_raw(system: AnySystem) -> dict[str, Any]:
    base = base_of(system)
    raw: dict[str, Any] = {
        "agents": base.num_agents,
        "categories": [
            {
                "id": c,
                "capacity": base.capacities[c],
                "ranking": list(base.priorities[c].ordered_agents),
                "eligible_cutoff": base.priorities[c].eligible_cutoff,
            }
            for c in range(base.num_categories)
        ],
    }
    if isinstance(system, SequentialReserveSystem):
        raw["preferential"] = sorted(system.preferential)
        raw["tiers"] = list(system.precedence.tier_of)
        if system.hybrid is not None:
            raw["hybrid"] = {
                "open_early": sorted(system.hybrid.open_early),
                "open_late": sorted(system.hybrid.open_late),
            }
    return raw


def parse_instance(text: str) -> AnySystem:
    return validate_instance(json.loads(text))


def instance_to_json(system: AnySystem) -> str:
    return canonical_json(instance_to_raw(system))


def matching_to_raw(matching: Matching) -> dict[str, Any]:
    return {
        "assignment": {str(a): c for a, c in enumerate(matching.assignment)}
    }


def matching_to_json(matching: Matching) -> str:
    return canonical_json(matching_to_raw(matching))


def validate_matching(raw: Mapping[str, Any], system: AnySystem) -> Matching:
    """Validate parsed matching data against an instance.

    Capacities must be respected; eligibility is deliberately not required
    here (axiom checkers evaluate it). Agents missing from the data are
    unmatched.
    """
    base = base_of(system)
    try:
        entries = dict(raw["assignment"])
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed matching data: {exc}") from exc
    assignment: list[Optional[int]] = [None] * base.num_agents
    for key, value in entries.items():
        agent = int(key)
        if not 0 <= agent < base.num_agents:
            raise InstanceError(f"matching names unknown agent {agent}")
        if value is None:
            continue
        c = int(value)
        if not 0 <= c < base.num_categories:
            raise InstanceError(
                f"matching assigns agent {agent} to unknown category {c}"
            )
        assignment[agent] = c
    matching = Matching(tuple(assignment))
    check_capacities(matching, system)
    return matching


def parse_matching(text: str, system: AnySystem) -> Matching:
    return validate_matching(json.loads(text), system)
