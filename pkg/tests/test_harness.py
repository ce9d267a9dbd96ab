from __future__ import annotations

import random

import pytest

from reservematch.cli import GeneratorSpec
from reservematch.harness import (
    MatchingSpace,
    SpaceTooLarge,
    corpus,
    hide_categories,
    oracle_maxima,
    promotions,
    test_consistency as consistency_report,
    test_independence_of_baseline as independence_report,
    test_no_incentive_to_hide as hide_report,
    test_respect_improvements as improvements_report,
)
from reservematch.model import Matching, PriorityRanking, ReserveSystem, base_of
from reservematch.rules_basic import da_allocate, mma_allocate, rev_allocate
from reservematch.rules_sequential import scu_allocate


def test_matching_space_exhaustive(contested_pair):
    space = list(MatchingSpace(contested_pair))
    assert len(space) == len(set(space))
    # agent options: 2 * 3 * 2 combos, minus capacity-violating ones
    assert Matching((None, None, None)) in space
    assert Matching((0, 1, None)) in space
    assert all(
        max(mu.loads(2)) <= 1 for mu in space
    )


def test_matching_space_bound():
    system = ReserveSystem(
        8,
        3,
        (2, 2, 2),
        tuple(PriorityRanking(tuple(range(8)), 8) for _ in range(3)),
    )
    with pytest.raises(SpaceTooLarge):
        MatchingSpace(system, max_size=100)


def test_oracle_contested_pair(contested_pair):
    maxima = oracle_maxima(contested_pair)
    assert maxima.m == 2
    assert set(maxima.max_cardinality_matchings) == {
        Matching((0, None, 1)),
        Matching((None, 0, 1)),
        Matching((0, 1, None)),
    }
    assert set(maxima.four_axiom_matchings) == {
        Matching((None, 0, 1)),
        Matching((0, 1, None)),
    }


def test_oracle_grouped_six(grouped_six):
    maxima = oracle_maxima(grouped_six)
    assert (maxima.m, maxima.b) == (3, 2)


def test_oracle_empty_instance():
    system = ReserveSystem(0, 0, (), ())
    maxima = oracle_maxima(system)
    assert (maxima.m, maxima.b) == (0, 0)


def test_oracle_agrees_with_matcher():
    from reservematch.bipartite import build_graph, maximum_matching
    from reservematch.rules_sequential import dual_maximum_matching

    rng = random.Random(989)
    for _ in range(100):
        spec = GeneratorSpec(
            num_agents=rng.randint(1, 6),
            num_categories=rng.randint(1, 3),
            capacity="uniform:0:2",
            density=rng.choice([0.3, 0.6, 1.0]),
            preferential_fraction=rng.choice([0.0, 0.5]),
            seed=rng.randrange(1 << 30),
        )
        system = spec.build()
        maxima = oracle_maxima(system)
        assert maximum_matching(build_graph(base_of(system))).size() == maxima.m
        _, b, m = dual_maximum_matching(system)
        assert (b, m) == (maxima.b, maxima.m)


# ---------------------------------------------------------------------------
# perturbations


def test_hide_categories_structure(grouped_six):
    hidden = hide_categories(grouped_six, 1, [0])
    assert not base_of(hidden).is_eligible(1, 0)
    # everyone else keeps their standing
    base = base_of(grouped_six)
    after = base_of(hidden)
    for c in range(3):
        keep = [a for a in base.priorities[c].eligible() if not (a == 1 and c == 0)]
        assert [a for a in after.priorities[c].eligible()] == keep


def test_promotions_cover_swaps_and_unhide(contested_pair):
    perturbed = list(promotions(contested_pair, 0))
    # agent 0: one upward swap at c0 (position 1 -> 0), one unhide at c1
    assert len(perturbed) == 2
    swapped = base_of(perturbed[0])
    assert swapped.priorities[0].ordered_agents[0] == 0
    unhidden = base_of(perturbed[1])
    assert unhidden.is_eligible(0, 1)
    assert unhidden.priorities[1].eligible_cutoff == 3


def test_scu_passes_hide_and_improvements():
    rng = random.Random(27)
    rule = lambda system: scu_allocate(system, impl="compact")
    for _ in range(25):
        spec = GeneratorSpec(
            num_agents=rng.randint(1, 5),
            num_categories=rng.randint(1, 3),
            capacity="uniform:0:2",
            density=rng.choice([0.4, 0.8]),
            preferential_fraction=rng.choice([0.0, 0.5]),
            tier_scheme=rng.choice(["equal", "strict"]),
            seed=rng.randrange(1 << 30),
        )
        system = spec.build()
        assert hide_report(rule, system).ok
        assert improvements_report(rule, system).ok
        assert consistency_report(rule, system).ok


def test_da_and_rev_pass_incentive_properties():
    rng = random.Random(37)
    for _ in range(20):
        spec = GeneratorSpec(
            num_agents=rng.randint(1, 5),
            num_categories=rng.randint(1, 3),
            capacity="uniform:0:2",
            density=rng.choice([0.4, 0.8]),
            seed=rng.randrange(1 << 30),
        )
        system = spec.build()
        da_rule = lambda s: da_allocate(base_of(s))
        rev_rule = lambda s: rev_allocate(base_of(s), list(range(base_of(s).num_agents)))
        assert hide_report(da_rule, system).ok
        assert improvements_report(da_rule, system).ok
        assert hide_report(rev_rule, system).ok
        assert improvements_report(rev_rule, system).ok


def test_greedy_strawman_fails_hide():
    """Negative control: a one-shot rule where every agent applies only to
    their largest-index eligible category rewards hiding that category."""

    def strawman(system):
        base = base_of(system)
        applicants: dict[int, list[int]] = {}
        for a in range(base.num_agents):
            cats = base.agent_categories(a)
            if cats:
                applicants.setdefault(cats[-1], []).append(a)
        assignment: list = [None] * base.num_agents
        for c, pool in applicants.items():
            pool.sort(key=lambda a: base.position(c, a))
            for a in pool[: base.capacities[c]]:
                assignment[a] = c
        return Matching(tuple(assignment))

    # both apply to c1 where agent 1 wins; agent 0, unmatched, becomes
    # matched by hiding c1 and falling back to c0
    system = ReserveSystem(
        2,
        2,
        (1, 1),
        (PriorityRanking((0, 1), 1), PriorityRanking((1, 0), 2)),
    )
    report = hide_report(strawman, system)
    assert not report.ok
    assert report.counterexamples[0]["agent"] == 0


def test_single_category_hide_trivial():
    system = ReserveSystem(1, 1, (1,), (PriorityRanking((0,), 1),))
    report = hide_report(lambda s: da_allocate(base_of(s)), system)
    assert report.ok


def test_consistency_two_levels(contested_pair):
    from reservematch.bipartite import GraphMatching

    toggle = iter([Matching((None, 0, 1)), Matching((0, 1, None))])
    flaky = lambda system: next(toggle)
    report = consistency_report(flaky, contested_pair)
    assert not report.ok
    assert report.counterexamples[0]["level"] == "matched-agents"

    toggle2 = iter([Matching((None, 0, 1)), Matching((None, 0, 1))])
    assert consistency_report(lambda s: next(toggle2), contested_pair).ok


def test_rev_baseline_dependence_found(contested_pair):
    report = independence_report(
        lambda system, order: rev_allocate(base_of(system), order), contested_pair
    )
    assert not report.ok  # the corpus witness


def test_baseline_independence_trivial_cases(contested_pair):
    # a rule that ignores its baseline passes; single agent passes
    report = independence_report(
        lambda system, order: da_allocate(base_of(system)), contested_pair
    )
    assert report.ok
    single = ReserveSystem(1, 1, (1,), (PriorityRanking((0,), 1),))
    report = independence_report(
        lambda system, order: rev_allocate(base_of(system), order), single
    )
    assert report.ok


def test_corpus_contains_required_witnesses(da_gap, contested_pair):
    names = corpus()
    assert {"contested-pair", "precedence-chain", "grouped-six", "da-gap"} <= set(names)
    # deferred acceptance cardinality gap
    out = da_allocate(da_gap)
    assert out.matched_count() < oracle_maxima(da_gap).m
    # adjustment-rule matching inconsistency across policies
    from reservematch.bipartite import GraphMatching

    seed = GraphMatching.from_matching(Matching((0, None, 1)), 2)
    first, _ = mma_allocate(contested_pair, initial=seed.copy())
    second, _ = mma_allocate(contested_pair, initial=seed.copy(), category_order=(1, 0))
    assert first != second
