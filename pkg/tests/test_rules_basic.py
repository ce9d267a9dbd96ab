from __future__ import annotations

import itertools
import random
import time

import pytest

from util import fundamental_verdicts, mma_induced_matchings

from reservematch import axioms
from reservematch.bipartite import GraphMatching, build_graph, maximum_matching
from reservematch.harness import oracle_maxima
from reservematch.model import InstanceError, Matching, PriorityRanking, ReserveSystem
from reservematch.rules_basic import (
    MMATrace,
    NotMaximumSeed,
    PrefsNotEligible,
    da_allocate,
    default_preferences,
    mma_allocate,
    rev_allocate,
)


def seed_matching(assignment, num_categories):
    return GraphMatching.from_matching(Matching(assignment), num_categories)


def random_system(rng, max_agents=5, max_categories=3):
    n = rng.randint(1, max_agents)
    ncat = rng.randint(1, max_categories)
    priorities = []
    caps = []
    for _ in range(ncat):
        order = list(range(n))
        rng.shuffle(order)
        priorities.append(PriorityRanking(tuple(order), rng.randint(0, n)))
        caps.append(rng.randint(0, 2))
    return ReserveSystem(n, ncat, tuple(caps), tuple(priorities))



# ---------------------------------------------------------------------------
# deferred acceptance


def test_da_first_category_preference(contested_pair):
    # agent 1 prefers c0; agent 0 is pushed out and has nowhere else to go
    out = da_allocate(contested_pair, prefs=((0,), (0, 1), (1,)))
    assert out == Matching((None, 0, 1))


def test_da_second_category_preference(contested_pair):
    out = da_allocate(contested_pair, prefs=((0,), (1, 0), (1,)))
    assert out == Matching((0, 1, None))


def test_da_no_eligible_agents():
    system = ReserveSystem(
        2, 2, (1, 1), (PriorityRanking((0, 1), 0), PriorityRanking((0, 1), 0))
    )
    assert da_allocate(system) == Matching((None, None))


def test_da_default_prefs_ascending(contested_pair):
    assert default_preferences(contested_pair) == ((0,), (0, 1), (1,))
    assert da_allocate(contested_pair) == Matching((None, 0, 1))


def test_da_rejects_ineligible_pref(contested_pair):
    with pytest.raises(PrefsNotEligible):
        da_allocate(contested_pair, prefs=((0, 1), (0, 1), (1,)))


def test_da_three_axioms_hold_but_cardinality_can_fail(da_gap):
    out = da_allocate(da_gap)
    maxima = oracle_maxima(da_gap)
    verdicts = fundamental_verdicts(da_gap, out, maxima.m)
    assert all(v.passed for v in verdicts[:3])
    assert not verdicts[3].passed  # strands an agent below the maximum
    assert out == Matching((0, None))


def test_da_three_axioms_on_sweep():
    rng = random.Random(5150)
    for _ in range(150):
        system = random_system(rng)
        out = da_allocate(system)
        verdicts = fundamental_verdicts(system, out, out.matched_count())[:3]
        assert all(v.passed for v in verdicts), (system, out)


# ---------------------------------------------------------------------------
# reverse rejecting


def test_rev_forward_baseline(contested_pair):
    assert rev_allocate(contested_pair, (0, 1, 2)) == Matching((0, 1, None))


def test_rev_reverse_baseline(contested_pair):
    assert rev_allocate(contested_pair, (2, 1, 0)) == Matching((None, 0, 1))


def test_rev_single_agent():
    system = ReserveSystem(1, 1, (1,), (PriorityRanking((0,), 1),))
    assert rev_allocate(system, (0,)) == Matching((0,))


def test_rev_invalid_baseline(contested_pair):
    with pytest.raises(InstanceError):
        rev_allocate(contested_pair, (0, 1))


def test_rev_four_axioms_all_baselines_small_sweep():
    rng = random.Random(77)
    for _ in range(40):
        system = random_system(rng, max_agents=5)
        maxima = oracle_maxima(system)
        for baseline in itertools.permutations(range(system.num_agents)):
            out = rev_allocate(system, baseline)
            verdicts = fundamental_verdicts(system, out, maxima.m)
            assert all(v.passed for v in verdicts), (system, baseline, out)


def test_rev_baseline_dependence_witness(contested_pair):
    first = rev_allocate(contested_pair, (0, 1, 2))
    second = rev_allocate(contested_pair, (2, 1, 0))
    assert set(first.matched_agents()) != set(second.matched_agents())


# ---------------------------------------------------------------------------
# maximum matching adjustment


def test_mma_two_policies(contested_pair):
    seed = seed_matching((0, None, 1), 2)
    out_c0_first, trace = mma_allocate(contested_pair, initial=seed.copy())
    assert out_c0_first == Matching((None, 0, 1))
    assert trace.replay(2) == out_c0_first
    out_c1_first, trace2 = mma_allocate(
        contested_pair, initial=seed.copy(), category_order=(1, 0)
    )
    assert out_c1_first == Matching((0, 1, None))
    assert trace2.replay(2) == out_c1_first


def test_mma_fixed_point(contested_pair):
    seed = seed_matching((None, 0, 1), 2)
    out, trace = mma_allocate(contested_pair, initial=seed)
    assert out == Matching((None, 0, 1))
    assert all(entry.outcome == "skipped" for entry in trace.log)


def test_mma_rejects_non_maximum_seed(contested_pair):
    seed = seed_matching((0, None, None), 2)
    with pytest.raises(NotMaximumSeed):
        mma_allocate(contested_pair, initial=seed)


def test_mma_per_category_loads_constant():
    rng = random.Random(4040)
    for _ in range(120):
        system = random_system(rng)
        out, trace = mma_allocate(system)
        initial_loads = trace.initial.loads(system.num_categories)
        assert out.loads(system.num_categories) == initial_loads
        # every prefix of the replay keeps the load vector
        match = GraphMatching.from_matching(trace.initial, system.num_categories)
        for entry in trace.log:
            if entry.outcome == "displaced":
                match.unassign(entry.displaced)
                match.assign(entry.agent, entry.category)
                assert tuple(match.load) == initial_loads


def test_mma_four_axioms_on_sweep():
    rng = random.Random(31337)
    for _ in range(150):
        system = random_system(rng, max_agents=6)
        maxima = oracle_maxima(system)
        out, _ = mma_allocate(system)
        verdicts = fundamental_verdicts(system, out, maxima.m)
        assert all(v.passed for v in verdicts), (system, out)


def test_mma_consistent_matching_failure_witness(contested_pair):
    """Different proposal policies from the same seed give different
    matchings (and even different matched sets)."""
    seed = seed_matching((0, None, 1), 2)
    first, _ = mma_allocate(contested_pair, initial=seed.copy())
    second, _ = mma_allocate(contested_pair, initial=seed.copy(), category_order=(1, 0))
    assert first != second
    assert set(first.matched_agents()) != set(second.matched_agents())


def test_mma_characterization_small():
    """Every four-axiom matching is reachable by some run, and every run
    yields a four-axiom matching (exhaustive execution-tree enumeration)."""
    rng = random.Random(2718)
    for _ in range(40):
        system = random_system(rng, max_agents=4, max_categories=2)
        maxima = oracle_maxima(system)
        produced = mma_induced_matchings(system, maxima)
        assert produced == set(maxima.four_axiom_matchings)


def test_mma_faster_than_rev_trend():
    """Time both rules on growing instances; the ratio must grow with size."""
    from reservematch.cli import GeneratorSpec

    ratios = []
    for size in (120, 360):
        spec = GeneratorSpec(size, 6, capacity=f"const:{size // 12}", density=0.2, seed=9)
        system = spec.build()
        t0 = time.perf_counter()
        mma_allocate(system)
        t_mma = time.perf_counter() - t0
        t0 = time.perf_counter()
        rev_allocate(system, list(range(size)))
        t_rev = time.perf_counter() - t0
        ratios.append(t_rev / max(t_mma, 1e-9))
    assert ratios[-1] > 1.0
