from __future__ import annotations

import random

import pytest

from reservematch import axioms
from reservematch.cli import GeneratorSpec
from reservematch.harness import oracle_maxima
from reservematch.model import (
    Matching,
    PrecedenceOrder,
    PriorityRanking,
    ReserveSystem,
    SequentialReserveSystem,
    as_sequential,
)
from reservematch.rules_basic import mma_allocate
from reservematch.rules_sequential import (
    FIXED,
    NO_CHANGE,
    dual_maximum_matching,
    scu_allocate,
    scu_bipartite_step,
    scu_feasibility_check,
    scu_state_init,
)

IMPLS = ("flow", "compact", "bipartite")


def random_sequential(rng, max_agents=12, max_categories=4):
    spec = GeneratorSpec(
        num_agents=rng.randint(1, max_agents),
        num_categories=rng.randint(1, max_categories),
        capacity="uniform:0:3",
        density=rng.choice([0.2, 0.4, 0.7, 1.0]),
        preferential_fraction=rng.choice([0.0, 0.3, 0.6, 1.0]),
        tier_scheme=rng.choice(["equal", "strict", "random:2", "random:3"]),
        seed=rng.randrange(1 << 30),
    )
    return spec.build()


# ---------------------------------------------------------------------------
# dual maximum matching


def test_dual_maximum_values(grouped_six):
    match, b, m = dual_maximum_matching(grouped_six)
    assert (b, m) == (2, 3)
    loads = match.load
    assert loads[0] + loads[2] == 2 and sum(loads) == 3


def test_dual_maximum_no_preferential(contested_pair):
    _, b, m = dual_maximum_matching(contested_pair)
    assert (b, m) == (0, 2)


def test_dual_maximum_all_preferential(contested_pair):
    seq = SequentialReserveSystem(
        base=contested_pair,
        preferential=frozenset({0, 1}),
        precedence=PrecedenceOrder((0, 0)),
    )
    _, b, m = dual_maximum_matching(seq)
    assert b == m == 2


def test_dual_maximum_agrees_with_oracle():
    rng = random.Random(8080)
    for _ in range(120):
        system = random_sequential(rng, max_agents=6, max_categories=3)
        maxima = oracle_maxima(system)
        _, b, m = dual_maximum_matching(system)
        assert (b, m) == (maxima.b, maxima.m)


# ---------------------------------------------------------------------------
# feasibility checks


def test_feasibility_check_open_slot(grouped_six):
    assert scu_feasibility_check(grouped_six, [], 1, 0)


def test_feasibility_check_with_fixed_agent(grouped_six):
    # 1 fixed to c0; agent 0 into c1 still leaves 2 beneficiaries reachable
    assert scu_feasibility_check(grouped_six, [(1, 0)], 0, 1)


def test_feasibility_check_capacity_conflict(grouped_six):
    assert not scu_feasibility_check(grouped_six, [(1, 0)], 0, 0)


def test_feasibility_check_precedence_chain(precedence_chain):
    assert scu_feasibility_check(precedence_chain, [], 2, 0)


def test_feasibility_check_preconditions(grouped_six):
    with pytest.raises(ValueError):
        scu_feasibility_check(grouped_six, [], 5, 0)  # agent 5 not eligible for c0
    with pytest.raises(ValueError):
        scu_feasibility_check(grouped_six, [(1, 0)], 1, 1)


# ---------------------------------------------------------------------------
# the rule itself


@pytest.mark.parametrize("impl", IMPLS)
def test_scu_precedence_chain(precedence_chain, impl):
    assert scu_allocate(precedence_chain, impl=impl) == Matching((None, 1, 0))


@pytest.mark.parametrize("impl", IMPLS)
def test_scu_grouped_six(grouped_six, impl):
    assert scu_allocate(grouped_six, impl=impl) == Matching((None, 0, None, 1, 2, None))


@pytest.mark.parametrize("impl", IMPLS)
def test_scu_zero_capacity(impl):
    system = SequentialReserveSystem(
        base=ReserveSystem(
            2, 2, (0, 0), (PriorityRanking((0, 1), 2), PriorityRanking((0, 1), 2))
        ),
        preferential=frozenset({0}),
        precedence=PrecedenceOrder((0, 1)),
    )
    assert scu_allocate(system, impl=impl) == Matching((None, None))


def test_scu_basic_coercion_axioms(contested_pair):
    """On a plain instance the rule degenerates to a priority-respecting
    maximum-cardinality rule; it need not equal the adjustment rule's output
    but must satisfy the same four axioms."""
    out = scu_allocate(contested_pair)
    maxima = oracle_maxima(contested_pair)
    assert axioms.check_eligibility(contested_pair, out).passed
    assert axioms.check_respect_priorities(contested_pair, out).passed
    assert axioms.check_nonwasteful(contested_pair, out).passed
    assert axioms.check_max_cardinality(contested_pair, out, maxima.m).passed
    mma_out, _ = mma_allocate(contested_pair)
    assert out.matched_count() == mma_out.matched_count()


def test_scu_implementations_agree_thousand():
    rng = random.Random(20240601)
    for _ in range(1000):
        system = random_sequential(rng)
        outs = [scu_allocate(system, impl=impl) for impl in IMPLS]
        assert outs[0] == outs[1] == outs[2], system


def test_scu_consistency(grouped_six):
    for impl in IMPLS:
        assert scu_allocate(grouped_six, impl=impl) == scu_allocate(
            grouped_six, impl=impl
        )


def test_scu_output_preserves_maxima():
    rng = random.Random(606)
    for _ in range(80):
        system = random_sequential(rng, max_agents=7, max_categories=3)
        seq = as_sequential(system)
        _, b, m = dual_maximum_matching(seq)
        out = scu_allocate(system)
        assert out.matched_count() == m
        assert out.beneficiary_count(seq.preferential) == b


def test_scu_trace_records_fixes(grouped_six, tmp_path):
    records = []
    scu_allocate(grouped_six, impl="bipartite", trace_sink=records.append)
    events = [r["event"] for r in records]
    assert events[0] == "init" and events[-1] == "done"
    fixes = [(r["agent"], r["category"]) for r in records if r["event"] == "fixed"]
    assert fixes == [(1, 0), (3, 1), (4, 2)]
    # fixed set only grows, and the final fixed set is the matched set
    sizes = [len(r["fixed"]) for r in records]
    assert sizes == sorted(sizes)
    assert records[-1]["fixed"] == [[1, 0], [3, 1], [4, 2]]


# ---------------------------------------------------------------------------
# per-step case analysis


def test_step_case_already_matched(grouped_six):
    state = scu_state_init(grouped_six)
    agent = next(a for a in range(6) if state.mu.assignment[a] == 0)
    before = list(state.mu.assignment)
    assert scu_bipartite_step(grouped_six, state, agent, 0) == FIXED
    assert list(state.mu.assignment) == before
    assert state.X == [(agent, 0)]


def test_step_case_unmatched_displaces():
    # two agents contest one unit slot; the higher-priority one arrives second
    system = SequentialReserveSystem(
        base=ReserveSystem(
            2, 1, (1,), (PriorityRanking((0, 1), 2),)
        ),
        preferential=frozenset(),
        precedence=PrecedenceOrder((0,)),
    )
    state = scu_state_init(system)
    state.mu.unassign(0)
    state.mu.assign(1, 0)
    assert scu_bipartite_step(system, state, 0, 0) == FIXED
    assert state.mu.assignment[0] == 0 and state.mu.assignment[1] is None


def test_step_no_change_when_all_branches_fail():
    # single slot already held by the top-priority agent
    system = SequentialReserveSystem(
        base=ReserveSystem(
            2, 1, (1,), (PriorityRanking((0, 1), 2),)
        ),
        preferential=frozenset(),
        precedence=PrecedenceOrder((0,)),
    )
    state = scu_state_init(system)
    assert state.mu.assignment[0] == 0
    assert scu_bipartite_step(system, state, 1, 0) == NO_CHANGE
    assert state.X == []


def test_step_reroute_case(grouped_six):
    """An agent matched elsewhere is pulled in while its old seat refills."""
    state = scu_state_init(grouped_six)
    # drive processing of c0 to completion, then fix the first c1 candidate
    for agent in grouped_six.base.eligible_agents(0):
        if state.fixed_count.get(0, 0) == 1:
            break
        if agent not in state.in_x:
            scu_bipartite_step(grouped_six, state, agent, 0)
    state.Y.add(0)
    assert state.mu.assignment[1] == 0
    candidates = [a for a in grouped_six.base.eligible_agents(1) if a not in state.in_x]
    fixed = None
    for agent in candidates:
        if scu_bipartite_step(grouped_six, state, agent, 1) == FIXED:
            fixed = agent
            break
    assert fixed == 3
    assert state.mu.assignment[3] == 1
