from __future__ import annotations

import pathlib

import pytest

from reservematch.harness import corpus

CORPUS_DIR = pathlib.Path(__file__).parent / "corpus"


@pytest.fixture(scope="session")
def contested_pair():
    """3 agents, 2 unit categories; c0 ranks 1,0 eligible, c1 ranks 1,2."""
    return corpus()["contested-pair"]


@pytest.fixture(scope="session")
def precedence_chain():
    """3 agents, strict tiers c0 then c1; agent 2 tops both rankings."""
    return corpus()["precedence-chain"]


@pytest.fixture(scope="session")
def grouped_six():
    """6 agents in two eligibility groups; preferential c0 and c2, open c1."""
    return corpus()["grouped-six"]


@pytest.fixture(scope="session")
def da_gap():
    """2 agents where deferred acceptance strands one below maximum size."""
    return corpus()["da-gap"]


@pytest.fixture(scope="session")
def corpus_dir() -> pathlib.Path:
    return CORPUS_DIR
