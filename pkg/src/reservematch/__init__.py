"""Reserve-category allocation: solvers, axiom checks, and verification."""

from .model import (
    HybridMarker,
    InstanceError,
    Matching,
    PrecedenceOrder,
    PriorityRanking,
    ReserveSystem,
    SequentialReserveSystem,
    as_sequential,
    parse_instance,
    parse_matching,
)
from .rules_basic import da_allocate, mma_allocate, rev_allocate
from .rules_sequential import dual_maximum_matching, scu_allocate

__all__ = [
    "HybridMarker",
    "InstanceError",
    "Matching",
    "PrecedenceOrder",
    "PriorityRanking",
    "ReserveSystem",
    "SequentialReserveSystem",
    "as_sequential",
    "parse_instance",
    "parse_matching",
    "da_allocate",
    "mma_allocate",
    "rev_allocate",
    "dual_maximum_matching",
    "scu_allocate",
]

__version__ = "0.1.0"
