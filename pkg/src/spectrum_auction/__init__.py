"""Operator-level spectrum auctions on multi-operator conflict graphs."""

from ._kernels import backend
from .fixtures import FIXTURES, load_fixture
from .mechanisms import (
    MECHANISMS,
    InstanceTooLarge,
    run_mechanism,
    run_nud_am,
    run_nud_wspam,
    run_sc_spam,
    run_small,
    run_vcg,
)
from .model import (
    AuctionOutcome,
    BidLadder,
    ConflictGraph,
    Instance,
    ModelError,
    OperatorProfile,
    critical_operator,
    operator_bid_sum,
    utility,
)
from .topology import TopologySpec, generate_topology, random_instance

__all__ = [
    "AuctionOutcome", "BidLadder", "ConflictGraph", "FIXTURES", "Instance", "InstanceTooLarge",
    "MECHANISMS", "ModelError", "OperatorProfile", "TopologySpec", "backend", "critical_operator",
    "generate_topology", "load_fixture", "operator_bid_sum", "random_instance", "run_mechanism",
    "run_nud_am", "run_nud_wspam", "run_sc_spam", "run_small", "run_vcg", "utility",
]
__version__ = "0.1.0"
