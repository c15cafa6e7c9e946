import numpy as np
import pytest

from spectrum_auction.fixtures import SINGLE_GRAPH, single
from spectrum_auction.model import (
    BidLadder,
    ConflictGraph,
    Instance,
    ModelError,
    OperatorProfile,
    critical_operator,
    neighbors_of_operator,
    operator_bid_sum,
    utility,
)
from spectrum_auction.mechanisms import run_sc_spam


def test_intra_operator_edge_rejected():
    with pytest.raises(ModelError):
        ConflictGraph((2, 1), frozenset({((0, 0), (0, 1))}))


def test_self_loop_and_out_of_range_rejected():
    with pytest.raises(ModelError):
        ConflictGraph((1, 1), frozenset({((0, 0), (0, 0))}))
    with pytest.raises(ModelError):
        ConflictGraph((1, 1), frozenset({((0, 0), (1, 5))}))


def test_edges_are_normalized():
    g1 = ConflictGraph((1, 1), frozenset({((1, 0), (0, 0))}))
    g2 = ConflictGraph((1, 1), frozenset({((0, 0), (1, 0))}))
    assert g1 == g2
    assert g1.adjacency[0, 1] and g1.adjacency[1, 0]


def test_adjacency_roundtrip():
    g = SINGLE_GRAPH
    assert ConflictGraph.from_adjacency(g.bs_counts, g.adjacency) == g
    assert g.adjacency.sum() == 2 * len(g.edges)
    assert not g.adjacency.diagonal().any()


def test_without_and_active_operators():
    g = SINGLE_GRAPH.without([(0, 0), (0, 1), (0, 2)])
    assert g.active_operators() == [1, 2]
    assert not g.is_active((0, 1))
    assert g.is_active((1, 1))


def test_independence():
    assert SINGLE_GRAPH.is_independent([(0, 0), (0, 1), (1, 2)])
    assert not SINGLE_GRAPH.is_independent([(0, 0), (1, 0)])


def test_operator_bid_sum_ignores_inactive(single_ex):
    g = single_ex.graph.without([(0, 0)])
    assert operator_bid_sum(single_ex.profiles[0], single_ex.graph, 0) == 25
    assert operator_bid_sum(single_ex.profiles[0], g, 0) == 16


def test_neighbors_and_critical_operator(single_ex):
    g = single_ex.graph
    assert neighbors_of_operator(g, 0) == frozenset({(1, 0), (1, 1), (2, 0), (2, 1)})
    bids = [p.bids for p in single_ex.profiles]
    res = critical_operator(g, bids, 0)
    # C's conflicting BSs (C1, C2) outweigh B's (B1, B2)
    assert res.critical_operator == 2 and res.critical_valuation == 18


def test_critical_operator_isolated():
    g = ConflictGraph((1, 1), frozenset())
    res = critical_operator(g, [(5,), (7,)], 0)
    assert res.critical_operator is None and res.critical_valuation == 0


def test_ladder_validation():
    with pytest.raises(ModelError):
        BidLadder(0, ((3, 5),))
    lad = BidLadder(0, ((9, 4, 1),))
    assert lad.value_of(0, 2) == 13
    assert lad.bid(2, 0) == 4
    with pytest.raises(ModelError):
        BidLadder(0, ((9,),)).check_demands((2,))


def test_profile_defaults():
    p = OperatorProfile(0, (4, 5))
    assert p.true_values == (4, 5) and p.demands == (1, 1)
    with pytest.raises(ModelError):
        OperatorProfile(0, (4, -1))


def test_instance_shape_checked():
    with pytest.raises(ModelError):
        Instance(SINGLE_GRAPH, (OperatorProfile(0, (1, 2, 3)),))


def test_utility_single_example():
    inst = single()
    out = run_sc_spam(inst.graph, inst.profiles)
    vals = inst.value_ladders
    assert [utility(out, vals, i).utility for i in range(3)] == [7, 2, 0]


def test_owner_array():
    assert np.array_equal(SINGLE_GRAPH.owner, [0, 0, 0, 1, 1, 1, 2, 2, 2])
