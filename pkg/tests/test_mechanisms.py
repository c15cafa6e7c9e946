import pytest
from _reference import enumerate_vcg

from spectrum_auction import random_instance
from spectrum_auction.fixtures import SINGLE_GRAPH
from spectrum_auction.mechanisms import (
    DemandState,
    InstanceTooLarge,
    check_outcome,
    final_critical,
    outcome_from_dict,
    outcome_to_dict,
    run_mechanism,
    run_nud_am,
    run_nud_wspam,
    run_sc_spam,
    run_small,
    run_vcg,
    small_groups,
)
from spectrum_auction.model import BidLadder, ConflictGraph, ModelError, OperatorProfile


# --- SC-SPAM


def test_sc_spam_single_example(single_ex):
    out = run_sc_spam(single_ex.graph, single_ex.profiles)
    assert out.prices == (18, 3, 0)
    assert out.allocation == ((1, 1, 1), (0, 0, 1), (0, 0, 0))
    assert out.welfare == 30
    assert [r.winner for r in out.trace] == [0, 1]


def test_sc_spam_tie_goes_to_lowest_id():
    g = ConflictGraph((1, 1), frozenset({((0, 0), (1, 0))}))
    out = run_sc_spam(g, [OperatorProfile(0, (5,)), OperatorProfile(1, (5,))])
    assert out.allocation == ((1,), (0,))
    assert out.prices == (5, 0)


def test_sc_spam_isolated_winner_pays_nothing():
    g = ConflictGraph((2, 1), frozenset())
    out = run_sc_spam(g, [OperatorProfile(0, (3, 4)), OperatorProfile(1, (9,))])
    assert out.prices == (0, 0) and out.utilization == 3


def test_sc_spam_rejects_mismatched_profiles():
    with pytest.raises(ModelError):
        run_sc_spam(SINGLE_GRAPH, [OperatorProfile(0, (1, 1))])


@pytest.mark.parametrize("seed", range(20))
def test_sc_spam_outcome_valid(seed):
    inst = random_instance(6 + seed, "single-channel", seed)
    out = run_sc_spam(inst.graph, inst.profiles)
    assert check_outcome(inst.graph, out, inst.demands) == []


# --- NUD-AM


def test_nud_am_linear_example(linear_ex):
    out = run_nud_am(linear_ex.graph, linear_ex.profiles, 2)
    assert out.prices == (18, 31, 0)
    assert out.allocation == ((1, 1, 1, 1), (1, 1, 1, 1), (1, 1))


@pytest.mark.parametrize("seed", range(10))
def test_nud_am_single_channel_matches_sc_spam(seed):
    inst = random_instance(12, "single-channel", seed)
    a = run_nud_am(inst.graph, inst.profiles, 1)
    b = run_sc_spam(inst.graph, inst.profiles)
    assert (a.allocation, a.prices, a.welfare) == (b.allocation, b.prices, b.welfare)


def test_nud_am_respects_demand():
    inst = random_instance(30, "nonuniform", 3, K=3)
    out = run_nud_am(inst.graph, inst.profiles, 3)
    assert check_outcome(inst.graph, out, inst.demands) == []


def test_nud_am_zero_channels(linear_ex):
    out = run_nud_am(linear_ex.graph, linear_ex.profiles, 0)
    assert out.utilization == 0 and out.prices == (0, 0, 0)


# --- NUD-WSPAM


def test_nud_wspam_ladder_example(ladder_ex):
    out = run_nud_wspam(ladder_ex.graph, ladder_ex.ladders, ladder_ex.demands, 2)
    assert out.prices == (7, 11, 3)
    assert all(r.price is None for r in out.trace)


def test_nud_wspam_edgeless_prices_zero():
    g = ConflictGraph((2, 2), frozenset())
    lads = [BidLadder(0, ((9, 5), (4,))), BidLadder(1, ((3, 2, 1), (7,)))]
    out = run_nud_wspam(g, lads, ((2, 1), (3, 1)), 2)
    assert out.prices == (0, 0)
    assert out.allocation == ((2, 1), (2, 1))


def test_final_critical_uses_original_neighborhood(ladder_ex):
    out = run_nud_wspam(ladder_ex.graph, ladder_ex.ladders, ladder_ex.demands, 2)
    remaining = tuple(tuple(d - x for d, x in zip(dr, xr)) for dr, xr in zip(ladder_ex.demands, out.allocation))
    state = DemandState(remaining)
    final = [[lad.steps[j][x] if x < len(lad.steps[j]) and d > x else 0
              for j, (x, d) in enumerate(zip(xr, dr))]
             for lad, xr, dr in zip(ladder_ex.ladders, out.allocation, ladder_ex.demands)]
    res = final_critical(ladder_ex.graph, 0, state, final)
    assert res.critical_valuation == 7


def test_nud_wspam_short_ladder_rejected():
    g = ConflictGraph((1, 1), frozenset())
    with pytest.raises(ModelError):
        run_nud_wspam(g, [BidLadder(0, ((5,),)), BidLadder(1, ((5,),))], ((2,), (1,)), 2)


@pytest.mark.parametrize("seed", range(10))
def test_nud_wspam_outcome_valid(seed):
    inst = random_instance(20 + seed, "nonuniform", seed, K=3)
    out = run_nud_wspam(inst.graph, inst.bid_ladders, inst.demands, 3)
    assert check_outcome(inst.graph, out, inst.demands) == []


# --- VCG


@pytest.mark.parametrize("seed", range(30))
def test_vcg_matches_enumerator(seed):
    inst = random_instance(3 + seed % 10, "single-channel", seed)
    v = run_vcg(inst.graph, inst.profiles)
    best, rho = enumerate_vcg(inst.graph, inst.profiles)
    assert v.optimal_welfare == best
    for (i, j), r in rho.items():
        assert v.bs_prices[i][j] == r
        assert 0 <= r <= inst.profiles[i].bids[j]


def test_vcg_single_example(single_ex):
    v = run_vcg(single_ex.graph, single_ex.profiles)
    best, _ = enumerate_vcg(single_ex.graph, single_ex.profiles)
    assert v.welfare == best == 40
    assert single_ex.graph.is_independent(v.to_outcome(single_ex.graph).assignments[0])


def test_vcg_cap():
    inst = random_instance(24, "single-channel", 0)
    with pytest.raises(InstanceTooLarge):
        run_vcg(inst.graph, inst.profiles)
    with pytest.raises(InstanceTooLarge):
        run_vcg(inst.graph, inst.profiles, cap=10)


def test_vcg_loser_pays_nothing(single_ex):
    v = run_vcg(single_ex.graph, single_ex.profiles)
    for x, p in zip(v.optimal_allocation, v.bs_price_flat):
        if not x:
            assert p == 0


# --- SMALL


def test_small_groups_are_independent(single_ex):
    g = single_ex.graph
    for grp in small_groups(g, single_ex.profiles):
        assert g.is_independent(g.vertices[k] for k in grp)


def test_small_sacrifices_minimum_bidder():
    g = ConflictGraph((2, 1), frozenset())
    out = run_small(g, [OperatorProfile(0, (7, 4)), OperatorProfile(1, (9,))])
    # one group {A1, A2, B1}; A2 bids the minimum and is dropped, the rest pay 4
    assert out.allocation == ((1, 0), (1,))
    assert out.bs_prices == ((4, 0), (4,))
    assert out.welfare == 16


def test_small_tie_sacrifice_lowest_operator():
    g = ConflictGraph((1, 1), frozenset())
    out = run_small(g, [OperatorProfile(0, (5,)), OperatorProfile(1, (5,))])
    assert out.allocation == ((0,), (1,))
    assert out.prices == (0, 5)


def test_small_one_channel_per_group():
    g = ConflictGraph((1, 1), frozenset({((0, 0), (1, 0))}))
    out = run_small(g, [OperatorProfile(0, (5,), None, (2,)), OperatorProfile(1, (3,), None, (2,))], K=5)
    # two singleton groups, each sacrifices its only member
    assert out.utilization == 0


@pytest.mark.parametrize("seed", range(10))
def test_small_outcome_valid(seed):
    inst = random_instance(30, "uniform-demand-2", seed)
    out = run_small(inst.graph, inst.profiles, 3)
    assert check_outcome(inst.graph, out, inst.demands) == []
    for prow, prof, xrow in zip(out.bs_prices, inst.profiles, out.allocation):
        for p, b, x in zip(prow, prof.bids, xrow):
            assert 0 <= p <= b * x


# --- dispatch and serialization


@pytest.mark.parametrize("mech", ["sc-spam", "nud-am", "nud-wspam", "vcg", "small"])
def test_run_mechanism_and_roundtrip(mech, ladder_ex):
    out = run_mechanism(mech, ladder_ex, 2)
    back = outcome_from_dict(outcome_to_dict(out, 2))
    assert back.allocation == out.allocation and back.prices == out.prices
    assert back.trace == out.trace


def test_unknown_mechanism(ladder_ex):
    with pytest.raises(ValueError):
        run_mechanism("first-price", ladder_ex, 1)
