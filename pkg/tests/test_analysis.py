from fractions import Fraction

import numpy as np
import pytest

from spectrum_auction import random_instance, run_nud_wspam, run_sc_spam
from spectrum_auction.analysis import (
    COLUMNS,
    DeviationPlan,
    ExperimentConfig,
    aggregate,
    channels_to_satisfy,
    deviation_oracle,
    deviation_utility,
    fuzz,
    ir_violations,
    monotonicity_nud_wspam,
    monotonicity_sc_spam,
    monte_carlo,
)
from spectrum_auction.fixtures import LINEAR_DEVIATION, LADDER_DEVIATION

rng = np.random.default_rng


# --- deviation oracle on the worked examples


def test_single_inflating_b_loses(single_ex):
    (rep,) = deviation_oracle("sc-spam", single_ex, 1, DeviationPlan("scale", factors=(Fraction(28, 22),)), 1, rng(0))
    assert rep.truthful == 2 and rep.deviated == -3
    assert not rep.violation


def test_unit_factor_is_neutral(single_ex):
    for op in range(3):
        (rep,) = deviation_oracle("sc-spam", single_ex, op, DeviationPlan("scale", factors=(1,)), 1, rng(0))
        assert rep.gain == 0


def test_linear_documented_deviation(linear_ex):
    (rep,) = deviation_oracle("nud-am", linear_ex, 1, DeviationPlan("explicit", bids=LINEAR_DEVIATION), 1, rng(0), 2)
    assert (rep.truthful, rep.deviated, rep.gain) == (5, 15, 10)
    assert rep.violation and not rep.certified


def test_ladder_documented_deviation_is_neutral(ladder_ex):
    (rep,) = deviation_oracle("nud-wspam", ladder_ex, 1, DeviationPlan("explicit", bids=LADDER_DEVIATION), 1, rng(0), 2)
    assert rep.gain == 0


def test_incompatible_class(single_ex):
    with pytest.raises(ValueError):
        deviation_oracle("sc-spam", single_ex, 0, DeviationPlan("ladder-raise"), 1, rng(0))
    with pytest.raises(ValueError):
        deviation_oracle("vcg", single_ex, 0, DeviationPlan("scale"), 1, rng(0))


def test_redistribute_keeps_sum(single_ex):
    reps = deviation_oracle("sc-spam", single_ex, 0, DeviationPlan("redistribute"), 20, rng(1))
    assert len(reps) == 20 and all(not r.certified for r in reps)


def test_ladder_classes_stay_in_class(ladder_ex):
    for kind in ("ladder-raise", "ladder-lower"):
        reps = deviation_oracle("nud-wspam", ladder_ex, 0, DeviationPlan(kind), 30, rng(2), 2)
        assert len(reps) == 30 and all(r.certified for r in reps)


def test_scale_oracle_counts_trials(single_ex):
    reps = deviation_oracle("sc-spam", single_ex, 1, DeviationPlan("scale"), 50, rng(3))
    assert len(reps) == 50
    assert any("boundary" in r.descriptor for r in reps)


# --- golden counterexamples: the guarantees do not hold for these inputs


def test_scale_manipulation_on_single_example(single_ex):
    """C, unallocated when truthful, inflates by 71/50, wins every BS and pays only 17 of its 21."""
    truthful, _, _ = deviation_utility("sc-spam", single_ex, 2)
    deviated, out, q = deviation_utility("sc-spam", single_ex, 2, [[Fraction(71, 50) * b] for b in (10, 8, 3)])
    assert truthful == 0
    assert out.allocation[2] == (1, 1, 1)
    assert Fraction(out.prices[2], q) == 17
    assert deviated == 4


def test_scale_manipulation_by_shrinking():
    """C shrinks by 0.676: B now wins first, clears C's costly neighbor, and C gets C2 for free."""
    inst = random_instance(6, "single-channel", [7, 0])
    truthful, out, _ = deviation_utility("sc-spam", inst, 2)
    assert truthful == 4766 and out.prices[2] == 35814
    deviated, out, q = deviation_utility(
        "sc-spam", inst, 2, [[Fraction(676, 1000) * b] for b in inst.profiles[2].bids])
    assert [r.winner for r in out.trace] == [1, 2]
    assert out.prices[2] == 0
    assert deviated == 20535


def test_nud_wspam_price_above_alpha():
    """A wins one channel at A2 but is charged B1's final bid through the unserved A1."""
    inst = random_instance(6, "nonuniform", [49, 6], K=3)
    out = run_nud_wspam(inst.graph, inst.bid_ladders, inst.demands, 3)
    assert out.allocation[0] == (0, 1)
    alpha = inst.bid_ladders[0].value_of(1, 1)
    assert out.prices[0] > alpha
    assert ir_violations("nud-wspam", inst, out) == [0]


def test_nud_wspam_raise_lowers_a_count():
    inst = random_instance(7, "nonuniform", [136, 7], K=3)
    assert not monotonicity_nud_wspam(inst, 2, 1, Fraction(2), Fraction(0), 3)


# --- properties that do hold


@pytest.mark.parametrize("seed", range(15))
def test_sc_spam_monotone_and_ir(seed):
    inst = random_instance(6 + seed, "single-channel", [seed, 99])
    out = run_sc_spam(inst.graph, inst.profiles)
    assert ir_violations("sc-spam", inst, out) == []
    for i in out.winners():
        assert monotonicity_sc_spam(inst, i, Fraction(3, 2))


def test_fuzz_is_reproducible():
    a, ra = fuzz("sc-spam", "scale", 60, 5, sizes=range(6, 9))
    b, rb = fuzz("sc-spam", "scale", 60, 5, sizes=range(6, 9))
    assert a.trials == 60 and ra == rb
    assert (a.violations, a.max_gain) == (b.violations, b.max_gain)


# --- Monte Carlo harness


def test_monte_carlo_rows_and_determinism():
    cfg = ExperimentConfig(mechanisms=("vcg", "sc-spam", "small"), sizes=(6, 8), replicates=3, base_seed=10)
    rows = monte_carlo(cfg)
    assert len(rows) == 2 * 3 * 3
    assert rows == monte_carlo(cfg)
    assert all(r.runtime_ms is None for r in rows)
    assert set(COLUMNS) <= set(vars(rows[0]))


def test_monte_carlo_workers_match_serial():
    cfg = ExperimentConfig(mechanisms=("sc-spam",), sizes=(9,), replicates=4, base_seed=3)
    par = ExperimentConfig(mechanisms=("sc-spam",), sizes=(9,), replicates=4, base_seed=3, workers=2)
    assert monte_carlo(cfg) == monte_carlo(par)


def test_vcg_over_cap_is_recorded_not_raised():
    cfg = ExperimentConfig(mechanisms=("vcg",), sizes=(30,), replicates=1)
    (row,) = monte_carlo(cfg)
    assert row.error and row.welfare is None


def test_aggregate_means():
    cfg = ExperimentConfig(mechanisms=("sc-spam", "small"), sizes=(12,), replicates=5)
    rows = monte_carlo(cfg)
    aggs = {a.mechanism: a for a in aggregate(rows)}
    want = np.mean([r.welfare for r in rows if r.mechanism == "small"])
    assert aggs["small"].welfare_mean == pytest.approx(want)
    assert aggs["sc-spam"].n == 5


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(replicates=0)
    with pytest.raises(ValueError):
        ExperimentConfig(sizes=())


def test_channels_to_satisfy():
    inst = random_instance(60, "nonuniform", 2)
    req = channels_to_satisfy(inst.graph, inst.bid_ladders, inst.demands, 30)
    total = sum(d for row in inst.demands for d in row)
    assert req.required is not None
    assert req.utilization_curve[req.required - 1] == total
    assert all(a <= b for a, b in zip(req.utilization_curve, req.utilization_curve[1:]))
    if req.required > 1:
        assert req.utilization_curve[req.required - 2] < total
