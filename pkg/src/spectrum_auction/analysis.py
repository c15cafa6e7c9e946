"""Metrics, the deviation oracle, property checks and the Monte Carlo harness."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .mechanisms import (
    DEFAULT_VCG_CAP,
    InstanceTooLarge,
    check_outcome,
    run_mechanism,
    run_nud_am,
    run_nud_wspam,
    run_sc_spam,
    run_small,
    run_vcg,
)
from .model import AuctionOutcome, BidLadder, Instance, OperatorProfile, utility
from .topology import random_instance

COLUMNS = ("mechanism", "size", "K", "replicate", "seed", "welfare", "utilization",
           "runtime_ms", "violation_count", "error")

DEVIATION_CLASSES = {
    "sc-spam": ("scale", "redistribute", "explicit"),
    "nud-am": ("scale", "redistribute", "explicit"),
    "nud-wspam": ("ladder-raise", "ladder-lower", "explicit"),
}
CERTIFIED = {
    "sc-spam": frozenset({"scale"}),
    "nud-wspam": frozenset({"ladder-raise", "ladder-lower"}),
    "nud-am": frozenset(),
}


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricsRecord:
    mechanism: str
    size: int
    K: int
    replicate: int
    seed: int
    welfare: Optional[int]
    utilization: Optional[int]
    runtime_ms: Optional[float] = None
    violation_count: int = 0
    error: str = ""

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


def ir_violations(mechanism: str, instance: Instance, outcome: AuctionOutcome) -> list[int]:
    """Operators charged more than the bid value the mechanism promises to respect.

    SC-SPAM and NUD-AM bound every per-pass price by the winner's bid sum in
    that pass; NUD-WSPAM bounds the final price by the summed marginal bids of
    the channels won; VCG and SMALL bound each BS price by its bid.
    """
    bad = set()
    if mechanism in ("sc-spam", "nud-am"):
        for r in outcome.trace:
            if r.price is not None and not (0 <= r.price <= r.sigma):
                bad.add(r.winner)
    elif mechanism == "nud-wspam":
        for i, lad in enumerate(instance.bid_ladders):
            alpha = sum(lad.value_of(j, x) for j, x in enumerate(outcome.allocation[i]))
            if not (0 <= outcome.prices[i] <= alpha):
                bad.add(i)
    else:
        for i, (prow, prof) in enumerate(zip(outcome.bs_prices or (), instance.profiles)):
            for j, p in enumerate(prow):
                if not (0 <= p <= prof.bids[j] * max(outcome.allocation[i][j], 1)):
                    bad.add(i)
    return sorted(bad)


# --------------------------------------------------------------------------
# deviation oracle


@dataclass(frozen=True)
class DeviationPlan:
    """What kind of misreport to try.

    ``kind`` is one of ``scale`` (every bid of the operator times one factor),
    ``ladder-raise`` / ``ladder-lower`` (a whole ladder at one BS strictly above
    or below the truth), ``redistribute`` (shift bid between two BSs keeping the
    sum) or ``explicit`` (replacement ``bids`` given by the caller).
    """

    kind: str
    factors: Optional[tuple] = None
    bids: Optional[tuple] = None
    refine: bool = True


@dataclass(frozen=True)
class DeviationReport:
    operator: int
    kind: str
    descriptor: str
    truthful: Fraction
    deviated: Fraction
    certified: bool = True

    @property
    def gain(self) -> Fraction:
        return self.deviated - self.truthful

    @property
    def violation(self) -> bool:
        return self.gain > 0


def _rational_run(mechanism: str, instance: Instance, bids, values, K: int):
    """Run with rational bids by scaling every amount to a common integer unit.

    ``bids`` / ``values`` are per-operator sequences of per-BS ladders of
    Fractions.  Returns the outcome and the scale used.
    """
    dens = [Fraction(x).denominator for op in bids for lad in op for x in lad]
    dens += [Fraction(x).denominator for op in values for lad in op for x in lad]
    q = math.lcm(*dens) if dens else 1

    def ints(op):
        return tuple(tuple(int(Fraction(x) * q) for x in lad) for lad in op)

    g = instance.graph
    if mechanism == "nud-wspam":
        lads = [BidLadder(i, ints(op)) for i, op in enumerate(bids)]
        out = run_nud_wspam(g, lads, instance.demands, K)
    else:
        profs = [OperatorProfile(i, tuple(s[0] for s in ints(op)), None, p.demands)
                 for i, (op, p) in enumerate(zip(bids, instance.profiles))]
        out = run_sc_spam(g, profs) if mechanism == "sc-spam" else run_nud_am(g, profs, K)
    vals = [BidLadder(i, ints(op)) for i, op in enumerate(values)]
    return out, vals, q


def _bid_table(mechanism: str, instance: Instance):
    """Declared bids, truthful bids and valuation ladders as nested Fractions.

    Linear mechanisms carry one bid per BS (a one-entry list); their
    valuation ladders repeat the per-channel value up to the demand, which is
    1 for SC-SPAM.
    """
    if mechanism == "nud-wspam":
        declared = [[list(map(Fraction, s)) for s in lad.steps] for lad in instance.bid_ladders]
        true = [[list(map(Fraction, s)) for s in lad.steps] for lad in instance.value_ladders]
        return declared, true, true
    declared = [[[Fraction(b)] for b in p.bids] for p in instance.profiles]
    truthful = [[[Fraction(v)] for v in p.true_values] for p in instance.profiles]
    if mechanism == "sc-spam":
        return declared, truthful, truthful
    values = [[[Fraction(v)] * d for v, d in zip(p.true_values, p.demands)] for p in instance.profiles]
    return declared, truthful, values


def deviation_utility(mechanism: str, instance: Instance, i: int, dev_bids=None, K: int = 1):
    """Utility of operator ``i`` against its true values.

    ``dev_bids`` replaces operator i's declared amounts (per-BS ladders of
    Fractions); ``None`` means i bids its true values.  Everyone else keeps
    their declared bids.  Returns ``(utility, outcome, scale)``.
    """
    declared, truthful, values = _bid_table(mechanism, instance)
    bids = [list(op) for op in declared]
    bids[i] = truthful[i] if dev_bids is None else dev_bids
    out, vals, q = _rational_run(mechanism, instance, bids, values, K)
    return Fraction(utility(out, vals, i).utility, q), out, q


def _won(mechanism, out, i) -> int:
    return out.channels_of(i)


def _scaled(true_i, f):
    return [[x * f for x in lad] for lad in true_i]


def deviation_oracle(mechanism: str, instance: Instance, operator: int, plan: DeviationPlan,
                     trials: int, rng: np.random.Generator, K: int = 1) -> list[DeviationReport]:
    """Compare operator's truthful utility with its utility under sampled misreports."""
    if mechanism not in DEVIATION_CLASSES:
        raise ValueError(f"no deviation oracle for mechanism {mechanism!r}")
    if plan.kind not in DEVIATION_CLASSES[mechanism]:
        raise ValueError(f"deviation class {plan.kind!r} is incompatible with {mechanism}")
    instance.graph._check_operator(operator)
    certified = plan.kind in CERTIFIED[mechanism]
    truthful, base_out, _ = deviation_utility(mechanism, instance, operator, None, K)
    true_i = _bid_table(mechanism, instance)[1][operator]
    reports = []

    def record(desc, dev):
        u, out, _ = deviation_utility(mechanism, instance, operator, dev, K)
        reports.append(DeviationReport(operator, plan.kind, desc, truthful, u, certified))
        return out

    if plan.kind == "explicit":
        dev = [[Fraction(x) for x in (lad if isinstance(lad, (tuple, list)) else (lad,))] for lad in plan.bids]
        record("explicit " + str(plan.bids), dev)
        return reports

    if plan.kind == "scale":
        if plan.factors is not None:
            factors = [Fraction(f) for f in plan.factors]
            for f in factors:
                record(f"scale {f}", _scaled(true_i, f))
            return reports
        n_refine = trials // 5 if plan.refine else 0
        factors = [Fraction(int(k), 1000) for k in rng.integers(1, 3001, size=trials - n_refine)]
        status = {}
        for f in factors:
            out = record(f"scale {f}", _scaled(true_i, f))
            status[f] = _won(mechanism, out, operator)
        # bisect between neighboring factors whose channel count differs
        todo = sorted(status)
        intervals = [(a, b) for a, b in zip(todo, todo[1:]) if status[a] != status[b]]
        while len(reports) < trials:
            if not intervals:
                f = Fraction(int(rng.integers(1, 3001)), 1000)
                record(f"scale {f}", _scaled(true_i, f))
                continue
            a, b = intervals.pop(0)
            mid = (a + b) / 2
            out = record(f"scale {mid} (boundary)", _scaled(true_i, mid))
            status[mid] = _won(mechanism, out, operator)
            if mid.denominator < 10 ** 7:
                intervals.append((a, mid) if status[a] != status[mid] else (mid, b))
        return reports

    if plan.kind == "redistribute":
        m = len(true_i)
        for _ in range(trials):
            if m < 2:
                record("redistribute (single BS, identity)", [list(l) for l in true_i])
                continue
            a, b = (int(x) for x in rng.choice(m, size=2, replace=False))
            share = Fraction(int(rng.integers(1, 1001)), 1000) * true_i[a][0]
            dev = [list(l) for l in true_i]
            dev[a] = [x - share for x in dev[a]]
            dev[b] = [x + share for x in dev[b]]
            record(f"move {share} from BS {a} to BS {b}", dev)
        return reports

    # ladder classes: a whole ladder at one BS strictly above or strictly below truth
    demands = instance.profiles[operator].demands
    raise_ = plan.kind == "ladder-raise"
    choices = [j for j, d in enumerate(demands) if d > 0
               and (raise_ or all(x > 0 for x in true_i[j][:d]))]
    for _ in range(trials):
        if not choices:
            break
        j = int(rng.choice(choices))
        d = demands[j]
        lad = true_i[j][:d]
        if raise_:
            f = Fraction(int(rng.integers(1001, 3001)), 1000)
            c = Fraction(int(rng.integers(0 if min(lad) > 0 else 1, 1001)), 1000) * max(max(lad), 1)
            new = [x * f + c for x in lad]
        else:
            f = Fraction(int(rng.integers(1, 1000)), 1000)
            c = Fraction(int(rng.integers(0, 1000)), 1000) * (lad[-1] * f)
            new = [x * f - c for x in lad]
        dev = [list(l) for l in true_i]
        dev[j] = new
        record(f"{plan.kind} BS {j} factor {f} shift {c}", dev)
    return reports


@dataclass
class FuzzSummary:
    mechanism: str
    kind: str
    trials: int = 0
    violations: int = 0
    max_gain: Fraction = Fraction(0)
    examples: list = field(default_factory=list)


def fuzz(mechanism: str, kind: str, trials: int, seed: int, sizes=range(6, 22), K: int = 1,
         per_instance: int = 10, regime: Optional[str] = None, degree_range=(0, 2),
         keep: int = 5) -> tuple[FuzzSummary, list[DeviationReport]]:
    """Random instances, random operator, ``per_instance`` deviations each, until ``trials``."""
    if regime is None:
        regime = "single-channel" if mechanism == "sc-spam" else "nonuniform"
    rng = np.random.default_rng(seed)
    summary = FuzzSummary(mechanism, kind)
    reports: list[DeviationReport] = []
    sizes = list(sizes)
    inst_id = 0
    while summary.trials < trials:
        size = sizes[inst_id % len(sizes)]
        inst = random_instance(size, regime, [seed, inst_id], degree_range, K=K if K > 1 else None)
        inst_id += 1
        op = int(rng.integers(inst.graph.num_operators))
        n = min(per_instance, trials - summary.trials)
        batch = deviation_oracle(mechanism, inst, op, DeviationPlan(kind), n, rng, K)
        summary.trials += len(batch)
        for r in batch:
            if r.violation:
                summary.violations += 1
                summary.max_gain = max(summary.max_gain, r.gain)
                if len(summary.examples) < keep:
                    summary.examples.append((inst_id - 1, size, r))
        reports.extend(batch)
        if not batch and inst_id > 100 * trials:  # pragma: no cover
            break
    return summary, reports


def monotonicity_sc_spam(instance: Instance, i: int, factor: Fraction) -> bool:
    """True when a winner that scales its bids up by ``factor`` > 1 still wins."""
    base = run_sc_spam(instance.graph, instance.profiles)
    if not any(base.allocation[i]):
        return True
    declared, _, values = _bid_table("sc-spam", instance)
    bids = [list(op) for op in declared]
    bids[i] = [[b[0] * factor] for b in declared[i]]
    out, _, _ = _rational_run("sc-spam", instance, bids, values, 1)
    return any(out.allocation[i])


def monotonicity_nud_wspam(instance: Instance, i: int, j: int, factor: Fraction, shift: Fraction,
                           K: int) -> bool:
    """True when raising the whole ladder at BS j never lowers any of i's channel counts."""
    base = run_nud_wspam(instance.graph, instance.bid_ladders, instance.demands, K)
    declared, _, values = _bid_table("nud-wspam", instance)
    bids = [list(op) for op in declared]
    bids[i] = [list(l) for l in declared[i]]
    bids[i][j] = [x * factor + shift for x in declared[i][j]]
    out, _, _ = _rational_run("nud-wspam", instance, bids, values, K)
    return all(a >= b for a, b in zip(out.allocation[i], base.allocation[i]))


# --------------------------------------------------------------------------
# Monte Carlo harness


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = "sweep"
    mechanisms: tuple = ("vcg", "sc-spam", "small")
    regime: str = "single-channel"
    sizes: tuple = (6,)
    K: int = 1
    replicates: int = 50
    base_seed: int = 0
    out_dir: Optional[str] = None
    vcg_cap: int = DEFAULT_VCG_CAP
    degree_range: tuple = (0, 2)
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicate count must be at least 1")
        if not self.sizes:
            raise ValueError("at least one topology size required")
        if self.base_seed is None:
            raise ValueError("a seed is required")


def _dispatch(mech: str, inst: Instance, K: int, cap: int) -> AuctionOutcome:
    # multi-channel SC-SPAM is the NUD-AM allocation
    if mech == "sc-spam" and K > 1:
        return replace(run_nud_am(inst.graph, inst.profiles, K), mechanism="sc-spam")
    if mech == "vcg":
        return run_vcg(inst.graph, inst.profiles, cap).to_outcome(inst.graph)
    if mech == "small":
        return run_small(inst.graph, inst.profiles, K)
    return run_mechanism(mech, inst, K, cap)


def _violations(mech: str, inst: Instance, out: AuctionOutcome, K: int) -> int:
    demands = inst.demands if mech != "sc-spam" or K > 1 else None
    name = "nud-am" if mech == "sc-spam" and K > 1 else mech
    return len(check_outcome(inst.graph, out, demands)) + len(ir_violations(name, inst, out))


def _replicate(cfg: ExperimentConfig, size: int, rep: int) -> list[MetricsRecord]:
    seed = cfg.base_seed + rep
    inst = random_instance(size, cfg.regime, [seed, size], cfg.degree_range,
                           K=cfg.K if cfg.regime == "nonuniform" else None)
    rows = []
    for mech in cfg.mechanisms:
        t0 = time.perf_counter()
        try:
            out = _dispatch(mech, inst, cfg.K, cfg.vcg_cap)
        except InstanceTooLarge as exc:
            rows.append(MetricsRecord(mech, size, cfg.K, rep, seed, None, None, None, 0, str(exc)))
            continue
        ms = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
        rows.append(MetricsRecord(mech, size, cfg.K, rep, seed, out.welfare, out.utilization, ms,
                                  _violations(mech, inst, out, cfg.K)))
    return rows


def _replicate_task(args):
    return _replicate(*args)


def monte_carlo(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """Per-replicate metrics for every (size, replicate, mechanism), ordered by index.

    Every mechanism of a replicate runs on the same instance.  The instance
    depends only on ``base_seed + replicate`` and the size, so results do not
    depend on ``workers``.
    """
    tasks = [(cfg, size, rep) for size in cfg.sizes for rep in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    else:
        chunks = [_replicate(*t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


@dataclass(frozen=True)
class Aggregate:
    mechanism: str
    size: int
    K: int
    n: int
    welfare_mean: float
    welfare_std: float
    utilization_mean: float
    utilization_std: float
    runtime_ms_mean: Optional[float]
    violation_count: int
    errors: int

    COLUMNS = ("mechanism", "size", "K", "n", "welfare_mean", "welfare_std", "utilization_mean",
               "utilization_std", "runtime_ms_mean", "violation_count", "errors")

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.COLUMNS)


def aggregate(rows: Sequence[MetricsRecord]) -> list[Aggregate]:
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.mechanism, r.size, r.K), []).append(r)
    out = []
    for (mech, size, K), rs in groups.items():
        ok = [r for r in rs if not r.error]
        w = np.array([r.welfare for r in ok], dtype=float)
        u = np.array([r.utilization for r in ok], dtype=float)
        rt = [r.runtime_ms for r in ok if r.runtime_ms is not None]
        out.append(Aggregate(
            mech, size, K, len(ok),
            float(w.mean()) if len(w) else math.nan, float(w.std()) if len(w) else math.nan,
            float(u.mean()) if len(u) else math.nan, float(u.std()) if len(u) else math.nan,
            float(np.mean(rt)) if rt else None,
            sum(r.violation_count for r in rs), len(rs) - len(ok)))
    return out


# --------------------------------------------------------------------------
# channel requirement


@dataclass(frozen=True)
class ChannelRequirement:
    required: Optional[int]
    utilization_curve: tuple[int, ...]


def channels_to_satisfy(graph, ladders: Sequence[BidLadder], demands, K_max: int) -> ChannelRequirement:
    """Smallest K for which NUD-WSPAM meets every demand, plus utilization for K = 1..K_max.

    The allocation phase for K channels is the first K passes of the run with
    ``K_max`` channels, so one run gives the whole curve.
    """
    out = run_nud_wspam(graph, ladders, demands, K_max)
    flat = (d for row in demands for d in row)
    active_demand = sum(d for v, d in zip(graph.vertices, flat) if graph.is_active(v))
    curve, used, required = [], 0, None
    for k in range(K_max):
        if k < len(out.assignments):
            used += len(out.assignments[k])
        curve.append(used)
        if required is None and used == active_demand:
            required = k + 1
    if active_demand == 0:
        required = 0
    return ChannelRequirement(required, tuple(curve))
