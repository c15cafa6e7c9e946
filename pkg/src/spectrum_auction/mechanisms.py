"""Auction mechanisms: SC-SPAM, NUD-AM, NUD-WSPAM, brute-force VCG and SMALL.

All mechanisms are pure functions of their inputs and return an
:class:`~spectrum_auction.model.AuctionOutcome` (VCG additionally exposes a
:class:`VcgOutcome`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .model import (
    AuctionOutcome,
    BidLadder,
    ConflictGraph,
    Instance,
    ModelError,
    OperatorProfile,
    RoundRecord,
)

MECHANISMS = ("sc-spam", "nud-am", "nud-wspam", "vcg", "small")
DEFAULT_VCG_CAP = 22


class InstanceTooLarge(ValueError):
    """Brute-force VCG was asked to enumerate more vertices than its cap."""


@dataclass(frozen=True)
class DemandState:
    """Remaining per-BS demand after an allocation phase."""

    remaining: tuple[tuple[int, ...], ...]

    @property
    def unsatisfied(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(j for j, d in enumerate(row) if d > 0) for row in self.remaining)

    def final_graph(self, graph: ConflictGraph) -> ConflictGraph:
        return graph.with_active(d > 0 for row in self.remaining for d in row)


@dataclass(frozen=True)
class FinalCriticalResult:
    subject_operator: int
    chi: Mapping[int, int]
    gamma: Mapping[int, frozenset]
    critical_operator: Optional[int]
    critical_valuation: int


@dataclass(frozen=True)
class VcgOutcome:
    optimal_allocation: tuple[int, ...]
    optimal_welfare: int
    bs_price_flat: tuple[int, ...]
    prices: tuple[int, ...]
    allocation: tuple[tuple[int, ...], ...]
    bs_prices: tuple[tuple[int, ...], ...]

    @property
    def welfare(self) -> int:
        return self.optimal_welfare

    @property
    def utilization(self) -> int:
        return sum(self.optimal_allocation)

    def to_outcome(self, graph: ConflictGraph) -> AuctionOutcome:
        chosen = frozenset(v for v, x in zip(graph.vertices, self.optimal_allocation) if x)
        return AuctionOutcome("vcg", self.allocation, self.prices, self.optimal_welfare,
                              (chosen,), (), self.bs_prices)


def _flat(graph: ConflictGraph, rows: Sequence[Sequence[int]]) -> np.ndarray:
    out = np.zeros(graph.num_vertices, dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != graph.bs_counts[i]:
            raise ModelError(f"operator {i}: {len(row)} values for {graph.bs_counts[i]} base stations")
        off = graph.offsets[i]
        out[off:off + len(row)] = row
    return out


def _unflat(graph: ConflictGraph, arr) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(x) for x in arr[o:o + m]) for o, m in zip(graph.offsets, graph.bs_counts))


def _check_profiles(graph: ConflictGraph, profiles: Sequence[OperatorProfile]) -> None:
    if len(profiles) != graph.num_operators:
        raise ModelError("one profile per operator required")
    for i, p in enumerate(profiles):
        if p.num_base_stations != graph.bs_counts[i]:
            raise ModelError(f"operator {i}: profile does not match the graph")


def _channel_pass(graph, bids, eligible, channel, trace, with_prices=True):
    alloc, winners, sigmas, prices, critical = _kernels.sc_spam_pass(
        graph.adjacency, graph.owner, graph.num_operators, bids, eligible)
    owner = graph.owner
    offsets = graph.offsets
    for r, w in enumerate(winners):
        w = int(w)
        served = tuple(int(k - offsets[w]) for k in np.flatnonzero(alloc & (owner == w)))
        crit = int(critical[r])
        trace.append(RoundRecord(channel, r, w, int(sigmas[r]),
                                 int(prices[r]) if with_prices else None,
                                 crit if crit >= 0 else None, served))
    return alloc, winners, prices


def run_sc_spam(graph: ConflictGraph, profiles: Sequence[OperatorProfile]) -> AuctionOutcome:
    """Single-channel auction; every active BS is treated as demanding one channel."""
    _check_profiles(graph, profiles)
    bids = _flat(graph, [p.bids for p in profiles])
    trace: list[RoundRecord] = []
    alloc, winners, prices = _channel_pass(graph, bids, graph.active_array.copy(), 0, trace)
    price = [0] * graph.num_operators
    for w, p in zip(winners, prices):
        price[int(w)] += int(p)
    chosen = frozenset(graph.vertices[k] for k in np.flatnonzero(alloc))
    return AuctionOutcome("sc-spam", _unflat(graph, alloc.astype(np.int64)), tuple(price),
                          int(bids[alloc].sum()), (chosen,), tuple(trace))


def run_nud_am(graph: ConflictGraph, profiles: Sequence[OperatorProfile], K: int) -> AuctionOutcome:
    """Channel-by-channel SC-SPAM with per-BS demand and linear per-channel bids.

    Prices are charged in every channel pass and summed per operator.
    """
    _check_profiles(graph, profiles)
    bids = _flat(graph, [p.bids for p in profiles])
    remaining = _flat(graph, [p.demands for p in profiles])
    if (remaining < 0).any():
        raise ModelError("negative demand")
    n = graph.num_operators
    counts = np.zeros(graph.num_vertices, dtype=np.int64)
    price = [0] * n
    trace: list[RoundRecord] = []
    assignments = []
    base = graph.active_array
    for ch in range(max(int(K), 0)):
        eligible = base & (remaining > 0)
        if not eligible.any():
            break
        alloc, winners, prices = _channel_pass(graph, bids, eligible, ch, trace)
        for w, p in zip(winners, prices):
            price[int(w)] += int(p)
        counts += alloc
        remaining -= alloc
        assignments.append(frozenset(graph.vertices[k] for k in np.flatnonzero(alloc)))
    return AuctionOutcome("nud-am", _unflat(graph, counts), tuple(price),
                          int((bids * counts).sum()), tuple(assignments), tuple(trace))


def _ladder_table(graph: ConflictGraph, ladders: Sequence[BidLadder], demands) -> np.ndarray:
    if len(ladders) != graph.num_operators:
        raise ModelError("one ladder per operator required")
    depth = max([len(s) for lad in ladders for s in lad.steps] + [1])
    table = np.zeros((graph.num_vertices, depth + 1), dtype=np.int64)
    for i, (lad, dem) in enumerate(zip(ladders, demands)):
        if len(lad.steps) != graph.bs_counts[i]:
            raise ModelError(f"operator {i}: ladder does not match the graph")
        lad.check_demands(dem)
        off = graph.offsets[i]
        for j, s in enumerate(lad.steps):
            table[off + j, :len(s)] = s
    return table


def final_critical(graph: ConflictGraph, i: int, state: DemandState,
                   final_bids: Sequence[Sequence[int]]) -> FinalCriticalResult:
    """Critical operator of ``i`` over BSs left unsatisfied after allocation.

    The neighborhood of ``i`` is taken in the full graph, not the working one.
    """
    graph._check_operator(i)
    lo = graph.offsets[i]
    hi = lo + graph.bs_counts[i]
    nbr = graph.adjacency[lo:hi].any(axis=0) if hi > lo else np.zeros(graph.num_vertices, bool)
    unsat = state.unsatisfied
    gamma: dict[int, frozenset] = {}
    chi: dict[int, int] = {}
    for k in np.flatnonzero(nbr):
        op, bs = graph.vertices[k]
        if op == i:
            continue
        gamma.setdefault(op, frozenset())
        chi.setdefault(op, 0)
        if bs in unsat[op]:
            gamma[op] = gamma[op] | {bs}
            chi[op] += int(final_bids[op][bs])
    if not chi:
        return FinalCriticalResult(i, chi, gamma, None, 0)
    best = max(sorted(chi), key=lambda j: (chi[j], -j))
    return FinalCriticalResult(i, chi, gamma, best, chi[best])


def run_nud_wspam(graph: ConflictGraph, ladders: Sequence[BidLadder],
                  demands: Sequence[Sequence[int]], K: int) -> AuctionOutcome:
    """Allocate K channels greedily on current marginal bids, then price once.

    No price is charged during the channel passes.  After the last pass each
    operator holding at least one channel pays the valuation of its critical
    operator computed over still-unsatisfied BSs with their next marginal bids.
    """
    table = _ladder_table(graph, ladders, demands)
    remaining = _flat(graph, demands)
    counts = np.zeros(graph.num_vertices, dtype=np.int64)
    rows = np.arange(graph.num_vertices)
    trace: list[RoundRecord] = []
    assignments = []
    welfare = 0
    base = graph.active_array
    for ch in range(max(int(K), 0)):
        eligible = base & (remaining > 0)
        if not eligible.any():
            break
        bids = table[rows, counts]
        alloc, _, _ = _channel_pass(graph, bids, eligible, ch, trace, with_prices=False)
        welfare += int(bids[alloc].sum())
        counts += alloc
        remaining -= alloc
        assignments.append(frozenset(graph.vertices[k] for k in np.flatnonzero(alloc)))
    state = DemandState(_unflat(graph, np.where(base, remaining, 0)))
    final_bids = _unflat(graph, table[rows, counts])
    allocation = _unflat(graph, counts)
    price = []
    for i in range(graph.num_operators):
        if sum(allocation[i]) == 0:
            price.append(0)
        else:
            price.append(final_critical(graph, i, state, final_bids).critical_valuation)
    return AuctionOutcome("nud-wspam", allocation, tuple(price), welfare,
                          tuple(assignments), tuple(trace))


def nud_wspam_demand_state(graph: ConflictGraph, demands, outcome: AuctionOutcome) -> DemandState:
    return DemandState(tuple(tuple(d - x if graph.is_active((i, j)) else 0
                                   for j, (d, x) in enumerate(zip(drow, xrow)))
                             for i, (drow, xrow) in enumerate(zip(demands, outcome.allocation))))


def run_vcg(graph: ConflictGraph, profiles: Sequence[OperatorProfile],
            cap: int = DEFAULT_VCG_CAP) -> VcgOutcome:
    """Welfare-optimal single-channel allocation with per-BS Clarke pivot prices."""
    _check_profiles(graph, profiles)
    m = graph.num_vertices
    if m > cap:
        raise InstanceTooLarge(f"instance too large for brute-force VCG: {m} base stations > cap {cap}")
    bids = _flat(graph, [p.bids for p in profiles])
    act = graph.active_array
    idx = np.flatnonzero(act)
    adj = graph.adjacency
    pos = {int(k): t for t, k in enumerate(idx)}
    nbr_masks = np.zeros(len(idx), dtype=np.int64)
    for t, k in enumerate(idx):
        for u in np.flatnonzero(adj[k] & act):
            nbr_masks[t] |= np.int64(1) << pos[int(u)]
    best_mask, best, without = _kernels.brute_force_mwis(bids[idx], nbr_masks)
    x = np.zeros(m, dtype=np.int64)
    rho = np.zeros(m, dtype=np.int64)
    for t, k in enumerate(idx):
        x[k] = (best_mask >> t) & 1
        # best welfare of the others without k, minus their welfare at the optimum
        rho[k] = int(without[t]) - (best - int(x[k] * bids[k]))
    bs_prices = _unflat(graph, rho)
    return VcgOutcome(tuple(int(v) for v in x), int(best), tuple(int(r) for r in rho),
                      tuple(sum(r) for r in bs_prices), _unflat(graph, x), bs_prices)


def small_groups(graph: ConflictGraph, profiles: Sequence[OperatorProfile],
                 eligible: Optional[np.ndarray] = None) -> list[list[int]]:
    """Partition eligible BSs into independent groups by greedy coloring.

    Vertices are taken in descending bid order (ties: lower operator, then
    lower BS) and placed in the first group they do not conflict with.
    """
    bids = _flat(graph, [p.bids for p in profiles])
    if eligible is None:
        eligible = graph.active_array
    order = sorted(np.flatnonzero(eligible), key=lambda k: (-bids[k], graph.vertices[k]))
    adj = graph.adjacency
    groups: list[list[int]] = []
    for k in order:
        for g in groups:
            if not adj[k, g].any():
                g.append(int(k))
                break
        else:
            groups.append([int(k)])
    return groups


def _small_group_value(members, bids) -> int:
    low = min(bids[k] for k in members)
    return sum(1 for k in members if bids[k] > low) * int(low)


def run_small(graph: ConflictGraph, profiles: Sequence[OperatorProfile], K: int = 1) -> AuctionOutcome:
    """SMALL baseline: one channel per group, the group's lowest bidder is sacrificed.

    Each channel goes to the highest-valued group not yet served (ties: lower
    group index).  Served members pay the group's minimum bid.
    """
    _check_profiles(graph, profiles)
    bids = _flat(graph, [p.bids for p in profiles])
    dem = _flat(graph, [p.demands for p in profiles])
    eligible = graph.active_array & (dem > 0)
    groups = small_groups(graph, profiles, eligible)
    values = [_small_group_value(g, bids) for g in groups]
    order = sorted(range(len(groups)), key=lambda t: (-values[t], t))
    counts = np.zeros(graph.num_vertices, dtype=np.int64)
    bs_price = np.zeros(graph.num_vertices, dtype=np.int64)
    trace: list[RoundRecord] = []
    assignments = []
    for ch, t in enumerate(order[:max(int(K), 0)]):
        members = groups[t]
        low = min(bids[k] for k in members)
        victim = min((k for k in members if bids[k] == low), key=lambda k: graph.vertices[k])
        served = [k for k in members if k != victim]
        for k in served:
            counts[k] += 1
            bs_price[k] += low
        assignments.append(frozenset(graph.vertices[k] for k in served))
        for op in sorted({int(graph.owner[k]) for k in served}):
            mine = tuple(graph.vertices[k][1] for k in served if graph.owner[k] == op)
            trace.append(RoundRecord(ch, t, op, values[t], int(low) * len(mine), None, mine))
    bs_prices = _unflat(graph, bs_price)
    return AuctionOutcome("small", _unflat(graph, counts), tuple(sum(r) for r in bs_prices),
                          int((bids * counts).sum()), tuple(assignments), tuple(trace), bs_prices)


def run_mechanism(name: str, instance: Instance, K: int = 1,
                  vcg_cap: int = DEFAULT_VCG_CAP) -> AuctionOutcome:
    """Dispatch by CLI name; VCG results are converted to an AuctionOutcome."""
    g, profs = instance.graph, instance.profiles
    if name == "sc-spam":
        return run_sc_spam(g, profs)
    if name == "nud-am":
        return run_nud_am(g, profs, K)
    if name == "nud-wspam":
        return run_nud_wspam(g, instance.bid_ladders, instance.demands, K)
    if name == "vcg":
        return run_vcg(g, profs, vcg_cap).to_outcome(g)
    if name == "small":
        return run_small(g, profs, K)
    raise ValueError(f"unknown mechanism {name!r}; expected one of {', '.join(MECHANISMS)}")


def check_outcome(graph: ConflictGraph, outcome: AuctionOutcome,
                  demands: Optional[Sequence[Sequence[int]]] = None) -> list[str]:
    """Invariant breaches of an outcome (empty list when sound)."""
    problems = []
    for ch, chosen in enumerate(outcome.assignments):
        if not graph.is_independent(chosen):
            problems.append(f"channel {ch}: allocated base stations conflict")
    if demands is not None:
        for i, (row, drow) in enumerate(zip(outcome.allocation, demands)):
            for j, (x, d) in enumerate(zip(row, drow)):
                if x > d:
                    problems.append(f"operator {i} BS {j}: {x} channels exceed demand {d}")
    if any(p < 0 for p in outcome.prices):
        problems.append("negative price")
    return problems


def outcome_to_dict(outcome: AuctionOutcome, K: Optional[int] = None) -> dict:
    doc = {
        "mechanism": outcome.mechanism,
        "allocation": [list(row) for row in outcome.allocation],
        "prices": list(outcome.prices),
        "welfare": outcome.welfare,
        "utilization": outcome.utilization,
        "channels_used": outcome.channels_used,
        "assignments": [sorted([op, bs] for op, bs in ch) for ch in outcome.assignments],
        "trace": [{"channel": r.channel, "round": r.round, "winner": r.winner, "sigma": r.sigma,
                   "price": r.price, "critical_operator": r.critical_operator,
                   "base_stations": list(r.base_stations)} for r in outcome.trace],
    }
    if K is not None:
        doc["K"] = K
    if outcome.bs_prices is not None:
        doc["bs_prices"] = [list(row) for row in outcome.bs_prices]
    return doc


def outcome_from_dict(doc: dict) -> AuctionOutcome:
    trace = tuple(RoundRecord(r["channel"], r["round"], r["winner"], r["sigma"], r["price"],
                              r["critical_operator"], tuple(r["base_stations"])) for r in doc["trace"])
    bs = doc.get("bs_prices")
    return AuctionOutcome(doc["mechanism"], tuple(tuple(r) for r in doc["allocation"]),
                          tuple(doc["prices"]), doc["welfare"],
                          tuple(frozenset((op, b) for op, b in ch) for ch in doc["assignments"]),
                          trace, None if bs is None else tuple(tuple(r) for r in bs))
