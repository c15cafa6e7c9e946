"""Bundled worked examples.

Only aggregate quantities of the examples are known (bid sums, prices,
utilities, which BSs win in which pass); the per-BS bids of the single-channel
example and the edge sets of both topologies were chosen to reproduce every
one of those aggregates.  :func:`load_fixture` re-runs the checks on every
load and raises :class:`FixtureMismatch` if any of them drifts.

Operators are numbered A=0, B=1, C=2 and base stations A1=0, A2=1, ...
"""

from __future__ import annotations

from .mechanisms import run_nud_am, run_nud_wspam, run_sc_spam
from .model import BidLadder, ConflictGraph, Instance, OperatorProfile, utility

NAMES = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class FixtureMismatch(AssertionError):
    pass


def _v(label: str) -> tuple[int, int]:
    return NAMES.index(label[0]), int(label[1:]) - 1


def _edges(*pairs: str) -> frozenset:
    return frozenset((_v(a), _v(b)) for a, b in (p.split("-") for p in pairs))


def label(v: tuple[int, int]) -> str:
    return f"{NAMES[v[0]]}{v[1] + 1}"


# single channel, three operators with three BSs each
SINGLE_GRAPH = ConflictGraph((3, 3, 3), _edges("A1-B1", "A2-B2", "A3-B2", "A1-C1", "A3-C2", "B3-C3"))
SINGLE_BIDS = ((9, 8, 8), (8, 9, 5), (10, 8, 3))

# four, four and two BSs; reused by the linear and the ladder examples
MULTI_GRAPH = ConflictGraph((4, 4, 2), _edges("A1-B1", "A2-B2", "A3-B3", "A4-B4", "A3-C1", "B2-C2"))
MULTI_DEMANDS = ((2, 1, 2, 2), (2, 1, 1, 2), (2, 1))
LINEAR_BIDS = ((8, 10, 7, 6), (8, 9, 9, 10), (10, 9))
LINEAR_DEVIATION = (8, 6, 6, 9)
LADDERS = (
    ((8, 5), (10, 0), (7, 3), (6, 3)),
    ((8, 4), (9, 0), (9, 0), (10, 3)),
    ((10, 5), (9, 0)),
)
LADDER_DEVIATION = ((8, 4), (6, 0), (6, 0), (9, 3))


def single() -> Instance:
    profs = tuple(OperatorProfile(i, b, b, (1,) * len(b)) for i, b in enumerate(SINGLE_BIDS))
    return Instance(SINGLE_GRAPH, profs, name="single")


def linear() -> Instance:
    profs = tuple(OperatorProfile(i, b, b, d) for i, (b, d) in enumerate(zip(LINEAR_BIDS, MULTI_DEMANDS)))
    return Instance(MULTI_GRAPH, profs, name="linear")


def ladder() -> Instance:
    lads = tuple(BidLadder(i, s) for i, s in enumerate(LADDERS))
    # linear profile fields carry the first-channel bids
    profs = tuple(OperatorProfile(i, tuple(q[0] for q in s), tuple(q[0] for q in s), d)
                  for i, (s, d) in enumerate(zip(LADDERS, MULTI_DEMANDS)))
    return Instance(MULTI_GRAPH, profs, lads, lads, name="ladder")


def _expect(name, what, got, want):
    if got != want:
        raise FixtureMismatch(f"{name}: {what} is {got!r}, expected {want!r}")


def check_single(inst: Instance) -> None:
    g, profs = inst.graph, inst.profiles
    _expect("single", "sigma_A", sum(profs[0].bids), 25)
    _expect("single", "sigma_B true", sum(profs[1].true_values), 22)
    out = run_sc_spam(g, profs)
    _expect("single", "winners", [r.winner for r in out.trace], [0, 1])
    _expect("single", "critical of A", out.trace[0].critical_operator, 2)
    _expect("single", "prices", out.prices, (18, 3, 0))
    _expect("single", "A's served BSs", out.trace[0].base_stations, (0, 1, 2))
    left = g.without([(0, j) for j in range(3)] + [(1, 0), (1, 1), (2, 0), (2, 1)])
    _expect("single", "graph after round 1", sorted(v for v in left.vertices if left.is_active(v)),
            [(1, 2), (2, 2)])
    vals = tuple(BidLadder.linear(i, p.true_values, (1,) * p.num_base_stations) for i, p in enumerate(profs))
    _expect("single", "U_A", utility(out, vals, 0).utility, 7)
    _expect("single", "U_B", utility(out, vals, 1).utility, 2)
    _expect("single", "C served", sum(out.allocation[2]), 0)
    # B inflating every bid to a total of 28 wins first and pays A's 25
    scaled = tuple(b * 28 for b in profs[1].bids)
    others = [tuple(b * 22 for b in p.bids) for p in profs]
    others[1] = scaled
    dev = run_sc_spam(g, [OperatorProfile(i, b) for i, b in enumerate(others)])
    _expect("single", "deviated first winner", dev.trace[0].winner, 1)
    _expect("single", "deviated B price", dev.prices[1], 25 * 22)
    _expect("single", "deviated U_B", 22 * 22 - dev.prices[1], -3 * 22)


def check_linear(inst: Instance) -> None:
    g, profs = inst.graph, inst.profiles
    out = run_nud_am(g, profs, 2)
    sig1 = {i: sum(b for b, d in zip(p.bids, p.demands) if d > 0) for i, p in enumerate(profs)}
    _expect("linear", "first-channel bid sums", sig1, {0: 31, 1: 36, 2: 19})
    _expect("linear", "pass-1 leading sigma", out.trace[0].sigma, 36)
    _expect("linear", "pass-1", [(r.winner, r.base_stations, r.price) for r in out.trace if r.channel == 0],
            [(1, (0, 1, 2, 3), 31), (2, (0,), 0)])
    _expect("linear", "pass-2", [(r.winner, r.base_stations, r.price) for r in out.trace if r.channel == 1],
            [(0, (0, 1, 2, 3), 18), (2, (1,), 0)])
    _expect("linear", "prices", out.prices, (18, 31, 0))
    dev_profs = list(profs)
    dev_profs[1] = profs[1].with_bids(LINEAR_DEVIATION)
    dev = run_nud_am(g, dev_profs, 2)
    _expect("linear", "deviated pass-1", [(r.winner, r.base_stations, r.price) for r in dev.trace if r.channel == 0],
            [(0, (0, 1, 2, 3), 29), (2, (1,), 0)])
    _expect("linear", "deviated pass-2", [(r.winner, r.base_stations, r.price) for r in dev.trace if r.channel == 1],
            [(1, (0, 1, 2, 3), 21), (2, (0,), 0)])
    _expect("linear", "B channels", sum(dev.allocation[1]), sum(out.allocation[1]))
    vals = inst.value_ladders
    gain = utility(dev, vals, 1).utility - utility(out, vals, 1).utility
    _expect("linear", "B utility gain", gain, 10)


def check_ladder(inst: Instance) -> None:
    g = inst.graph
    out = run_nud_wspam(g, inst.ladders, inst.demands, 2)
    _expect("ladder", "pass-1", [(r.winner, r.base_stations) for r in out.trace if r.channel == 0],
            [(1, (0, 1, 2, 3)), (2, (0,))])
    _expect("ladder", "pass-2", [(r.winner, r.base_stations) for r in out.trace if r.channel == 1],
            [(0, (0, 1, 2, 3)), (2, (1,))])
    _expect("ladder", "B pass-2 sigma", sum(q[1] for q, d in zip(LADDERS[1], MULTI_DEMANDS[1]) if d > 1), 7)
    _expect("ladder", "prices", out.prices, (7, 11, 3))
    lads = list(inst.ladders)
    lads[1] = BidLadder(1, LADDER_DEVIATION)
    dev = run_nud_wspam(g, lads, inst.demands, 2)
    _expect("ladder", "deviated pass-1 winners", [r.winner for r in dev.trace if r.channel == 0], [0, 2])
    _expect("ladder", "deviated allocation", dev.allocation, out.allocation)
    _expect("ladder", "deviated prices", dev.prices, out.prices)


FIXTURES = {
    "single": (single, check_single, "sc-spam", 1),
    "linear": (linear, check_linear, "nud-am", 2),
    "ladder": (ladder, check_ladder, "nud-wspam", 2),
}


def load_fixture(name: str, check: bool = True) -> Instance:
    try:
        build, checker, _, _ = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}") from None
    inst = build()
    if check:
        checker(inst)
    return inst


def fixture_defaults(name: str) -> tuple[str, int]:
    """Mechanism and channel count a fixture was written for."""
    _, _, mech, k = FIXTURES[name]
    return mech, k
