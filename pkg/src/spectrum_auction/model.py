"""Domain types shared by every mechanism.

Money is held as plain Python ``int`` in an arbitrary unit (the samplers use
milli-units).  Keeping bids integral makes every sum, comparison and tie exact,
which the argmax tie rules and the golden fixtures depend on.

Vertices are ``(operator, bs)`` pairs with 0-based indices; the flat vertex
index used by the array kernels is ``offsets[operator] + bs``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

Vertex = tuple[int, int]
Edge = tuple[Vertex, Vertex]


class ModelError(ValueError):
    """An input violates one of the model invariants."""


def _normalize_edge(u: Vertex, v: Vertex) -> Edge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class ConflictGraph:
    """Inter-operator interference graph over base stations.

    ``bs_counts[i]`` is the number of base stations of operator ``i``.  The
    ``active`` mask selects the working subgraph; inactive vertices keep their
    identity but take no part in neighbor sets, bid sums or allocation.
    """

    bs_counts: tuple[int, ...]
    edges: frozenset = frozenset()
    active: Optional[tuple[bool, ...]] = None

    def __post_init__(self):
        counts = tuple(int(c) for c in self.bs_counts)
        if any(c < 0 for c in counts):
            raise ModelError("base station counts must be non-negative")
        object.__setattr__(self, "bs_counts", counts)
        norm = set()
        for u, v in self.edges:
            u, v = (int(u[0]), int(u[1])), (int(v[0]), int(v[1]))
            for op, bs in (u, v):
                if not (0 <= op < len(counts) and 0 <= bs < counts[op]):
                    raise ModelError(f"edge endpoint {(op, bs)} is not a vertex")
            if u == v:
                raise ModelError(f"self-loop at {u}")
            if u[0] == v[0]:
                raise ModelError(f"intra-operator edge {u}-{v}")
            norm.add(_normalize_edge(u, v))
        object.__setattr__(self, "edges", frozenset(norm))
        total = sum(counts)
        if self.active is None:
            object.__setattr__(self, "active", (True,) * total)
        else:
            mask = tuple(bool(a) for a in self.active)
            if len(mask) != total:
                raise ModelError("active mask length differs from vertex count")
            object.__setattr__(self, "active", mask)

    @classmethod
    def from_adjacency(cls, bs_counts: Sequence[int], adjacency: np.ndarray) -> "ConflictGraph":
        g = cls(tuple(bs_counts))
        rows, cols = np.nonzero(np.triu(np.asarray(adjacency, dtype=bool), 1))
        verts = g.vertices
        return cls(g.bs_counts, frozenset((verts[r], verts[c]) for r, c in zip(rows, cols)))

    @property
    def num_operators(self) -> int:
        return len(self.bs_counts)

    @property
    def num_vertices(self) -> int:
        return sum(self.bs_counts)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.bs_counts)])[:-1])

    @cached_property
    def vertices(self) -> tuple[Vertex, ...]:
        return tuple((i, j) for i, m in enumerate(self.bs_counts) for j in range(m))

    def index(self, v: Vertex) -> int:
        op, bs = v
        if not (0 <= op < self.num_operators and 0 <= bs < self.bs_counts[op]):
            raise ModelError(f"unknown vertex {v}")
        return self.offsets[op] + bs

    @cached_property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_operators, dtype=np.int64), self.bs_counts)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Symmetric boolean adjacency over all vertices (ignores ``active``)."""
        m = self.num_vertices
        adj = np.zeros((m, m), dtype=np.bool_)
        for u, v in self.edges:
            a, b = self.index(u), self.index(v)
            adj[a, b] = adj[b, a] = True
        return adj

    @cached_property
    def active_array(self) -> np.ndarray:
        return np.array(self.active, dtype=np.bool_)

    def with_active(self, mask: Iterable[bool]) -> "ConflictGraph":
        g = ConflictGraph(self.bs_counts, self.edges, tuple(mask))
        # adjacency does not depend on the mask
        g.__dict__["adjacency"] = self.adjacency
        return g

    def without(self, removed: Iterable[Vertex]) -> "ConflictGraph":
        mask = list(self.active)
        for v in removed:
            mask[self.index(v)] = False
        return self.with_active(mask)

    def is_active(self, v: Vertex) -> bool:
        return self.active[self.index(v)]

    def active_operators(self) -> list[int]:
        return sorted({self.vertices[k][0] for k, a in enumerate(self.active) if a})

    def is_independent(self, vertices: Iterable[Vertex]) -> bool:
        vs = set(vertices)
        return not any(u in vs and v in vs for u, v in self.edges)

    def _check_operator(self, i: int) -> None:
        if not (0 <= i < self.num_operators):
            raise ModelError(f"unknown operator {i}")


@dataclass(frozen=True)
class OperatorProfile:
    """Per-BS bids, private true values and channel demands of one operator."""

    operator_id: int
    bids: tuple[int, ...]
    true_values: tuple[int, ...] = None
    demands: tuple[int, ...] = None

    def __post_init__(self):
        bids = tuple(int(b) for b in self.bids)
        true = bids if self.true_values is None else tuple(int(v) for v in self.true_values)
        dem = (1,) * len(bids) if self.demands is None else tuple(int(d) for d in self.demands)
        if not (len(bids) == len(true) == len(dem)):
            raise ModelError(f"operator {self.operator_id}: bids, true values and demands differ in length")
        if any(x < 0 for x in bids + true):
            raise ModelError(f"operator {self.operator_id}: negative bid or value")
        if any(d < 0 for d in dem):
            raise ModelError(f"operator {self.operator_id}: negative demand")
        object.__setattr__(self, "bids", bids)
        object.__setattr__(self, "true_values", true)
        object.__setattr__(self, "demands", dem)

    @property
    def num_base_stations(self) -> int:
        return len(self.bids)

    def with_bids(self, bids: Sequence[int]) -> "OperatorProfile":
        return OperatorProfile(self.operator_id, tuple(bids), self.true_values, self.demands)


@dataclass(frozen=True)
class BidLadder:
    """Marginal bids per BS: ``steps[j][l]`` is the bid for the (l+1)-th channel at BS j.

    Ladders must be non-increasing.  A ladder may be longer than the demand at
    its BS (trailing levels are never used), never shorter.
    """

    operator_id: int
    steps: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        steps = tuple(tuple(int(x) for x in s) for s in self.steps)
        for j, s in enumerate(steps):
            if any(x < 0 for x in s):
                raise ModelError(f"operator {self.operator_id} BS {j}: negative ladder entry")
            if any(a < b for a, b in zip(s, s[1:])):
                raise ModelError(f"operator {self.operator_id} BS {j}: ladder {s} is increasing")
        object.__setattr__(self, "steps", steps)

    def bid(self, level: int, bs: int) -> int:
        """Bid for the ``level``-th channel (1-based) at ``bs``."""
        return self.steps[bs][level - 1]

    def value_of(self, bs: int, count: int) -> int:
        """Sum of the first ``count`` marginal bids at ``bs``."""
        if count > len(self.steps[bs]):
            raise ModelError(f"operator {self.operator_id} BS {bs}: {count} channels exceed ladder")
        return sum(self.steps[bs][:count])

    def check_demands(self, demands: Sequence[int]) -> None:
        if len(demands) != len(self.steps):
            raise ModelError(f"operator {self.operator_id}: demand/ladder length mismatch")
        for j, (d, s) in enumerate(zip(demands, self.steps)):
            if d < 0:
                raise ModelError(f"operator {self.operator_id} BS {j}: negative demand")
            if len(s) < d:
                raise ModelError(f"operator {self.operator_id} BS {j}: ladder shorter than demand {d}")

    @classmethod
    def linear(cls, operator_id: int, per_channel: Sequence[int], demands: Sequence[int]) -> "BidLadder":
        return cls(operator_id, tuple((int(b),) * int(d) for b, d in zip(per_channel, demands)))


@dataclass(frozen=True)
class CriticalOperatorResult:
    subject_operator: int
    critical_operator: Optional[int]
    critical_valuation: int
    per_operator_lambda: Mapping[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class RoundRecord:
    """One winner inside one channel's allocation pass."""

    channel: int
    round: int
    winner: int
    sigma: int
    price: Optional[int]
    critical_operator: Optional[int]
    base_stations: tuple[int, ...]


@dataclass(frozen=True)
class AuctionOutcome:
    mechanism: str
    allocation: tuple[tuple[int, ...], ...]
    prices: tuple[int, ...]
    welfare: int
    assignments: tuple[frozenset, ...] = ()
    trace: tuple[RoundRecord, ...] = ()
    bs_prices: Optional[tuple[tuple[int, ...], ...]] = None

    @property
    def utilization(self) -> int:
        return sum(sum(row) for row in self.allocation)

    @property
    def channels_used(self) -> int:
        return sum(1 for ch in self.assignments if ch)

    def channels_of(self, i: int) -> int:
        return sum(self.allocation[i])

    def winners(self) -> list[int]:
        return [i for i, row in enumerate(self.allocation) if any(row)]


@dataclass(frozen=True)
class UtilityReport:
    operator_id: int
    gross_true_value: int
    price: int
    utility: int


@dataclass(frozen=True)
class Instance:
    """A conflict graph plus everything the mechanisms need to run on it.

    ``ladders`` / ``true_ladders`` are only required by the ladder-based
    mechanism; when absent they are derived from the linear profiles.
    """

    graph: ConflictGraph
    profiles: tuple[OperatorProfile, ...]
    ladders: Optional[tuple[BidLadder, ...]] = None
    true_ladders: Optional[tuple[BidLadder, ...]] = None
    name: str = ""

    def __post_init__(self):
        if len(self.profiles) != self.graph.num_operators:
            raise ModelError("one profile per operator required")
        for i, (p, m) in enumerate(zip(self.profiles, self.graph.bs_counts)):
            if p.operator_id != i or p.num_base_stations != m:
                raise ModelError(f"profile {i} does not match the graph")
        for lads in (self.ladders, self.true_ladders):
            if lads is None:
                continue
            if len(lads) != len(self.profiles):
                raise ModelError("one ladder per operator required")
            for lad, p in zip(lads, self.profiles):
                lad.check_demands(p.demands)

    @property
    def demands(self) -> tuple[tuple[int, ...], ...]:
        return tuple(p.demands for p in self.profiles)

    @property
    def bid_ladders(self) -> tuple[BidLadder, ...]:
        if self.ladders is not None:
            return self.ladders
        return tuple(BidLadder.linear(p.operator_id, p.bids, p.demands) for p in self.profiles)

    @property
    def value_ladders(self) -> tuple[BidLadder, ...]:
        if self.true_ladders is not None:
            return self.true_ladders
        if self.ladders is not None and all(p.bids == p.true_values for p in self.profiles):
            return self.ladders
        return tuple(BidLadder.linear(p.operator_id, p.true_values, p.demands) for p in self.profiles)


def neighbors_of_operator(graph: ConflictGraph, i: int) -> frozenset:
    """Active vertices adjacent to some active vertex of operator ``i``."""
    graph._check_operator(i)
    lo = graph.offsets[i]
    hi = lo + graph.bs_counts[i]
    act = graph.active_array
    own = act[lo:hi]
    if not own.any():
        return frozenset()
    hit = graph.adjacency[lo:hi][own].any(axis=0) & act
    verts = graph.vertices
    return frozenset(verts[k] for k in np.flatnonzero(hit))


def operator_bid_sum(profile: OperatorProfile, graph: ConflictGraph, i: int,
                     remaining: Optional[Sequence[int]] = None) -> int:
    """Sum of operator ``i``'s bids over active BSs whose remaining demand is positive."""
    graph._check_operator(i)
    demands = profile.demands if remaining is None else remaining
    off = graph.offsets[i]
    return sum(b for j, (b, d) in enumerate(zip(profile.bids, demands))
               if d > 0 and graph.active[off + j])


def critical_operator(graph: ConflictGraph, bids: Sequence[Sequence[int]], i: int) -> CriticalOperatorResult:
    """Neighboring operator whose conflicting active BSs carry the largest bid sum.

    Ties go to the lowest operator id; with no neighbors the valuation is 0.
    """
    graph._check_operator(i)
    lam: dict[int, int] = {}
    for op, bs in sorted(neighbors_of_operator(graph, i)):
        lam[op] = lam.get(op, 0) + int(bids[op][bs])
    if not lam:
        return CriticalOperatorResult(i, None, 0, {})
    best = max(sorted(lam), key=lambda j: (lam[j], -j))
    return CriticalOperatorResult(i, best, lam[best], lam)


def utility(outcome: AuctionOutcome, true_values: Sequence[BidLadder], i: int) -> UtilityReport:
    """Utility of operator ``i``: true value of its channels minus its price, 0 if unserved.

    ``true_values`` are per-operator value ladders; a linear valuation is a
    ladder with the same entry repeated up to the demand.
    """
    row = outcome.allocation[i]
    lad = true_values[i]
    if len(row) != len(lad.steps):
        raise ModelError(f"operator {i}: outcome and valuation refer to different topologies")
    gross = 0
    for j, x in enumerate(row):
        if x > len(lad.steps[j]):
            raise ModelError(f"operator {i} BS {j}: allocation {x} exceeds declared demand")
        gross += lad.value_of(j, x)
    price = outcome.prices[i]
    if sum(row) == 0:
        return UtilityReport(i, 0, price, 0)
    return UtilityReport(i, gross, price, gross - price)
