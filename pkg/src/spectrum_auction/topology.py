"""Synthetic multi-operator topologies and the topology/profile file formats."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .model import BidLadder, ConflictGraph, Instance, ModelError, OperatorProfile

REGIMES = {
    # bids in money units before quantization, demand range inclusive
    "single-channel": {"bid_range": (15, 25), "demand": (1, 1)},
    "uniform-demand-2": {"bid_range": (10, 25), "demand": (2, 2)},
    "nonuniform": {"bid_range": (10, 25), "demand": (0, 3)},
}
UNIT = 1000  # sampled bids are stored in milli-units


@dataclass(frozen=True)
class TopologySpec:
    """Parameters of a configuration-model topology.

    Every BS draws, independently for each other operator, an integer degree
    uniformly from ``degree_range`` (inclusive).
    """

    bs_counts: tuple[int, ...]
    degree_range: tuple[int, int] = (0, 2)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bs_counts", tuple(int(c) for c in self.bs_counts))
        if any(c < 1 for c in self.bs_counts):
            raise ModelError("every operator needs at least one base station")
        lo, hi = self.degree_range
        if lo < 0 or hi < lo:
            raise ModelError(f"bad degree range {self.degree_range}")

    @classmethod
    def even(cls, total: int, num_operators: int = 3, **kw) -> "TopologySpec":
        """Split ``total`` BSs as evenly as possible, remainder to the lower ids."""
        base, extra = divmod(int(total), num_operators)
        return cls(tuple(base + (1 if i < extra else 0) for i in range(num_operators)), **kw)


@dataclass(frozen=True)
class InterferenceMatrix:
    """Binary conflicts between the BSs of ``pair[0]`` (rows) and ``pair[1]`` (columns)."""

    pair: tuple[int, int]
    matrix: np.ndarray

    @property
    def T(self) -> "InterferenceMatrix":
        return InterferenceMatrix((self.pair[1], self.pair[0]), self.matrix.T.copy())

    @property
    def num_edges(self) -> int:
        return int(self.matrix.sum())


def _balance(deg: np.ndarray, deficit: int, rng: np.random.Generator) -> np.ndarray:
    deg = deg.copy()
    for k in rng.integers(0, len(deg), size=deficit):
        deg[k] += 1
    return deg


def generate_pairwise_graph(spec: TopologySpec, pair: tuple[int, int],
                            rng: np.random.Generator) -> InterferenceMatrix:
    """Bipartite configuration model between the BSs of two operators.

    When the two sides' stub totals differ, stubs are added one at a time to
    uniformly chosen BSs of the short side.  Multi-edges collapse to one.
    """
    i, j = pair
    if i == j:
        raise ModelError("pair must name two distinct operators")
    lo, hi = spec.degree_range
    mi, mj = spec.bs_counts[i], spec.bs_counts[j]
    di = rng.integers(lo, hi + 1, size=mi)
    dj = rng.integers(lo, hi + 1, size=mj)
    gap = int(di.sum() - dj.sum())
    if gap > 0:
        dj = _balance(dj, gap, rng)
    elif gap < 0:
        di = _balance(di, -gap, rng)
    left = np.repeat(np.arange(mi), di)
    right = rng.permutation(np.repeat(np.arange(mj), dj))
    if len(left) != len(right):  # pragma: no cover - balancing guarantees equality
        raise ModelError("stub counts could not be balanced")
    mat = np.zeros((mi, mj), dtype=np.uint8)
    mat[left, right] = 1
    return InterferenceMatrix((i, j), mat)


def compose_interference(bs_counts: Sequence[int], parts: Sequence[InterferenceMatrix]) -> ConflictGraph:
    """Assemble pairwise blocks into one conflict graph (diagonal blocks stay zero)."""
    n = len(bs_counts)
    seen = set()
    edges = set()
    for part in parts:
        i, j = part.pair
        key = (min(i, j), max(i, j))
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"bad operator pair {part.pair}")
        if key in seen:
            raise ModelError(f"operator pair {key} given twice")
        seen.add(key)
        if part.matrix.shape != (bs_counts[i], bs_counts[j]):
            raise ModelError(f"block {part.pair} has shape {part.matrix.shape}, "
                             f"expected {(bs_counts[i], bs_counts[j])}")
        for a, b in zip(*np.nonzero(part.matrix)):
            edges.add(((i, int(a)), (j, int(b))))
    missing = set(combinations(range(n), 2)) - seen
    if missing:
        raise ModelError(f"missing blocks for operator pairs {sorted(missing)}")
    return ConflictGraph(tuple(bs_counts), frozenset(edges))


def interference_matrix(graph: ConflictGraph) -> np.ndarray:
    """Full binary interference matrix in flat vertex order."""
    return graph.adjacency.astype(np.uint8)


def generate_topology(spec: TopologySpec, rng: Optional[np.random.Generator] = None) -> ConflictGraph:
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    parts = [generate_pairwise_graph(spec, pair, rng) for pair in combinations(range(len(spec.bs_counts)), 2)]
    return compose_interference(spec.bs_counts, parts)


def _regime(regime) -> dict:
    if isinstance(regime, str):
        try:
            return REGIMES[regime]
        except KeyError:
            raise ModelError(f"unknown regime {regime!r}; known: {', '.join(REGIMES)}") from None
    reg = dict(regime)
    lo, hi = reg.get("bid_range", (None, None))
    dlo, dhi = reg.get("demand", (None, None))
    if lo is None or dlo is None or not (0 <= lo <= hi) or not (0 <= dlo <= dhi):
        raise ModelError(f"malformed regime {regime!r}")
    return reg


def sample_profiles(graph: ConflictGraph, regime, rng: np.random.Generator,
                    K: Optional[int] = None) -> Instance:
    """Draw bids, demands and non-increasing marginal ladders for every BS.

    Bids are uniform on the regime's interval and quantized to milli-units.
    Ladders hold one marginal bid per demanded channel, sorted descending;
    their first entry is the linear per-channel bid.  Demands are clipped to
    ``K`` when given.  True values equal the bids.
    """
    reg = _regime(regime)
    lo, hi = reg["bid_range"]
    dlo, dhi = reg["demand"]
    profiles, ladders = [], []
    for i, m in enumerate(graph.bs_counts):
        demand = rng.integers(dlo, dhi + 1, size=m)
        if K is not None:
            demand = np.minimum(demand, K)
        steps = []
        for d in demand:
            draws = np.round(rng.uniform(lo, hi, size=max(int(d), 1)) * UNIT).astype(np.int64)
            steps.append(tuple(int(x) for x in np.sort(draws)[::-1][:int(d)]) or (int(draws[0]),))
        bids = tuple(s[0] for s in steps)
        profiles.append(OperatorProfile(i, bids, bids, tuple(int(d) for d in demand)))
        ladders.append(BidLadder(i, tuple(steps)))
    ladders = tuple(ladders)
    return Instance(graph, tuple(profiles), ladders, ladders)


def random_instance(total_bs: int, regime, seed, degree_range=(0, 2), num_operators: int = 3,
                    K: Optional[int] = None) -> Instance:
    """Topology and profiles from one seed (int or sequence of ints)."""
    rng = np.random.default_rng(seed)
    spec = TopologySpec.even(total_bs, num_operators, degree_range=tuple(degree_range))
    graph = generate_topology(spec, rng)
    return sample_profiles(graph, regime, rng, K)


# --------------------------------------------------------------------------
# file formats


def topology_to_dict(graph: ConflictGraph) -> dict:
    edges = sorted([a[0], a[1], b[0], b[1]] for a, b in graph.edges)
    return {
        "num_operators": graph.num_operators,
        "operators": [{"id": i, "num_base_stations": m} for i, m in enumerate(graph.bs_counts)],
        "edges": edges,
    }


def topology_from_dict(doc: dict) -> ConflictGraph:
    try:
        n = int(doc["num_operators"])
        ops = sorted(doc["operators"], key=lambda o: o["id"])
        counts = tuple(int(o["num_base_stations"]) for o in ops)
        edges = frozenset(((int(a), int(b)), (int(c), int(d))) for a, b, c, d in doc["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed topology document: {exc}") from exc
    if len(counts) != n or [o["id"] for o in ops] != list(range(n)):
        raise ModelError("operators must be numbered 0..num_operators-1")
    return ConflictGraph(counts, edges)


def profiles_to_dict(instance: Instance) -> dict:
    rows = []
    lads = instance.ladders
    tlads = instance.true_ladders
    for p in instance.profiles:
        for j in range(p.num_base_stations):
            row = {"operator": p.operator_id, "bs": j, "bid": p.bids[j],
                   "true_value": p.true_values[j], "demand": p.demands[j]}
            if lads is not None:
                row["ladder"] = list(lads[p.operator_id].steps[j])
            if tlads is not None and tlads is not lads:
                row["true_ladder"] = list(tlads[p.operator_id].steps[j])
            rows.append(row)
    return {"name": instance.name, "base_stations": rows}


def profiles_from_dict(graph: ConflictGraph, doc: dict) -> Instance:
    try:
        rows = {(int(r["operator"]), int(r["bs"])): r for r in doc["base_stations"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed profile document: {exc}") from exc
    missing = [v for v in graph.vertices if v not in rows]
    if missing or len(rows) != graph.num_vertices:
        raise ModelError(f"profile document does not cover the topology (missing {missing[:3]})")
    profiles, lads, tlads = [], [], []
    has_ladder = all("ladder" in r for r in rows.values())
    has_true = all("true_ladder" in r for r in rows.values())
    for i, m in enumerate(graph.bs_counts):
        rs = [rows[(i, j)] for j in range(m)]
        profiles.append(OperatorProfile(i, tuple(r["bid"] for r in rs),
                                        tuple(r.get("true_value", r["bid"]) for r in rs),
                                        tuple(r.get("demand", 1) for r in rs)))
        if has_ladder:
            lads.append(BidLadder(i, tuple(tuple(r["ladder"]) for r in rs)))
        if has_true:
            tlads.append(BidLadder(i, tuple(tuple(r["true_ladder"]) for r in rs)))
    lads = tuple(lads) if has_ladder else None
    tlads = tuple(tlads) if has_true else lads
    return Instance(graph, tuple(profiles), lads, tlads, name=doc.get("name", ""))


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_instance(instance: Instance, topology_path, profiles_path) -> None:
    with open(topology_path, "w", encoding="utf-8") as fh:
        fh.write(dumps(topology_to_dict(instance.graph)))
    with open(profiles_path, "w", encoding="utf-8") as fh:
        fh.write(dumps(profiles_to_dict(instance)))


def load_instance(topology_path, profiles_path) -> Instance:
    with open(topology_path, encoding="utf-8") as fh:
        graph = topology_from_dict(json.load(fh))
    with open(profiles_path, encoding="utf-8") as fh:
        return profiles_from_dict(graph, json.load(fh))
