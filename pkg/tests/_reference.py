"""Slow, obviously-correct reference implementations used as test oracles."""

from itertools import combinations


def enumerate_vcg(graph, profiles):
    """Exhaustive reference: every independent set of active BSs, Clarke pivot per BS."""
    verts = [v for v in graph.vertices if graph.is_active(v)]
    bid = {(i, j): b for i, p in enumerate(profiles) for j, b in enumerate(p.bids)}
    conflict = {frozenset(e) for e in graph.edges}
    sets = []
    for r in range(len(verts) + 1):
        for combo in combinations(verts, r):
            if all(frozenset((a, b)) not in conflict for a, b in combinations(combo, 2)):
                sets.append((sum(bid[v] for v in combo), frozenset(combo)))
    best = max(w for w, _ in sets)
    chosen = min((s for w, s in sets if w == best), key=lambda s: sorted(s))
    rho = {}
    for v in verts:
        without = max(w for w, s in sets if v not in s)
        rho[v] = without - (best - (bid[v] if v in chosen else 0))
    return best, rho
