"""Hot loops: the single-channel greedy pass and brute-force winner determination.

Each kernel has a numba implementation and a pure-numpy implementation with
identical results.  The numba path is used unless numba is missing or the
environment variable ``SPECTRUM_AUCTION_NO_NUMBA`` is set to a non-empty value
other than ``0``.  Both implementations stay importable under explicit names so
tests and the benchmark can compare them.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

_flag = os.environ.get("SPECTRUM_AUCTION_NO_NUMBA", "")
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0")

MAX_BRUTE_FORCE = 26


# --------------------------------------------------------------------------
# single-channel greedy pass


def sc_spam_pass_numpy(adj, owner, n_ops, bids, eligible):
    """Greedy operator-level allocation of one channel.

    Repeatedly picks the active operator with the largest active bid sum
    (lowest id on ties), serves all of its active vertices, prices it at the
    largest per-operator bid sum among its active neighbors, and removes the
    winner and its neighbors.  Returns ``(alloc, winners, sigmas, prices,
    critical)``; the last four are per-round arrays.
    """
    active = eligible.copy()
    alloc = np.zeros(owner.shape[0], dtype=np.bool_)
    winners, sigmas, prices, critical = [], [], [], []
    while active.any():
        has = np.bincount(owner[active], minlength=n_ops) > 0
        sig = np.zeros(n_ops, dtype=np.int64)
        np.add.at(sig, owner[active], bids[active])
        cand = np.flatnonzero(has)
        best = int(cand[np.argmax(sig[cand])])
        mine = active & (owner == best)
        nbr = adj[mine].any(axis=0) & active
        lam = np.zeros(n_ops, dtype=np.int64)
        np.add.at(lam, owner[nbr], bids[nbr])
        touched = np.zeros(n_ops, dtype=np.bool_)
        touched[owner[nbr]] = True
        if touched.any():
            tc = np.flatnonzero(touched)
            crit = int(tc[np.argmax(lam[tc])])
            price = int(lam[crit])
        else:
            crit, price = -1, 0
        alloc |= mine
        active &= ~(mine | nbr)
        winners.append(best)
        sigmas.append(int(sig[best]))
        prices.append(price)
        critical.append(crit)
    return (alloc, np.array(winners, dtype=np.int64), np.array(sigmas, dtype=np.int64),
            np.array(prices, dtype=np.int64), np.array(critical, dtype=np.int64))


def brute_force_mwis_numpy(weights, nbr_masks):
    """Exhaustive maximum-weight independent set over ``n <= MAX_BRUTE_FORCE`` vertices.

    ``nbr_masks[k]`` is the bitmask of vertex k's neighbors.  Returns
    ``(best_mask, best_weight, best_without)`` where ``best_without[k]`` is the
    best weight over independent sets not containing k.  Among equal-weight
    optima the smallest mask wins.
    """
    n = weights.shape[0]
    w = np.zeros(1, dtype=np.int64)
    feas = np.ones(1, dtype=np.bool_)
    for k in range(n):
        lower = np.int64(nbr_masks[k] & ((1 << k) - 1))
        masks = np.arange(w.shape[0], dtype=np.int64)
        w = np.concatenate([w, w + weights[k]])
        feas = np.concatenate([feas, feas & ((masks & lower) == 0)])
    scored = np.where(feas, w, -1)
    best_mask = int(np.argmax(scored))
    best_without = np.zeros(n, dtype=np.int64)
    masks = np.arange(w.shape[0], dtype=np.int64)
    for k in range(n):
        keep = ((masks >> k) & 1) == 0
        best_without[k] = scored[keep].max()
    return best_mask, int(scored[best_mask]), best_without


if HAVE_NUMBA:

    @njit(cache=True)
    def sc_spam_pass_numba(adj, owner, n_ops, bids, eligible):
        m = owner.shape[0]
        active = eligible.copy()
        alloc = np.zeros(m, dtype=np.bool_)
        winners = np.full(n_ops, -1, dtype=np.int64)
        sigmas = np.zeros(n_ops, dtype=np.int64)
        prices = np.zeros(n_ops, dtype=np.int64)
        critical = np.full(n_ops, -1, dtype=np.int64)
        sig = np.zeros(n_ops, dtype=np.int64)
        has = np.zeros(n_ops, dtype=np.bool_)
        lam = np.zeros(n_ops, dtype=np.int64)
        touched = np.zeros(n_ops, dtype=np.bool_)
        nbr = np.zeros(m, dtype=np.bool_)
        rounds = 0
        while True:
            sig[:] = 0
            has[:] = False
            for v in range(m):
                if active[v]:
                    sig[owner[v]] += bids[v]
                    has[owner[v]] = True
            best = -1
            for op in range(n_ops):
                if has[op] and (best < 0 or sig[op] > sig[best]):
                    best = op
            if best < 0:
                break
            nbr[:] = False
            for u in range(m):
                if active[u] and owner[u] == best:
                    alloc[u] = True
                    for v in range(m):
                        if adj[u, v] and active[v]:
                            nbr[v] = True
            lam[:] = 0
            touched[:] = False
            for v in range(m):
                if nbr[v]:
                    lam[owner[v]] += bids[v]
                    touched[owner[v]] = True
            crit = -1
            for op in range(n_ops):
                if touched[op] and (crit < 0 or lam[op] > lam[crit]):
                    crit = op
            winners[rounds] = best
            sigmas[rounds] = sig[best]
            prices[rounds] = lam[crit] if crit >= 0 else 0
            critical[rounds] = crit
            rounds += 1
            for u in range(m):
                if active[u] and (owner[u] == best or nbr[u]):
                    active[u] = False
        return alloc, winners[:rounds], sigmas[:rounds], prices[:rounds], critical[:rounds]

    @njit(cache=True)
    def brute_force_mwis_numba(weights, nbr_masks):
        n = weights.shape[0]
        total = np.int64(1) << n
        best_mask = np.int64(0)
        best = np.int64(-1)
        best_without = np.full(n, -1, dtype=np.int64)
        for mask in range(total):
            ok = True
            w = np.int64(0)
            for k in range(n):
                if (mask >> k) & 1:
                    if mask & nbr_masks[k]:
                        ok = False
                        break
                    w += weights[k]
            if not ok:
                continue
            if w > best:
                best = w
                best_mask = mask
            for k in range(n):
                if not ((mask >> k) & 1) and w > best_without[k]:
                    best_without[k] = w
        return best_mask, best, best_without

else:  # pragma: no cover
    sc_spam_pass_numba = None
    brute_force_mwis_numba = None


def sc_spam_pass(adj, owner, n_ops, bids, eligible):
    if USE_NUMBA:
        return sc_spam_pass_numba(adj, owner, np.int64(n_ops), bids, eligible)
    return sc_spam_pass_numpy(adj, owner, n_ops, bids, eligible)


def brute_force_mwis(weights, nbr_masks):
    if len(weights) > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE} vertices")
    if USE_NUMBA:
        mask, best, without = brute_force_mwis_numba(weights, nbr_masks)
        return int(mask), int(best), without
    return brute_force_mwis_numpy(weights, nbr_masks)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
