"""Time the numba kernels against their pure-numpy twins.

Covers the single-channel greedy pass (the inner loop of every greedy
mechanism) and the brute-force winner determination behind VCG.  Both
backends are called directly, so the environment flag does not matter here.
Each row checks that the two backends return the same result before timing.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import time

import numpy as np

from spectrum_auction import _kernels, random_instance, run_nud_wspam


def best_ms(fn, repeat):
    fn()
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return min(out) * 1e3


def pass_inputs(size):
    inst = random_instance(size, "single-channel", [42, size])
    g = inst.graph
    bids = np.array([b for p in inst.profiles for b in p.bids], dtype=np.int64)
    return g.adjacency, g.owner, g.num_operators, bids, g.active_array.copy()


def mwis_inputs(n):
    rng = np.random.default_rng(n)
    w = rng.integers(15000, 25001, size=n).astype(np.int64)
    masks = np.zeros(n, dtype=np.int64)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.15:
                masks[u] |= 1 << v
                masks[v] |= 1 << u
    return w, masks


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if _kernels.sc_spam_pass_numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<22}{'size':>6}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for size in (30, 90, 150, 300, 600):
        args_ = pass_inputs(size)
        a = _kernels.sc_spam_pass_numpy(*args_)
        b = _kernels.sc_spam_pass_numba(args_[0], args_[1], np.int64(args_[2]), *args_[3:])
        assert all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))
        tn = best_ms(lambda: _kernels.sc_spam_pass_numpy(*args_), args.repeat)
        tj = best_ms(lambda: _kernels.sc_spam_pass_numba(args_[0], args_[1], np.int64(args_[2]), *args_[3:]),
                     args.repeat)
        print(f"{'sc-spam pass':<22}{size:>6}{tn:>12.3f}{tj:>12.3f}{tn / tj:>10.1f}")

    for n in (12, 16, 20, 22):
        w, masks = mwis_inputs(n)
        a = _kernels.brute_force_mwis_numpy(w, masks)
        b = _kernels.brute_force_mwis_numba(w, masks)
        assert int(a[1]) == int(b[1]) and np.array_equal(a[2], b[2])
        rep = max(args.repeat // 4, 2)
        tn = best_ms(lambda: _kernels.brute_force_mwis_numpy(w, masks), rep)
        tj = best_ms(lambda: _kernels.brute_force_mwis_numba(w, masks), rep)
        print(f"{'brute-force MWIS':<22}{n:>6}{tn:>12.3f}{tj:>12.3f}{tn / tj:>10.1f}")

    # end to end, through whichever backend the flag selects
    inst = random_instance(300, "nonuniform", 1, K=3)
    t = best_ms(lambda: run_nud_wspam(inst.graph, inst.bid_ladders, inst.demands, 3), args.repeat)
    print(f"\nNUD-WSPAM, 300 BSs, K=3, backend {_kernels.backend()}: {t:.3f} ms")


if __name__ == "__main__":
    main()
