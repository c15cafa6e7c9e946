import os
import subprocess
import sys

import numpy as np
import pytest

from spectrum_auction import _kernels, random_instance

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _pass_inputs(seed, size):
    inst = random_instance(size, "single-channel", seed)
    g = inst.graph
    bids = np.array([b for p in inst.profiles for b in p.bids], dtype=np.int64)
    rng = np.random.default_rng(seed)
    eligible = rng.random(g.num_vertices) < 0.85
    return g.adjacency, g.owner, g.num_operators, bids, eligible


@needs_numba
@pytest.mark.parametrize("seed", range(25))
def test_sc_spam_pass_backends_agree(seed):
    args = _pass_inputs(seed, 6 + seed * 7)
    a = _kernels.sc_spam_pass_numpy(*args)
    b = _kernels.sc_spam_pass_numba(*args)
    for x, y in zip(a, b):
        assert np.array_equal(np.asarray(x), np.asarray(y))


@needs_numba
@pytest.mark.parametrize("seed", range(15))
def test_mwis_backends_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 15))
    w = rng.integers(0, 50, size=n).astype(np.int64)
    masks = np.zeros(n, dtype=np.int64)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.3:
                masks[u] |= 1 << v
                masks[v] |= 1 << u
    m1, b1, w1 = _kernels.brute_force_mwis_numpy(w, masks)
    m2, b2, w2 = _kernels.brute_force_mwis_numba(w, masks)
    assert (int(m1), int(b1)) == (int(m2), int(b2))
    assert np.array_equal(w1, w2)


def test_empty_pass():
    adj = np.zeros((2, 2), dtype=np.bool_)
    alloc, winners, *_ = _kernels.sc_spam_pass_numpy(adj, np.array([0, 1]), 2, np.array([3, 4]),
                                                      np.zeros(2, dtype=np.bool_))
    assert not alloc.any() and len(winners) == 0


def test_mwis_cap():
    with pytest.raises(ValueError):
        _kernels.brute_force_mwis(np.zeros(40, dtype=np.int64), np.zeros(40, dtype=np.int64))


def test_env_flag_selects_numpy():
    env = dict(os.environ, SPECTRUM_AUCTION_NO_NUMBA="1")
    code = ("import spectrum_auction as s; print(s.backend()); "
            "[s.load_fixture(n) for n in s.FIXTURES]")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@needs_numba
def test_env_flag_zero_keeps_numba():
    env = dict(os.environ, SPECTRUM_AUCTION_NO_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", "import spectrum_auction as s; print(s.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
