"""Microbenchmark comparing the compiled kernels with the numpy fallback.

Run via ``adaptsim bench``. Also asserts that both backends produce
identical results on the benchmark inputs, since the whole point of the
split is that the choice must never change behavior.
"""

from __future__ import annotations

import time

import numpy as np

from ._kernels import get_backend


def _time(fn, repeats=5):
    best = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return best


def run_bench(num_mh=12000, pings=2400, num_lps=3, repeats=5, out=print):
    try:
        fast = get_backend("fast")
    except ImportError:
        fast = None
    pure = get_backend("pure")
    backends = [("pure", pure)] + ([("fast", fast)] if fast else [])

    seed = 12345
    w = h = 10000.0
    ids = np.arange(num_mh, dtype=np.uint64)

    out(f"kernel benchmark: {num_mh} entities, {pings} pings, {num_lps} LPs "
        f"(best of {repeats})")
    header = f"{'kernel':<16}" + "".join(f"{name:>12}" for name, _ in backends)
    if fast:
        header += f"{'speedup':>10}"
    out(header)

    results = {}
    rows = []

    def record(op, make_fn):
        times = {}
        for name, mod in backends:
            fn, check = make_fn(mod)
            times[name] = _time(fn, repeats)
            results.setdefault(op, {})[name] = check()
        row = f"{op:<16}" + "".join(f"{times[name] * 1e3:>10.2f}ms" for name, _ in backends)
        if fast:
            row += f"{times['pure'] / times['fast']:>9.1f}x"
        out(row)
        rows.append((op, times))

    def make_init(mod):
        state = {}

        def fn():
            state["v"] = mod.se_init(ids, seed, w, h, 1.0, 5.0)
        return fn, lambda: tuple(a.tobytes() for a in state["v"])

    record("se_init", make_init)

    def make_rwp(mod):
        x, y, wx, wy, spd = mod.se_init(ids, seed, w, h, 1.0, 5.0)

        def fn():
            mod.rwp_advance(ids, x, y, wx, wy, spd, 7, seed, w, h, 1.0, 5.0, 0.0)
        return fn, lambda: (x.tobytes(), y.tobytes())

    record("rwp_advance", make_rwp)

    def make_lottery(mod):
        state = {}

        def fn():
            state["v"] = mod.lottery_mask(ids, 7, seed, 0.2)
        return fn, lambda: state["v"].tobytes()

    record("lottery", make_lottery)

    def make_deliver(mod):
        x, y, wx, wy, spd = mod.se_init(ids, seed, w, h, 1.0, 5.0)
        p = mod.se_init(np.arange(pings, dtype=np.uint64) + num_mh, seed + 1,
                        w, h, 1.0, 5.0)
        olp = (np.arange(pings) % num_lps).astype(np.uint32)
        sid = np.arange(pings, dtype=np.uint64) + num_mh
        stats = np.zeros((num_mh, 4, num_lps), dtype=np.uint32)
        state = {}

        def fn():
            stats[:] = 0
            state["v"] = mod.deliver_pings(x, y, ids, p[0], p[1], sid, olp, 0,
                                           250.0, w, h, stats, 0)
        return fn, lambda: (state["v"], stats.tobytes())

    record("deliver_pings", make_deliver)

    def make_digest(mod):
        x, y, wx, wy, spd = mod.se_init(ids, seed, w, h, 1.0, 5.0)
        state = {}

        def fn():
            state["v"] = mod.digest_partial(ids, x, y, wx, wy, spd)
        return fn, lambda: state["v"]

    record("digest", make_digest)

    if fast:
        mismatched = [op for op, by in results.items()
                      if by["pure"] != by["fast"]]
        if mismatched:
            raise AssertionError(f"backend results differ for: {mismatched}")
        out("backend parity: identical results on all kernels")
    else:
        out("compiled kernels unavailable; benchmarked the fallback only")
    return rows
