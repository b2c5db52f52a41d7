"""Numpy implementation of the hot per-step kernels.

This is the fallback backend selected when the compiled extension is not
available (or when ADAPTSIM_PURE_KERNELS=1). Operation order matches
``_fast.pyx`` exactly so that float results, and therefore state digests,
are bit-identical across backends.
"""

from __future__ import annotations

import numpy as np

from ..core import (
    DIGEST_SALT,
    PURPOSE_BROADCAST_LOTTERY,
    PURPOSE_MOBILITY,
    PURPOSE_WAYPOINT,
)

BACKEND_NAME = "pure"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_U01 = 1.0 / 9007199254740992.0

# Cap on the temporary mask matrix used by the all-pairs range filter.
_CHUNK_CELLS = 4_000_000


def _next(state):
    """Vectorized splitmix step: returns (new_state, output)."""
    state = state + _GAMMA
    z = state
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return state, z


def _fold(acc, value):
    _, out = _next(acc ^ value)
    return out


def _stream_states(seed, ids, purpose, step):
    acc = _fold(np.uint64(seed), ids.astype(np.uint64, copy=False))
    acc = _fold(acc, np.uint64(purpose))
    return _fold(acc, np.uint64(step))


def _u01(draw):
    return (draw >> _S11).astype(np.float64) * _U01


def splitmix_u64(seed, count):
    """`count` outputs of the sequential splitmix stream seeded with `seed`."""
    out = np.empty(count, dtype=np.uint64)
    state = np.uint64(seed)
    for i in range(count):
        state, out[i] = _next(state)
    return out


def counter_u64(base, lo, hi):
    """Counter-mode draws fold(base, n) for n in [lo, hi)."""
    n = np.arange(lo, hi, dtype=np.uint64)
    return _fold(np.uint64(base), n)


def se_init(ids, seed, arena_w, arena_h, speed_min, speed_max):
    """Bootstrap state draws: position, first waypoint, first speed."""
    state = _stream_states(seed, ids, PURPOSE_MOBILITY, 0)
    state, r = _next(state)
    x = _u01(r) * arena_w
    state, r = _next(state)
    y = _u01(r) * arena_h
    state, r = _next(state)
    wx = _u01(r) * arena_w
    state, r = _next(state)
    wy = _u01(r) * arena_h
    state, r = _next(state)
    spd = speed_min + _u01(r) * (speed_max - speed_min)
    return x, y, wx, wy, spd


def rwp_advance(ids, x, y, wx, wy, spd, step, seed,
                arena_w, arena_h, speed_min, speed_max, arrival_eps):
    """One random-waypoint step for all entities, in place.

    On arrival the entity lands exactly on the waypoint and redraws
    waypoint and speed from its per-step stream; otherwise it moves
    `speed` along the shortest torus path.
    """
    half_w = arena_w * 0.5
    half_h = arena_h * 0.5

    dx = wx - x
    dx = np.where(dx > half_w, dx - arena_w, dx)
    dx = np.where(dx <= -half_w, dx + arena_w, dx)
    dy = wy - y
    dy = np.where(dy > half_h, dy - arena_h, dy)
    dy = np.where(dy <= -half_h, dy + arena_h, dy)

    dist = np.sqrt(dx * dx + dy * dy)
    arrive = dist <= np.maximum(spd, arrival_eps)

    safe = np.where(arrive, 1.0, dist)
    frac = spd / safe
    mx = x + frac * dx
    mx = np.where(mx >= arena_w, mx - arena_w, mx)
    mx = np.where(mx < 0.0, mx + arena_w, mx)
    my = y + frac * dy
    my = np.where(my >= arena_h, my - arena_h, my)
    my = np.where(my < 0.0, my + arena_h, my)

    # Redraw candidates are computed for everyone (keyed streams, so the
    # unused draws cost nothing semantically) and applied where needed.
    state = _stream_states(seed, ids, PURPOSE_WAYPOINT, step)
    state, r1 = _next(state)
    state, r2 = _next(state)
    state, r3 = _next(state)
    nwx = _u01(r1) * arena_w
    nwy = _u01(r2) * arena_h
    nspd = speed_min + _u01(r3) * (speed_max - speed_min)

    x[:] = np.where(arrive, wx, mx)
    y[:] = np.where(arrive, wy, my)
    wx[:] = np.where(arrive, nwx, wx)
    wy[:] = np.where(arrive, nwy, wy)
    spd[:] = np.where(arrive, nspd, spd)


def lottery_mask(ids, step, seed, fraction):
    """Per-entity broadcast lottery for one step."""
    if fraction >= 1.0:
        return np.ones(ids.size, dtype=bool)
    threshold = np.uint64(int(fraction * 2.0 ** 64))
    state = _stream_states(seed, ids, PURPOSE_BROADCAST_LOTTERY, step)
    _, draw = _next(state)
    return draw < threshold


def deliver_pings(x, y, ids, px, py, sender_ids, origin_lps, self_lp,
                  radius, arena_w, arena_h, stats, bucket):
    """Range-filter ping deliveries against the local entities.

    Accumulates one interaction per delivery into stats[receiver, bucket,
    origin_lp] and returns (local_count, remote_count) split by whether the
    ping's origin LP is this LP.
    """
    n = x.size
    num_pings = px.size
    if n == 0 or num_pings == 0:
        return 0, 0
    r2 = radius * radius
    stats_b = stats[:, bucket, :]
    local = 0
    remote = 0
    chunk = max(1, _CHUNK_CELLS // n)
    for lo in range(0, num_pings, chunk):
        hi = min(num_pings, lo + chunk)
        dx = np.abs(px[lo:hi, None] - x[None, :])
        dx = np.minimum(dx, arena_w - dx)
        dy = np.abs(py[lo:hi, None] - y[None, :])
        dy = np.minimum(dy, arena_h - dy)
        mask = dx * dx + dy * dy <= r2
        mask &= sender_ids[lo:hi, None] != ids[None, :]
        rows, cols = np.nonzero(mask)
        if rows.size == 0:
            continue
        olp = origin_lps[lo + rows]
        np.add.at(stats_b, (cols, olp), 1)
        is_local = int(np.count_nonzero(olp == self_lp))
        local += is_local
        remote += rows.size - is_local
    return local, remote


def digest_partial(ids, x, y, wx, wy, spd):
    """XOR-combined per-entity hash of (id, model state)."""
    if ids.size == 0:
        return 0
    acc = _fold(np.uint64(DIGEST_SALT), ids.astype(np.uint64, copy=False))
    for arr in (x, y, wx, wy, spd):
        acc = _fold(acc, arr.view(np.uint64))
    out = np.uint64(0)
    out = np.bitwise_xor.reduce(acc)
    return int(out)
