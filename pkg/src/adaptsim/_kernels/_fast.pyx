# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels.

Must stay bit-identical to ``pure.py``: same splitmix constants, same
float operation order (compiled with -ffp-contract=off so no FMA creeps
in). The range filter uses a uniform grid instead of the numpy all-pairs
scan; the delivery *set* is identical either way.
"""

from libc.math cimport fabs, sqrt
from libc.string cimport memcpy
from libc.stdlib cimport malloc, free

import numpy as np

BACKEND_NAME = "fast"

ctypedef unsigned long long u64
ctypedef unsigned int u32

cdef u64 GAMMA = 0x9E3779B97F4A7C15ULL
cdef u64 M1 = 0xBF58476D1CE4E5B9ULL
cdef u64 M2 = 0x94D049BB133111EBULL
cdef double U01 = 1.0 / 9007199254740992.0

cdef u64 P_MOBILITY = 1
cdef u64 P_WAYPOINT = 2
cdef u64 P_LOTTERY = 3
cdef u64 DIGEST_SALT = 0x7A3D9B1F54E6C08DULL


cdef inline u64 _nxt(u64* state) nogil:
    cdef u64 z
    state[0] = state[0] + GAMMA
    z = state[0]
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline u64 _fold(u64 acc, u64 value) nogil:
    cdef u64 s = acc ^ value
    return _nxt(&s)


cdef inline u64 _stream(u64 seed, u64 se_id, u64 purpose, u64 step) nogil:
    return _fold(_fold(_fold(seed, se_id), purpose), step)


cdef inline double _u01(u64 draw) nogil:
    return <double> (draw >> 11) * U01


cdef inline u64 _bits_fold(u64 acc, double v) nogil:
    cdef u64 b
    memcpy(&b, &v, 8)
    return _fold(acc, b)


def splitmix_u64(seed, count):
    out = np.empty(count, dtype=np.uint64)
    cdef u64[::1] mv = out
    cdef u64 state = <u64> seed
    cdef Py_ssize_t i
    for i in range(count):
        mv[i] = _nxt(&state)
    return out


def counter_u64(base, lo, hi):
    out = np.empty(hi - lo, dtype=np.uint64)
    cdef u64[::1] mv = out
    cdef u64 b = <u64> base
    cdef u64 n
    cdef Py_ssize_t i = 0
    for n in range(<u64> lo, <u64> hi):
        mv[i] = _fold(b, n)
        i += 1
    return out


def se_init(ids, seed, arena_w, arena_h, speed_min, speed_max):
    cdef Py_ssize_t n = ids.shape[0]
    x = np.empty(n, dtype=np.float64)
    y = np.empty(n, dtype=np.float64)
    wx = np.empty(n, dtype=np.float64)
    wy = np.empty(n, dtype=np.float64)
    spd = np.empty(n, dtype=np.float64)
    cdef u64[::1] idv = ids
    cdef double[::1] xv = x, yv = y, wxv = wx, wyv = wy, sv = spd
    cdef u64 sd = <u64> seed
    cdef double w = arena_w, h = arena_h, smin = speed_min, smax = speed_max
    cdef u64 st
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            st = _stream(sd, idv[i], P_MOBILITY, 0)
            xv[i] = _u01(_nxt(&st)) * w
            yv[i] = _u01(_nxt(&st)) * h
            wxv[i] = _u01(_nxt(&st)) * w
            wyv[i] = _u01(_nxt(&st)) * h
            sv[i] = smin + _u01(_nxt(&st)) * (smax - smin)
    return x, y, wx, wy, spd


def rwp_advance(ids, x, y, wx, wy, spd, step, seed,
                arena_w, arena_h, speed_min, speed_max, arrival_eps):
    cdef u64[::1] idv = ids
    cdef double[::1] xv = x, yv = y, wxv = wx, wyv = wy, sv = spd
    cdef u64 sd = <u64> seed, stp = <u64> step, st
    cdef double w = arena_w, h = arena_h
    cdef double smin = speed_min, smax = speed_max, eps = arrival_eps
    cdef double half_w = w * 0.5, half_h = h * 0.5
    cdef double dx, dy, dist, thr, frac, mx, my
    cdef Py_ssize_t i, n = ids.shape[0]
    with nogil:
        for i in range(n):
            dx = wxv[i] - xv[i]
            if dx > half_w:
                dx = dx - w
            elif dx <= -half_w:
                dx = dx + w
            dy = wyv[i] - yv[i]
            if dy > half_h:
                dy = dy - h
            elif dy <= -half_h:
                dy = dy + h
            dist = sqrt(dx * dx + dy * dy)
            thr = sv[i] if sv[i] > eps else eps
            if dist <= thr:
                xv[i] = wxv[i]
                yv[i] = wyv[i]
                st = _stream(sd, idv[i], P_WAYPOINT, stp)
                wxv[i] = _u01(_nxt(&st)) * w
                wyv[i] = _u01(_nxt(&st)) * h
                sv[i] = smin + _u01(_nxt(&st)) * (smax - smin)
            else:
                frac = sv[i] / dist
                mx = xv[i] + frac * dx
                if mx >= w:
                    mx = mx - w
                elif mx < 0.0:
                    mx = mx + w
                my = yv[i] + frac * dy
                if my >= h:
                    my = my - h
                elif my < 0.0:
                    my = my + h
                xv[i] = mx
                yv[i] = my


def lottery_mask(ids, step, seed, fraction):
    cdef Py_ssize_t n = ids.shape[0]
    out = np.zeros(n, dtype=bool)
    cdef unsigned char[::1] ov = out.view(np.uint8)
    cdef u64[::1] idv = ids
    cdef u64 sd = <u64> seed, stp = <u64> step, st
    cdef u64 threshold
    cdef bint all_pass = fraction >= 1.0
    cdef Py_ssize_t i
    if all_pass:
        out[:] = True
        return out
    threshold = <u64> int(fraction * 2.0 ** 64)
    with nogil:
        for i in range(n):
            st = _stream(sd, idv[i], P_LOTTERY, stp)
            if _nxt(&st) < threshold:
                ov[i] = 1
    return out


def deliver_pings(x, y, ids, px, py, sender_ids, origin_lps, self_lp,
                  radius, arena_w, arena_h, stats, bucket):
    cdef double[::1] xv = x, yv = y, pxv = px, pyv = py
    cdef u64[::1] idv = ids, sidv = sender_ids
    cdef u32[::1] olpv = origin_lps
    cdef u32[:, :, ::1] sts = stats
    cdef Py_ssize_t bkt = bucket
    cdef u32 me = <u32> self_lp
    cdef double r = radius, w = arena_w, h = arena_h
    cdef double r2 = r * r
    cdef Py_ssize_t n = x.shape[0], np_ = px.shape[0]
    cdef long local = 0, remote = 0
    cdef Py_ssize_t i, j, p, k, gx, gy, c, lo, hi
    cdef int nx, ny, cix, ciy, ox, oy
    cdef double cw, ch, dxx, dyy
    cdef int* cell_of
    cdef int* counts
    cdef int* offsets
    cdef int* order

    if n == 0 or np_ == 0:
        return 0, 0

    nx = <int> (w / r)
    ny = <int> (h / r)
    if nx < 3 or ny < 3:
        # Arena too small for a 3x3 grid neighborhood: plain double loop.
        with nogil:
            for p in range(np_):
                for j in range(n):
                    if idv[j] == sidv[p]:
                        continue
                    dxx = fabs(pxv[p] - xv[j])
                    if dxx > w - dxx:
                        dxx = w - dxx
                    dyy = fabs(pyv[p] - yv[j])
                    if dyy > h - dyy:
                        dyy = h - dyy
                    if dxx * dxx + dyy * dyy <= r2:
                        sts[j, bkt, olpv[p]] += 1
                        if olpv[p] == me:
                            local += 1
                        else:
                            remote += 1
        return local, remote

    cw = w / nx
    ch = h / ny
    cell_of = <int*> malloc(n * sizeof(int))
    counts = <int*> malloc((nx * ny + 1) * sizeof(int))
    offsets = <int*> malloc((nx * ny + 1) * sizeof(int))
    order = <int*> malloc(n * sizeof(int))
    if cell_of == NULL or counts == NULL or offsets == NULL or order == NULL:
        free(cell_of); free(counts); free(offsets); free(order)
        raise MemoryError()
    try:
        with nogil:
            for c in range(nx * ny + 1):
                counts[c] = 0
            for j in range(n):
                gx = <int> (xv[j] / cw)
                if gx >= nx:
                    gx = nx - 1
                gy = <int> (yv[j] / ch)
                if gy >= ny:
                    gy = ny - 1
                cell_of[j] = <int> (gx * ny + gy)
                counts[cell_of[j]] += 1
            offsets[0] = 0
            for c in range(nx * ny):
                offsets[c + 1] = offsets[c] + counts[c]
                counts[c] = 0
            for j in range(n):
                c = cell_of[j]
                order[offsets[c] + counts[c]] = <int> j
                counts[c] += 1
            for p in range(np_):
                cix = <int> (pxv[p] / cw)
                if cix >= nx:
                    cix = nx - 1
                ciy = <int> (pyv[p] / ch)
                if ciy >= ny:
                    ciy = ny - 1
                for ox in range(-1, 2):
                    gx = (cix + ox + nx) % nx
                    for oy in range(-1, 2):
                        gy = (ciy + oy + ny) % ny
                        c = gx * ny + gy
                        lo = offsets[c]
                        hi = offsets[c + 1]
                        for k in range(lo, hi):
                            j = order[k]
                            if idv[j] == sidv[p]:
                                continue
                            dxx = fabs(pxv[p] - xv[j])
                            if dxx > w - dxx:
                                dxx = w - dxx
                            dyy = fabs(pyv[p] - yv[j])
                            if dyy > h - dyy:
                                dyy = h - dyy
                            if dxx * dxx + dyy * dyy <= r2:
                                sts[j, bkt, olpv[p]] += 1
                                if olpv[p] == me:
                                    local += 1
                                else:
                                    remote += 1
    finally:
        free(cell_of)
        free(counts)
        free(offsets)
        free(order)
    return local, remote


def digest_partial(ids, x, y, wx, wy, spd):
    cdef u64[::1] idv = ids
    cdef double[::1] xv = x, yv = y, wxv = wx, wyv = wy, sv = spd
    cdef u64 acc, result = 0
    cdef Py_ssize_t i, n = ids.shape[0]
    with nogil:
        for i in range(n):
            acc = _fold(DIGEST_SALT, idv[i])
            acc = _bits_fold(acc, xv[i])
            acc = _bits_fold(acc, yv[i])
            acc = _bits_fold(acc, wxv[i])
            acc = _bits_fold(acc, wyv[i])
            acc = _bits_fold(acc, sv[i])
            result ^= acc
    return result
