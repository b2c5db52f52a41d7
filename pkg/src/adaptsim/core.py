"""Identifier types, deterministic pseudo-randomness and toroidal geometry.

Everything here is a pure function. The PRNG is SplitMix64 with the usual
published constants, so any reimplementation (including the compiled
kernels in ``adaptsim._kernels``) can be checked bit-for-bit against this
module.
"""

from __future__ import annotations

import math

MASK64 = 0xFFFFFFFFFFFFFFFF

SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Purpose tags for derived streams. MOBILITY seeds the bootstrap state of an
# entity (position, first waypoint, first speed); WAYPOINT feeds the
# per-step waypoint/speed redraws; BROADCAST_LOTTERY decides who pings.
PURPOSE_MOBILITY = 1
PURPOSE_WAYPOINT = 2
PURPOSE_BROADCAST_LOTTERY = 3

# Salt for the per-entity state digest (arbitrary fixed constant).
DIGEST_SALT = 0x7A3D9B1F54E6C08D

# 2**-53, scales a 53-bit draw into [0, 1).
_U01 = 1.0 / 9007199254740992.0


def splitmix_next(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (new state, output)."""
    state = (state + SPLITMIX_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    z = z ^ (z >> 31)
    return state, z


def fold(acc: int, value: int) -> int:
    """Fold one 64-bit field into an accumulator (one splitmix round)."""
    _, out = splitmix_next((acc ^ (value & MASK64)) & MASK64)
    return out


def derive_stream(global_seed: int, se_id: int, purpose: int, step: int) -> "RngStream":
    """Independent stream for a (seed, entity, purpose, step) key.

    Identical inputs give identical streams on every LP, which is what makes
    the model evolution independent of entity placement.
    """
    acc = global_seed & MASK64
    acc = fold(acc, se_id)
    acc = fold(acc, purpose)
    acc = fold(acc, step)
    return RngStream(acc)


class RngStream:
    """Tiny stateful wrapper over splitmix_next."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & MASK64

    def next_u64(self) -> int:
        self.state, out = splitmix_next(self.state)
        return out

    def next_float(self) -> float:
        """Uniform draw in [0, 1)."""
        return (self.next_u64() >> 11) * _U01

    def next_uniform(self, lo: float, hi: float) -> float:
        return lo + self.next_float() * (hi - lo)


def torus_delta(a, b, arena) -> tuple[float, float]:
    """Per-axis shortest wraparound distance components (non-negative)."""
    w, h = arena
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    if dx > w - dx:
        dx = w - dx
    if dy > h - dy:
        dy = h - dy
    return dx, dy


def torus_distance(a, b, arena) -> float:
    dx, dy = torus_delta(a, b, arena)
    return math.sqrt(dx * dx + dy * dy)


def in_range(a, b, radius: float, arena) -> bool:
    """True iff the torus distance is within radius (boundary inclusive)."""
    dx, dy = torus_delta(a, b, arena)
    return dx * dx + dy * dy <= radius * radius


def signed_wrap(v: float, extent: float) -> float:
    """Map a coordinate difference into (-extent/2, extent/2]."""
    half = extent * 0.5
    if v > half:
        v -= extent
    elif v <= -half:
        v += extent
    return v


def wrap_coord(v: float, extent: float) -> float:
    """Wrap a coordinate into [0, extent); input within one period."""
    if v >= extent:
        v -= extent
    elif v < 0.0:
        v += extent
    return v
