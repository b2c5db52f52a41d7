"""Mobile ad-hoc network benchmark model.

N mobile hosts on a rectangular torus follow a random-waypoint mobility
model; each step a random ~20% subset broadcasts a position ping that
reaches every host within the transmission radius. All randomness is drawn
from per-(entity, purpose, step) keyed streams, so trajectories and
lotteries are independent of how entities are spread over LPs.

State is kept as structure-of-arrays sorted by entity id; the per-step
loops run in the selected kernel backend.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from . import core
from .directory import NEVER_MIGRATED, pack_se_state, unpack_se_state

#: in-memory "never migrated" marker (far enough back that any cooldown passes)
NEVER_STEP = -(1 << 40)

_PING_PAYLOAD = struct.Struct(">dd")


@dataclass
class ModelConfig:
    num_mh: int = 3000
    arena_w: float = 10000.0
    arena_h: float = 10000.0
    radius: float = 250.0
    fraction: float = 0.2
    steps: int = 500
    speed_min: float = 1.0
    speed_max: float = 5.0
    waypoint_eps: float = 0.0

    def validate(self):
        if self.num_mh < 1:
            raise ValueError("num_mh must be >= 1")
        if self.arena_w <= 0 or self.arena_h <= 0 or self.radius <= 0:
            raise ValueError("arena and radius must be positive")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.speed_min <= 0 or self.speed_max < self.speed_min:
            raise ValueError("need 0 < speed_min <= speed_max")
        return self

    @property
    def arena(self):
        return (self.arena_w, self.arena_h)


def pack_ping_payload(x: float, y: float) -> bytes:
    return _PING_PAYLOAD.pack(x, y)


def unpack_ping_payload(payload: bytes):
    if len(payload) != _PING_PAYLOAD.size:
        raise ValueError(f"ping payload of {len(payload)} bytes, expected {_PING_PAYLOAD.size}")
    return _PING_PAYLOAD.unpack(payload)


class ManetPartition:
    """The locally owned shard of the model on one LP."""

    def __init__(self, cfg: ModelConfig, seed: int, ids: np.ndarray,
                 num_lps: int, window: int):
        self.cfg = cfg
        self.seed = seed
        self.num_lps = num_lps
        self.window = window
        self.ids = np.sort(np.asarray(ids, dtype=np.uint64))
        self.x, self.y, self.wx, self.wy, self.speed = kernels.se_init(
            self.ids, seed, cfg.arena_w, cfg.arena_h, cfg.speed_min, cfg.speed_max)
        n = self.ids.size
        self.stats = np.zeros((n, window, num_lps), dtype=np.uint32)
        self.last_migration = np.full(n, NEVER_STEP, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.ids.size

    def index_of(self, se: int) -> int:
        i = int(np.searchsorted(self.ids, np.uint64(se)))
        if i >= self.ids.size or self.ids[i] != se:
            raise KeyError(f"entity {se} is not local")
        return i

    # -- per-step model phases ------------------------------------------

    def advance(self, step: int) -> None:
        kernels.rwp_advance(self.ids, self.x, self.y, self.wx, self.wy,
                            self.speed, step, self.seed,
                            self.cfg.arena_w, self.cfg.arena_h,
                            self.cfg.speed_min, self.cfg.speed_max,
                            self.cfg.waypoint_eps)

    def broadcasters(self, step: int):
        """Local entities that ping this step (ids ascending)."""
        mask = kernels.lottery_mask(self.ids, step, self.seed, self.cfg.fraction)
        return self.ids[mask], self.x[mask], self.y[mask]

    def zero_stats_bucket(self, step: int) -> None:
        self.stats[:, step % self.window, :] = 0

    def deliver_pings(self, step: int, px, py, sender_ids, origin_lps, self_lp: int):
        """Range-filter a step's pings; returns (local, remote) counts."""
        return kernels.deliver_pings(
            self.x, self.y, self.ids, px, py, sender_ids, origin_lps,
            self_lp, self.cfg.radius, self.cfg.arena_w, self.cfg.arena_h,
            self.stats, step % self.window)

    def record_interaction(self, se: int, counterpart_lp: int, step: int) -> None:
        """Count one delivered interaction for a local entity."""
        i = self.index_of(se)
        self.stats[i, step % self.window, counterpart_lp] += 1

    def digest_partial(self) -> int:
        return kernels.digest_partial(self.ids, self.x, self.y,
                                      self.wx, self.wy, self.speed)

    def window_totals(self) -> np.ndarray:
        return self.stats.sum(axis=1, dtype=np.int64)

    # -- migration support ----------------------------------------------

    def mark_migrated(self, se: int, step: int) -> None:
        self.last_migration[self.index_of(se)] = step

    def pack_state(self, se: int) -> bytes:
        i = self.index_of(se)
        model_state = (self.x[i], self.y[i], self.wx[i], self.wy[i], self.speed[i])
        last = int(self.last_migration[i])
        blob_last = NEVER_MIGRATED if last < 0 else last
        return pack_se_state(model_state, blob_last, self.stats[i])

    def remove_many(self, ses) -> None:
        if not ses:
            return
        keep = ~np.isin(self.ids, np.asarray(sorted(ses), dtype=np.uint64))
        self.ids = self.ids[keep]
        self.x = self.x[keep].copy()
        self.y = self.y[keep].copy()
        self.wx = self.wx[keep].copy()
        self.wy = self.wy[keep].copy()
        self.speed = self.speed[keep].copy()
        self.stats = self.stats[keep].copy()
        self.last_migration = self.last_migration[keep].copy()

    def install_many(self, arrivals) -> None:
        """Insert migrated-in entities; arrivals is [(se_id, state_blob)]."""
        if not arrivals:
            return
        add_ids = []
        add_cols = ([], [], [], [], [])
        add_stats = []
        add_last = []
        for se, blob in sorted(arrivals):
            model_state, blob_last, window = unpack_se_state(blob)
            if window.shape != (self.window, self.num_lps):
                window = _refit_window(window, self.window, self.num_lps)
            add_ids.append(se)
            for col, val in zip(add_cols, model_state):
                col.append(val)
            add_stats.append(window)
            add_last.append(NEVER_STEP if blob_last == NEVER_MIGRATED else blob_last)
        ids = np.concatenate([self.ids, np.asarray(add_ids, dtype=np.uint64)])
        order = np.argsort(ids, kind="stable")
        self.ids = ids[order]
        for name, col in zip(("x", "y", "wx", "wy", "speed"), add_cols):
            merged = np.concatenate([getattr(self, name), np.asarray(col, dtype=np.float64)])
            setattr(self, name, merged[order].copy())
        stats = np.concatenate([self.stats, np.stack(add_stats).astype(np.uint32)])
        self.stats = stats[order].copy()
        last = np.concatenate([self.last_migration, np.asarray(add_last, dtype=np.int64)])
        self.last_migration = last[order].copy()


def _refit_window(window, target_w, target_lps):
    """Pad/trim a migrated-in window to this run's dimensions (defensive)."""
    out = np.zeros((target_w, target_lps), dtype=np.uint32)
    w = min(target_w, window.shape[0])
    lps = min(target_lps, window.shape[1])
    out[:w, :lps] = window[:w, :lps]
    return out


# --- scalar helpers (unit tests, oracles) --------------------------------

def rwp_step(se_id: int, pos, waypoint, speed: float, step: int, seed: int,
             cfg: ModelConfig):
    """Single-entity random-waypoint step; returns (pos, waypoint, speed)."""
    ids = np.asarray([se_id], dtype=np.uint64)
    x = np.asarray([pos[0]])
    y = np.asarray([pos[1]])
    wx = np.asarray([waypoint[0]])
    wy = np.asarray([waypoint[1]])
    spd = np.asarray([speed])
    kernels.rwp_advance(ids, x, y, wx, wy, spd, step, seed,
                        cfg.arena_w, cfg.arena_h, cfg.speed_min, cfg.speed_max,
                        cfg.waypoint_eps)
    return (x[0], y[0]), (wx[0], wy[0]), spd[0]


def choose_broadcasters(num_mh: int, fraction: float, step: int, seed: int):
    """Global broadcast lottery outcome (placement-independent)."""
    ids = np.arange(num_mh, dtype=np.uint64)
    mask = kernels.lottery_mask(ids, step, seed, fraction)
    return ids[mask]


def initial_state(se_id: int, seed: int, cfg: ModelConfig):
    """Bootstrap state of one entity: (pos, waypoint, speed)."""
    ids = np.asarray([se_id], dtype=np.uint64)
    x, y, wx, wy, spd = kernels.se_init(ids, seed, cfg.arena_w, cfg.arena_h,
                                        cfg.speed_min, cfg.speed_max)
    return (x[0], y[0]), (wx[0], wy[0]), spd[0]
