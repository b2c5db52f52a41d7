"""Adaptive migration policies.

Three modes:

* ``static``     -- never migrate.
* ``gaia``       -- communication clustering: an entity whose recent
                    interactions mostly involve one remote LP is moved
                    there, subject to a symmetric balance filter that keeps
                    every LP within (1 +/- delta) of the fair share.
* ``gaia_plus``  -- clustering plus speed-aware load shedding: LPs that run
                    slower than the mesh average push entities toward
                    faster ones, with the symmetric band replaced by widened
                    caps so the imbalance is deliberate.

All decisions use local information only: the per-entity interaction
window and the metrics piggybacked on STEP_DONE frames (busy time, entity
counts) plus locally observed STEP_DONE arrival lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .directory import REASON_CLUSTERING, REASON_LOAD, MigrationIntent

MODE_STATIC = "static"
MODE_GAIA = "gaia"
MODE_GAIA_PLUS = "gaia_plus"
MODES = (MODE_STATIC, MODE_GAIA, MODE_GAIA_PLUS)

# Cap widening / source floor used instead of the symmetric band when load
# shedding is active. With delta=0.1 the widened cap is 1.3x fair share,
# which leaves room for the shed-until-speed-equalized equilibrium.
LOAD_CAP_WIDEN = 3.0
LOAD_SOURCE_FLOOR_FRACTION = 0.25

# Weight of the network-lag component folded into perceived step time.
LAG_WEIGHT = 0.5


@dataclass
class HeuristicConfig:
    mode: str = MODE_STATIC
    window: int = 16            # interaction window length W, in steps
    interval: int = 8           # evaluation interval E, in steps
    theta: float = 0.6          # external-fraction threshold
    migration_factor: int = 8   # minimum window interactions to consider moving
    delta: float = 0.1          # symmetric balance tolerance
    cooldown: int = 24          # steps an entity stays put after migrating
    epsilon: float = 0.15       # relative slowdown that marks an LP slow/fast
    quota: float = 0.2          # fraction of a slow LP's surplus shed per round
    alpha: float = 0.3          # EMA smoothing for speed metrics

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown heuristics mode {self.mode!r}")
        if self.window < 1 or self.interval < 1:
            raise ValueError("window and interval must be >= 1")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must be in (0, 1)")
        if self.migration_factor < 1:
            raise ValueError("migration_factor must be >= 1")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must be in [0, 1)")
        if self.cooldown < 0:
            raise ValueError("cooldown must be >= 0")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be > 0")
        if not 0.0 < self.quota <= 1.0:
            raise ValueError("quota must be in (0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        return self


class SpeedView:
    """One LP's view of how fast every LP runs.

    Busy times come from STEP_DONE piggyback; the network component is the
    locally observed STEP_DONE arrival lag. The minimum lag over peers
    approximates this LP's own attachment lag, so it is charged to self and
    subtracted from the peers' figures; without that correction a laggy LP
    sees uniform inflation everywhere and never realizes it is the slow one.
    """

    def __init__(self, num_lps: int, self_lp: int, alpha: float):
        self.num_lps = num_lps
        self.self_lp = self_lp
        self.alpha = alpha
        self.busy_ema = np.zeros(num_lps)
        self.lag_ema = np.zeros(num_lps)
        self.se_counts = np.zeros(num_lps, dtype=np.int64)
        self._seeded = np.zeros(num_lps, dtype=bool)
        self._lag_seeded = np.zeros(num_lps, dtype=bool)

    def observe_self(self, busy_nanos: int, se_count: int):
        self._fold_busy(self.self_lp, busy_nanos)
        self.se_counts[self.self_lp] = se_count

    def observe_peer(self, lp: int, busy_nanos: int, se_count: int, lag_nanos: int):
        self._fold_busy(lp, busy_nanos)
        self.se_counts[lp] = se_count
        lag = max(0, lag_nanos)
        if self._lag_seeded[lp]:
            self.lag_ema[lp] += self.alpha * (lag - self.lag_ema[lp])
        else:
            self.lag_ema[lp] = lag
            self._lag_seeded[lp] = True

    def _fold_busy(self, lp: int, busy: int):
        if self._seeded[lp]:
            self.busy_ema[lp] += self.alpha * (busy - self.busy_ema[lp])
        else:
            self.busy_ema[lp] = busy
            self._seeded[lp] = True

    @property
    def populated(self) -> bool:
        return bool(self._seeded.all())

    def perceived_step_times(self) -> np.ndarray:
        """Per-LP perceived step time (ns) from this LP's vantage point."""
        out = self.busy_ema.copy()
        peers = [lp for lp in range(self.num_lps) if lp != self.self_lp]
        if not peers:
            return out
        baseline = min(self.lag_ema[lp] for lp in peers)
        for lp in peers:
            out[lp] += LAG_WEIGHT * (self.lag_ema[lp] - baseline)
        out[self.self_lp] += LAG_WEIGHT * baseline
        return out


def gaia_evaluate(ids, window_totals, self_lp, last_migration, step, cfg):
    """Clustering intents for the local entities.

    window_totals: int64 array (n, num_lps) of window interaction counts.
    Returns intents in canonical (entity id) order.
    """
    totals = window_totals.sum(axis=1)
    eligible = totals >= cfg.migration_factor
    eligible &= (step - last_migration) >= cfg.cooldown
    if not eligible.any():
        return []
    idx = np.nonzero(eligible)[0]
    frac = window_totals[idx].astype(np.float64)
    frac /= totals[idx, None]
    ext = frac.copy()
    ext[:, self_lp] = -1.0
    best = np.argmax(ext, axis=1)  # ties resolve to the lowest LP id
    rows = np.arange(idx.size)
    best_frac = ext[rows, best]
    take = (best_frac > cfg.theta) & (best_frac > frac[rows, self_lp])
    intents = []
    for row in np.nonzero(take)[0]:
        i = idx[row]
        intents.append(MigrationIntent(
            se=int(ids[i]), src=self_lp, dst=int(best[row]),
            decided_at=step, reason=REASON_CLUSTERING))
    return intents


def symmetric_caps(num_entities: int, num_lps: int, delta: float):
    """(target cap, source floor) of the symmetric balance band."""
    fair = num_entities / num_lps
    cap = math.floor((1.0 + delta) * fair + 1e-9)
    floor = math.ceil((1.0 - delta) * fair - 1e-9)
    return cap, floor


def symmetric_filter(intents, lp_se_counts, cfg, num_entities, num_lps,
                     ration_divisor: int = 1):
    """Approve intents that keep every LP inside the symmetric band.

    Intents are processed in canonical (entity id) order against live
    counts. With ration_divisor > 1 each target's headroom is split across
    that many potential senders, so several LPs filtering concurrently
    cannot jointly overshoot a cap.
    """
    cap, floor = symmetric_caps(num_entities, num_lps, cfg.delta)
    return _filter_with_caps(intents, lp_se_counts, cap, floor, ration_divisor)


def load_caps(num_entities: int, num_lps: int, delta: float):
    """Widened caps used when load shedding replaces the symmetric band."""
    fair = num_entities / num_lps
    cap = math.floor((1.0 + LOAD_CAP_WIDEN * delta) * fair + 1e-9)
    floor = math.floor(LOAD_SOURCE_FLOOR_FRACTION * fair)
    return cap, floor


def asymmetric_filter(intents, lp_se_counts, cfg, num_entities, num_lps,
                      slow_lps, ration_divisor: int = 1):
    """Cap filter for gaia_plus: widened band, and no intent may target a
    slow LP (pushing work onto the bottleneck defeats the point)."""
    cap, floor = load_caps(num_entities, num_lps, cfg.delta)
    intents = [it for it in intents if it.dst not in slow_lps]
    return _filter_with_caps(intents, lp_se_counts, cap, floor, ration_divisor)


def _filter_with_caps(intents, lp_se_counts, cap, floor, ration_divisor):
    counts = np.asarray(lp_se_counts, dtype=np.int64).copy()
    budget = None
    if ration_divisor > 1:
        budget = np.maximum(0, cap - counts) // ration_divisor
    approved = []
    for intent in sorted(intents, key=lambda it: it.se):
        if counts[intent.src] - 1 < floor:
            continue
        if budget is None:
            if counts[intent.dst] + 1 > cap:
                continue
        else:
            if budget[intent.dst] < 1:
                continue
            budget[intent.dst] -= 1
        counts[intent.src] -= 1
        counts[intent.dst] += 1
        approved.append(intent)
    return approved


@dataclass
class QuotaView:
    mean_step_time: float
    slow_lps: set = field(default_factory=set)
    fast_lps: set = field(default_factory=set)
    outbound_allowance: dict = field(default_factory=dict)
    target_weights: dict = field(default_factory=dict)


def gaia_plus_quota(perceived_step_times, lp_se_counts, cfg) -> QuotaView:
    """Outbound allowances for slow LPs and weights for fast targets.

    A slow LP may shed ceil(quota * count * (t - mean) / t) entities per
    evaluation round; fast LPs receive them weighted by (mean - t).
    """
    times = np.asarray(perceived_step_times, dtype=np.float64)
    counts = np.asarray(lp_se_counts, dtype=np.int64)
    mean = float(times.mean())
    view = QuotaView(mean_step_time=mean)
    if mean <= 0.0:
        return view
    for lp, t in enumerate(times):
        if t > (1.0 + cfg.epsilon) * mean and t > 0.0:
            view.slow_lps.add(lp)
            view.outbound_allowance[lp] = math.ceil(
                cfg.quota * int(counts[lp]) * (t - mean) / t)
        elif t < (1.0 - cfg.epsilon) * mean:
            view.fast_lps.add(lp)
            view.target_weights[lp] = mean - t
    return view


def distribute_allowance(allowance: int, target_weights: dict) -> dict:
    """Split an allowance over targets proportionally to their weights.

    Largest-remainder rounding; ties go to the lowest LP id.
    """
    if allowance <= 0 or not target_weights:
        return {}
    lps = sorted(target_weights)
    total = sum(target_weights[lp] for lp in lps)
    if total <= 0:
        return {}
    raw = {lp: allowance * target_weights[lp] / total for lp in lps}
    shares = {lp: int(raw[lp]) for lp in lps}
    left = allowance - sum(shares.values())
    order = sorted(lps, key=lambda lp: (-(raw[lp] - shares[lp]), lp))
    for lp in order[:left]:
        shares[lp] += 1
    return {lp: s for lp, s in shares.items() if s > 0}


def select_load_intents(ids, window_totals, self_lp, last_migration, step,
                        cfg, shares, exclude):
    """Pick entities to shed, per target, by affinity to that target.

    shares: {target_lp: count}. Entities already claimed by clustering
    intents (or still cooling down) are skipped. Ranking is by descending
    fraction of window interactions attributed to the target, then by
    ascending entity id.
    """
    totals = window_totals.sum(axis=1).astype(np.float64)
    safe = np.where(totals > 0, totals, 1.0)
    eligible = (step - last_migration) >= cfg.cooldown
    taken = set(exclude)
    intents = []
    for target in sorted(shares):
        want = shares[target]
        frac = window_totals[:, target] / safe
        order = np.lexsort((ids, -frac))
        picked = 0
        for i in order:
            if picked >= want:
                break
            se = int(ids[i])
            if not eligible[i] or se in taken:
                continue
            taken.add(se)
            intents.append(MigrationIntent(
                se=se, src=self_lp, dst=target,
                decided_at=step, reason=REASON_LOAD))
            picked += 1
    intents.sort(key=lambda it: it.se)
    return intents
