"""Time-stepped synchronization engine.

Each step runs a fixed phase order on every LP:

1. deliver the previous step's events in canonical (sender, seq) order
2. apply the previous step's migration announcements to the placement map
3. model update (mobility, broadcast lottery), emitting this step's events
4. heuristic evaluation producing migration intents
5. announce approved migrations
6. send per-peer STEP_DONE carrying sent count, busy time and entity count
7. barrier: wait until every peer finished the step and all counted frames
   arrived

Migration state (MIGRATE_DATA) travels at the step boundary, after the
sender's barrier: any unicast events addressed to the migrating entity are
forwarded first on the same FIFO link, so the receiver delivers them at
exactly the step they would have been delivered at without the migration.

Events created at step t are delivered at step t+1 (one-step lookahead).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import frames
from .directory import Directory, MigrationIntent, ProtocolViolation, REASON_LOAD
from .heuristics import (
    MODE_GAIA,
    MODE_GAIA_PLUS,
    MODE_STATIC,
    SpeedView,
    asymmetric_filter,
    distribute_allowance,
    gaia_evaluate,
    gaia_plus_quota,
    select_load_intents,
    symmetric_filter,
)
from .manet import ManetPartition, pack_ping_payload
from .simnet import SimNetwork

log = logging.getLogger(__name__)

# Virtual CPU cost model (nanoseconds) for sim mode. Remote deliveries are
# charged the per-message marshaling/middleware overhead that an intra-LP
# hand-off avoids; this is the computational side of what communication
# clustering saves, since the broadcast wire fan-out itself is batched
# per LP and therefore placement-invariant.
COST_STEP_BASE_NS = 50_000
COST_PER_SE_NS = 2_000
COST_LOCAL_DELIVERY_NS = 1_000
COST_REMOTE_DELIVERY_NS = 25_000
COST_EVENT_FRAME_NS = 5_000
COST_MIGRATION_NS = 100_000


class RunAbort(Exception):
    """Unrecoverable engine failure (peer loss, protocol violation...)."""


@dataclass(slots=True)
class PingBatch:
    """All broadcast pings emitted by one LP in one step."""
    origin: int
    step: int
    sender_ids: np.ndarray
    px: np.ndarray
    py: np.ndarray

    @property
    def count(self) -> int:
        return self.sender_ids.size


@dataclass
class StepCounts:
    local: int = 0
    remote: int = 0
    pings_sent: int = 0
    event_frames_sent: int = 0
    migrations_out: int = 0

    @property
    def deliveries(self) -> int:
        return self.local + self.remote


class LpRuntime:
    """Model, directory replica and heuristic state of one LP.

    Drivers (virtual-clock or TCP) call the phase methods in the engine's
    fixed order; the runtime itself knows nothing about transports.
    """

    def __init__(self, lp: int, num_lps: int, seed: int, model_cfg, heur_cfg,
                 policy=None):
        self.lp = lp
        self.num_lps = num_lps
        self.seed = seed
        self.model_cfg = model_cfg
        self.heur_cfg = heur_cfg
        self.directory = Directory(model_cfg.num_mh, num_lps)
        self.partition = ManetPartition(model_cfg, seed, self.directory.owned_by(lp),
                                        num_lps, heur_cfg.window)
        self.speed = SpeedView(num_lps, lp, heur_cfg.alpha)
        self.policy = policy if policy is not None else GaiaPolicy()
        self.out_migrations: list[MigrationIntent] = []
        self.delivered_unicasts: list = []

    # -- phases -----------------------------------------------------------

    def install_inbound(self, arrivals) -> None:
        self.partition.install_many(arrivals)

    def deliver_phase(self, step: int, batches, unicasts) -> StepCounts:
        """Phase 1. `batches` are PingBatch objects, `unicasts` are
        (origin_lp, Event) pairs, all carrying step tag step-1."""
        counts = StepCounts()
        self.delivered_unicasts = []
        self.partition.zero_stats_bucket(step)
        seen = set()
        if batches:
            sender = np.concatenate([b.sender_ids for b in batches])
            px = np.concatenate([b.px for b in batches])
            py = np.concatenate([b.py for b in batches])
            origin = np.concatenate([
                np.full(b.count, b.origin, dtype=np.uint32) for b in batches])
            order = np.argsort(sender, kind="stable")
            sender = sender[order]
            if sender.size > 1 and (sender[1:] == sender[:-1]).any():
                raise ProtocolViolation(f"duplicate ping sender at step {step}")
            if unicasts:
                seen.update((int(s), 0) for s in sender)
            local, remote = self.partition.deliver_pings(
                step, px[order], py[order], sender, origin[order], self.lp)
            counts.local += local
            counts.remote += remote
        for origin, ev in sorted(unicasts, key=lambda item: (item[1].sender, item[1].seq)):
            key = (ev.sender, ev.seq)
            if key in seen:
                raise ProtocolViolation(
                    f"duplicate event (sender={ev.sender}, seq={ev.seq}) at step {step}")
            seen.add(key)
            self.partition.record_interaction(ev.dest, origin, step)
            if origin == self.lp:
                counts.local += 1
            else:
                counts.remote += 1
            self.delivered_unicasts.append((origin, ev))
        return counts

    def apply_announces(self, announces, prev_step: int) -> None:
        """Phase 2."""
        self.directory.apply_boundary_updates(announces, prev_step)

    def model_phase(self, step: int):
        """Phase 3: move everyone, run the lottery, build the ping batch."""
        self.partition.advance(step)
        ids, px, py = self.partition.broadcasters(step)
        if ids.size == 0:
            return None
        return PingBatch(origin=self.lp, step=step,
                         sender_ids=ids.copy(), px=px.copy(), py=py.copy())

    def heuristics_phase(self, step: int) -> list:
        """Phase 4: migration intents, already cap-filtered."""
        intents = self.policy.evaluate(self, step)
        for it in intents:
            if it.src != self.lp:
                raise ProtocolViolation(f"policy produced intent from foreign LP: {it}")
            # Raises if the entity is not local (policy bug).
            self.partition.index_of(it.se)
        self.out_migrations = intents
        return intents

    def begin_migrations(self, step: int):
        """Phase 5: announce frames for the approved intents."""
        anns = []
        for it in self.out_migrations:
            self.partition.mark_migrated(it.se, step)
            anns.append(frames.MigrateAnnounce(step=step, se=it.se, src=it.src, dst=it.dst))
        return anns

    def boundary_extract(self):
        """Serialize and drop the migrating entities (post-barrier)."""
        blobs = []
        for it in self.out_migrations:
            blobs.append((it.se, it.dst, self.partition.pack_state(it.se)))
        self.partition.remove_many([it.se for it in self.out_migrations])
        self.out_migrations = []
        return blobs

    def digest_partial(self) -> int:
        return self.partition.digest_partial()

    def observe_step_done(self, peer: int, sd, lag_nanos: int) -> None:
        self.speed.observe_peer(peer, sd.busy_nanos, sd.se_count, lag_nanos)

    def observe_own(self, busy_nanos: int) -> None:
        self.speed.observe_self(busy_nanos, self.partition.n)


# -- policies --------------------------------------------------------------

class GaiaPolicy:
    """Default policy: dispatches on the configured heuristics mode."""

    def evaluate(self, rt: LpRuntime, step: int) -> list:
        cfg = rt.heur_cfg
        if cfg.mode == MODE_STATIC:
            return []
        if step == 0 or step % cfg.interval != 0:
            return []
        counts = rt.directory.counts()
        ids = rt.partition.ids
        totals = rt.partition.window_totals()
        last = rt.partition.last_migration
        num = rt.model_cfg.num_mh
        ration = max(1, rt.num_lps - 1)
        if cfg.mode == MODE_GAIA:
            intents = gaia_evaluate(ids, totals, rt.lp, last, step, cfg)
            return symmetric_filter(intents, counts, cfg, num, rt.num_lps, ration)
        # gaia_plus
        if not rt.speed.populated:
            return []
        perceived = rt.speed.perceived_step_times()
        quota = gaia_plus_quota(perceived, counts, cfg)
        if rt.lp in quota.fast_lps:
            clustering = []
        else:
            clustering = gaia_evaluate(ids, totals, rt.lp, last, step, cfg)
        load = []
        if rt.lp in quota.slow_lps and quota.target_weights:
            shares = distribute_allowance(quota.outbound_allowance[rt.lp],
                                          quota.target_weights)
            load = select_load_intents(ids, totals, rt.lp, last, step, cfg,
                                       shares, exclude={it.se for it in clustering})
        return asymmetric_filter(clustering + load, counts, cfg, num,
                                 rt.num_lps, quota.slow_lps, ration)


class ScriptedPolicy:
    """Test policy: migrate exactly the scripted entities at given steps.

    schedule: {step: [(se, dst), ...]}. Bypasses caps and thresholds but
    still runs through the full migration protocol.
    """

    def __init__(self, schedule):
        self.schedule = schedule

    def evaluate(self, rt: LpRuntime, step: int) -> list:
        intents = []
        for se, dst in self.schedule.get(step, ()):
            if rt.directory.lookup(se) != rt.lp or dst == rt.lp:
                continue
            intents.append(MigrationIntent(se=se, src=rt.lp, dst=dst,
                                           decided_at=step, reason=REASON_LOAD))
        return sorted(intents, key=lambda it: it.se)


# -- canonical order helper (exposed for tests) -----------------------------

def canonical_order(events):
    """Sort one step's events by (sender, seq); duplicates are an error."""
    ordered = sorted(events, key=lambda ev: (ev.sender, ev.seq))
    for a, b in zip(ordered, ordered[1:]):
        if a.sender == b.sender and a.seq == b.seq:
            raise ProtocolViolation(f"duplicate event (sender={a.sender}, seq={a.seq})")
    return ordered


def compute_busy_ns(counts: StepCounts, se_count: int, slowdown: float) -> int:
    total = (COST_STEP_BASE_NS
             + COST_PER_SE_NS * se_count
             + COST_LOCAL_DELIVERY_NS * counts.local
             + COST_REMOTE_DELIVERY_NS * counts.remote
             + COST_EVENT_FRAME_NS * counts.event_frames_sent
             + COST_MIGRATION_NS * counts.migrations_out)
    return int(round(slowdown * total))


# -- virtual-clock driver ----------------------------------------------------

@dataclass
class StepRow:
    step: int
    local: int
    remote: int
    pings_sent: int
    migrations: int
    wall_nanos: int
    digest: int
    se_counts: list
    busy_nanos: list


@dataclass
class RunResult:
    rows: list = field(default_factory=list)
    digests: list = field(default_factory=list)
    total_wct_ns: int = 0
    num_lps: int = 1
    backend: str = ""
    mode: str = MODE_STATIC

    @property
    def total_interactions(self) -> int:
        return sum(r.local + r.remote for r in self.rows)

    @property
    def total_migrations(self) -> int:
        return sum(r.migrations for r in self.rows)

    def lcr_series(self):
        out = []
        for r in self.rows:
            tot = r.local + r.remote
            out.append(r.local / tot if tot else None)
        return out

    @property
    def avg_lcr(self):
        vals = [v for v in self.lcr_series() if v is not None]
        return sum(vals) / len(vals) if vals else None

    @property
    def final_lcr(self):
        for v in reversed(self.lcr_series()):
            if v is not None:
                return v
        return None


class SimDriver:
    """Runs every LP in one process under a deterministic virtual clock.

    Wire behavior (latency, jitter, bandwidth queueing, per-link FIFO) and
    CPU cost are modeled in integer virtual nanoseconds; two runs with the
    same configuration produce identical traces.
    """

    def __init__(self, model_cfg, heur_cfg, num_lps: int, seed: int, profile,
                 policy_factory=None, check_invariants=False, shuffle_seed=None):
        from . import _kernels
        self.model_cfg = model_cfg
        self.heur_cfg = heur_cfg
        self.num_lps = num_lps
        self.seed = seed
        self.profile = profile
        self.check_invariants = check_invariants
        self.backend = _kernels.BACKEND
        self.net = SimNetwork(profile, num_lps, seed) if num_lps > 1 else None
        self.lps = []
        for lp in range(num_lps):
            policy = policy_factory(lp) if policy_factory else None
            self.lps.append(LpRuntime(lp, num_lps, seed, model_cfg, heur_cfg, policy))
        self._shuffle = None
        if shuffle_seed is not None:
            import random
            self._shuffle = random.Random(shuffle_seed)
        #: test hook, {step: [(origin_lp, Event), ...]}
        self.injections = {}
        self._ping_frame_size = frames.encoded_size(
            frames.Event(step=0, sender=0, seq=0, dest=frames.BROADCAST_DEST,
                         payload=pack_ping_payload(0.0, 0.0)))
        self._stepdone_size = frames.encoded_size(frames.StepDone(0, 0, 0, 0))
        self._announce_size = frames.encoded_size(
            frames.MigrateAnnounce(step=0, se=0, src=0, dst=1))

    def run(self, steps: int, on_step=None) -> RunResult:
        L = self.num_lps
        lps = self.lps
        result = RunResult(num_lps=L, backend=self.backend, mode=self.heur_cfg.mode)

        start_ns = [0] * L
        inbox_batches = [[] for _ in range(L)]
        inbox_unicasts = [[] for _ in range(L)]
        inbox_announces = [[] for _ in range(L)]
        inbox_installs = [[] for _ in range(L)]
        carry_sent = [[0] * L for _ in range(L)]  # forwards sent at the boundary
        prev_wall = 0

        for step in range(steps):
            next_batches = [[] for _ in range(L)]
            next_unicasts = [[] for _ in range(L)]
            next_announces = [[] for _ in range(L)]
            step_counts = []
            finish_ns = [0] * L
            busy_ns = [0] * L
            stepdone_arrival = [[0] * L for _ in range(L)]  # [dst][src]
            stepdones = [[None] * L for _ in range(L)]

            for lp in range(L):
                rt = lps[lp]
                rt.install_inbound(inbox_installs[lp])
                batches = inbox_batches[lp]
                unicasts = inbox_unicasts[lp]
                if self._shuffle is not None:
                    self._shuffle.shuffle(batches)
                    self._shuffle.shuffle(unicasts)
                counts = rt.deliver_phase(step, batches, unicasts)
                rt.apply_announces(inbox_announces[lp], step - 1)
                batch = rt.model_phase(step)
                intents = rt.heuristics_phase(step)
                announces = rt.begin_migrations(step)
                counts.pings_sent = batch.count if batch else 0
                counts.migrations_out = len(intents)
                counts.event_frames_sent = (
                    counts.pings_sent * (L - 1) + sum(carry_sent[lp]))
                step_counts.append(counts)

                busy = compute_busy_ns(counts, rt.partition.n,
                                       self.profile.slowdown(lp))
                busy_ns[lp] = busy
                finish = start_ns[lp] + busy
                finish_ns[lp] = finish

                # Queue this step's frames; STEP_DONE goes last on each link.
                if batch is not None:
                    next_batches[lp].append(batch)
                for dst in range(L):
                    if dst == lp:
                        continue
                    sent = carry_sent[lp][dst]
                    if batch is not None:
                        self.net.deliver_burst(lp, dst, finish,
                                               self._ping_frame_size, batch.count)
                        next_batches[dst].append(batch)
                        sent += batch.count
                    for ann in announces:
                        self.net.deliver(lp, dst, finish, self._announce_size)
                        next_announces[dst].append(ann)
                    sd = frames.StepDone(step=step, sent_count=sent,
                                         busy_nanos=busy, se_count=rt.partition.n)
                    arr = self.net.deliver(lp, dst, finish, self._stepdone_size)
                    stepdones[dst][lp] = sd
                    stepdone_arrival[dst][lp] = arr
                for ann in announces:
                    next_announces[lp].append(ann)

            # Test hook: synthetic unicast events emitted "during" this step,
            # routed by the origin's placement view (stale by design when the
            # destination is migrating this very step).
            for origin, ev in self.injections.pop(step, ()):
                target = lps[origin].directory.lookup(ev.dest)
                next_unicasts[target].append((origin, ev))
            carry_sent = [[0] * L for _ in range(L)]

            # Barrier + speed view updates.
            barrier_ns = [0] * L
            for lp in range(L):
                rt = lps[lp]
                beta = finish_ns[lp]
                for src in range(L):
                    if src == lp:
                        continue
                    arr = stepdone_arrival[lp][src]
                    beta = max(beta, arr)
                barrier_ns[lp] = beta
                rt.observe_own(busy_ns[lp])
                for src in range(L):
                    if src == lp:
                        continue
                    lag = max(0, stepdone_arrival[lp][src] - finish_ns[lp])
                    rt.observe_step_done(src, stepdones[lp][src], lag)

            # Digest at the step boundary (migrating entities still counted
            # at their current owner).
            digest = 0
            for rt in lps:
                digest ^= rt.digest_partial()
            result.digests.append(digest)

            if self.check_invariants:
                # Consistent snapshot: residency during this step vs the
                # directory at this step's epoch (before the boundary moves
                # entities and before the next epoch's announcements apply).
                self._assert_invariants(step)

            # Boundary: forward stale unicasts, ship migration state, then
            # hand residency over.
            next_installs = [[] for _ in range(L)]
            boundary_arrival = [0] * L
            migrations_total = 0
            for lp in range(L):
                rt = lps[lp]
                out_map = {it.se: it.dst for it in rt.out_migrations}
                migrations_total += len(out_map)
                if not out_map:
                    continue
                forwards = []
                kept = []
                for origin, ev in next_unicasts[lp]:
                    if ev.dest in out_map:
                        forwards.append((origin, ev))
                    else:
                        kept.append((origin, ev))
                next_unicasts[lp] = kept
                for origin, ev in sorted(forwards, key=lambda it: (it[1].sender, it[1].seq)):
                    dst = out_map[ev.dest]
                    size = frames.encoded_size(ev)
                    arr = self.net.deliver(lp, dst, barrier_ns[lp], size)
                    next_unicasts[dst].append((origin, ev))
                    boundary_arrival[dst] = max(boundary_arrival[dst], arr)
                    carry_sent[lp][dst] += 1
                for se, dst, blob in rt.boundary_extract():
                    data = frames.MigrateData(step=step, se=se, state=blob)
                    arr = self.net.deliver(lp, dst, barrier_ns[lp],
                                           frames.encoded_size(data))
                    next_installs[dst].append((se, blob))
                    boundary_arrival[dst] = max(boundary_arrival[dst], arr)

            for lp in range(L):
                start_ns[lp] = max(barrier_ns[lp], boundary_arrival[lp])

            wall_now = max(start_ns)
            counts_per_lp = lps[0].directory.counts() if L else []
            row = StepRow(
                step=step,
                local=sum(c.local for c in step_counts),
                remote=sum(c.remote for c in step_counts),
                pings_sent=sum(c.pings_sent for c in step_counts),
                migrations=migrations_total,
                wall_nanos=wall_now - prev_wall,
                digest=digest,
                se_counts=[int(v) for v in counts_per_lp],
                busy_nanos=list(busy_ns),
            )
            prev_wall = wall_now
            result.rows.append(row)
            if on_step is not None:
                on_step(self, step, row)

            inbox_batches = next_batches
            inbox_unicasts = next_unicasts
            inbox_announces = next_announces
            inbox_installs = next_installs

        result.total_wct_ns = prev_wall
        return result

    def _assert_invariants(self, step: int) -> None:
        ref = self.lps[0].directory.replica_bytes()
        for rt in self.lps[1:]:
            if rt.directory.replica_bytes() != ref:
                raise AssertionError(f"directory replicas diverged at step {step}")
        counts = self.lps[0].directory.counts()
        if int(counts.sum()) != self.model_cfg.num_mh:
            raise AssertionError(f"entity count not conserved at step {step}")
        for lp, rt in enumerate(self.lps):
            if rt.partition.n != int(counts[lp]):
                raise AssertionError(
                    f"partition size {rt.partition.n} != directory count "
                    f"{int(counts[lp])} for LP {lp} at step {step}")
