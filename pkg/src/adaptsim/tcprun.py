"""TCP-mode driver: runs one LP of a multi-process deployment.

Same phase order as the virtual-clock driver, but over real sockets and
real time: busy time is measured with a monotonic clock and excludes all
barrier waiting, and STEP_DONE arrival lag feeds the speed view exactly
like the simulated arrival times do.
"""

from __future__ import annotations

import logging
import queue
import time
from collections import defaultdict

import numpy as np

from . import frames
from .engine import LpRuntime, PingBatch, RunAbort
from .manet import pack_ping_payload, unpack_ping_payload
from .metrics import PerLpTraceWriter
from .tcpnet import TcpMesh

log = logging.getLogger(__name__)

_POLL_S = 0.05


class TcpLpDriver:
    """One LP's full run over the TCP mesh."""

    def __init__(self, cfg, this_lp: int, trace_dir=None, policy=None):
        self.cfg = cfg
        self.lp = this_lp
        self.rt = LpRuntime(this_lp, cfg.num_lps, cfg.seed, cfg.model,
                            cfg.heuristics, policy)
        self.trace_dir = trace_dir or cfg.trace_dir
        self.mesh = None
        self.digests = []

        # receive-side state, mutated only by the main thread
        self._epoch = defaultdict(int)             # peer -> STEP_DONEs seen
        self._ev_counts = defaultdict(lambda: defaultdict(int))  # peer -> epoch -> n
        self._events_by_tag = defaultdict(list)    # step tag -> [(peer, Event)]
        self._stepdones = defaultdict(dict)        # peer -> step -> (frame, arr_ns)
        self._announces = defaultdict(list)        # step -> [MigrateAnnounce]
        self._datas = {}                           # se -> state blob
        self._peer_done = set()
        self._final_step = cfg.model.steps - 1
        self.total_local = 0
        self.total_remote = 0
        self.total_migrations = 0
        self.total_wall_ns = 0

    @property
    def peers(self):
        return [p for p in range(self.cfg.num_lps) if p != self.lp]

    def run(self):
        cfg = self.cfg
        steps = cfg.model.steps
        rt = self.rt
        self.mesh = TcpMesh(self.lp, cfg.num_lps, cfg.peers, cfg.seed,
                            cfg.connect_retries, cfg.connect_delay_s).connect()
        writer = PerLpTraceWriter(self.trace_dir, self.lp) if self.trace_dir else None
        try:
            self._run_steps(steps, rt, writer)
            self.mesh.try_broadcast(frames.Bye(step=max(0, self._final_step)))
        except Exception:
            if self.mesh is not None:
                self.mesh.try_broadcast(frames.Bye(step=0))
            raise
        finally:
            if writer:
                writer.close()
            self.mesh.close()
        if self.trace_dir:
            self._write_summary()
        return self.digests

    def _write_summary(self) -> None:
        from pathlib import Path

        from .metrics import lcr, write_summary_row

        row = dict(self.cfg.echo())
        ratio = lcr(self.total_local, self.total_remote)
        row.update({
            "lp": self.lp,
            "total_wct_s": self.total_wall_ns / 1e9,
            "avg_lcr": "" if ratio is None else f"{ratio:.6f}",
            "final_lcr": "",
            "total_interactions": self.total_local + self.total_remote,
            "total_migrations": self.total_migrations,
        })
        write_summary_row(Path(self.trace_dir) / f"lp{self.lp}_summary.csv", row)

    # -- main loop ---------------------------------------------------------

    def _run_steps(self, steps, rt, writer) -> None:
        self_batch = None
        own_announces = []
        pending_installs = []
        carry_sent = defaultdict(int)
        boundary_busy = 0
        prev_barrier = time.monotonic_ns()

        for step in range(steps):
            busy = boundary_busy
            boundary_busy = 0
            w0 = time.perf_counter_ns()

            rt.install_inbound(pending_installs)
            pending_installs = []

            batches, unicasts = self._deliverables(step - 1, self_batch)
            counts = rt.deliver_phase(step, batches, unicasts)
            rt.apply_announces(self._announces.pop(step - 1, []) + own_announces, step - 1)
            batch = rt.model_phase(step)
            intents = rt.heuristics_phase(step)
            anns = rt.begin_migrations(step)
            own_announces = anns
            counts.pings_sent = batch.count if batch else 0
            counts.migrations_out = len(intents)

            if batch is not None and self.peers:
                blob = b"".join(
                    frames.encode_frame(frames.Event(
                        step=step, sender=int(sid), seq=0, dest=frames.BROADCAST_DEST,
                        payload=pack_ping_payload(float(x), float(y))))
                    for sid, x, y in zip(batch.sender_ids, batch.px, batch.py))
                if blob:
                    for peer in self.peers:
                        self.mesh.socks[peer].sendall(blob)
            for ann in anns:
                self.mesh.broadcast(ann)
            busy += time.perf_counter_ns() - w0

            sent_now = batch.count if batch else 0
            for peer in self.peers:
                self.mesh.send(peer, frames.StepDone(
                    step=step, sent_count=carry_sent[peer] + sent_now,
                    busy_nanos=busy, se_count=rt.partition.n))
            carry_sent = defaultdict(int)

            ready_ns = time.monotonic_ns()
            self._wait_barrier(step, ready_ns)
            barrier_ns = time.monotonic_ns()

            rt.observe_own(busy)
            for peer in self.peers:
                sd, arr = self._stepdones[peer][step]
                rt.observe_step_done(peer, sd, max(0, arr - ready_ns))

            digest = rt.digest_partial()
            self.digests.append(digest)
            if writer:
                writer.write(step, counts.local, counts.remote, counts.pings_sent,
                             counts.migrations_out, rt.partition.n, busy,
                             barrier_ns - prev_barrier, digest)
            self.total_local += counts.local
            self.total_remote += counts.remote
            self.total_migrations += counts.migrations_out
            self.total_wall_ns += barrier_ns - prev_barrier
            prev_barrier = barrier_ns

            # boundary: forwards first, then migration state, then wait for
            # our own inbound state (forwards precede data on each FIFO link).
            b0 = time.perf_counter_ns()
            out_map = {it.se: it.dst for it in rt.out_migrations}
            if out_map:
                kept = []
                for peer, ev in self._events_by_tag.get(step, []):
                    if ev.dest in out_map:
                        dst = out_map[ev.dest]
                        self.mesh.send(dst, ev)
                        carry_sent[dst] += 1
                    else:
                        kept.append((peer, ev))
                self._events_by_tag[step] = kept
                for se, dst, blob in rt.boundary_extract():
                    self.mesh.send(dst, frames.MigrateData(step=step, se=se, state=blob))
            boundary_busy = time.perf_counter_ns() - b0

            expected = {ann.se for ann in self._announces.get(step, [])
                        if ann.dst == self.lp}
            if expected:
                self._wait_data(step, expected)
                pending_installs = [(se, self._datas.pop(se)) for se in sorted(expected)]
            self_batch = batch

    # -- inbox plumbing ------------------------------------------------------

    def _deliverables(self, tag: int, self_batch):
        """Events due this step: everything carrying step tag `tag`."""
        batches = []
        unicasts = []
        per_origin = defaultdict(list)
        for peer, ev in self._events_by_tag.pop(tag, []):
            if ev.dest == frames.BROADCAST_DEST:
                per_origin[peer].append(ev)
            else:
                unicasts.append((peer, ev))
        for origin in sorted(per_origin):
            evs = per_origin[origin]
            sender = np.asarray([e.sender for e in evs], dtype=np.uint64)
            pos = [unpack_ping_payload(e.payload) for e in evs]
            px = np.asarray([p[0] for p in pos], dtype=np.float64)
            py = np.asarray([p[1] for p in pos], dtype=np.float64)
            batches.append(PingBatch(origin=origin, step=tag, sender_ids=sender,
                                     px=px, py=py))
        if self_batch is not None:
            batches.append(self_batch)
        return batches, unicasts

    def _route(self, peer: int, arr_ns: int, frame) -> None:
        if frame is None:
            if peer in self._peer_done:
                return
            raise RunAbort(f"LP {self.lp}: lost connection to LP {peer}")
        if isinstance(frame, frames.Event):
            self._ev_counts[peer][self._epoch[peer]] += 1
            self._events_by_tag[frame.step].append((peer, frame))
        elif isinstance(frame, frames.StepDone):
            if frame.step != self._epoch[peer]:
                raise RunAbort(
                    f"LP {self.lp}: STEP_DONE({frame.step}) from LP {peer} "
                    f"in epoch {self._epoch[peer]}")
            self._stepdones[peer][frame.step] = (frame, arr_ns)
            self._epoch[peer] += 1
        elif isinstance(frame, frames.MigrateAnnounce):
            self._announces[frame.step].append(frame)
        elif isinstance(frame, frames.MigrateData):
            self._datas[frame.se] = frame.state
        elif isinstance(frame, frames.Bye):
            if frame.step >= self._final_step:
                self._peer_done.add(peer)
            else:
                raise RunAbort(f"LP {self.lp}: LP {peer} aborted at step {frame.step}")
        elif isinstance(frame, frames.Hello):
            raise RunAbort(f"LP {self.lp}: unexpected HELLO from LP {peer} mid-run")

    def _drain_until(self, cond, diagnostic) -> None:
        deadline = time.monotonic() + self.cfg.barrier_timeout_s
        while not cond():
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise RunAbort(diagnostic())
            try:
                peer, arr, frame = self.mesh.rx.get(timeout=min(_POLL_S, remaining))
            except queue.Empty:
                continue
            self._route(peer, arr, frame)

    def _wait_barrier(self, step: int, ready_ns: int) -> None:
        def complete():
            for peer in self.peers:
                got = self._stepdones[peer].get(step)
                if got is None:
                    return False
                sd, _ = got
                have = self._ev_counts[peer][step]
                if have > sd.sent_count:
                    raise RunAbort(
                        f"LP {self.lp}: LP {peer} sent {have} events for step {step}, "
                        f"announced only {sd.sent_count}")
                if have < sd.sent_count:
                    return False
            return True

        def diagnostic():
            parts = []
            for peer in self.peers:
                got = self._stepdones[peer].get(step)
                if got is None:
                    parts.append(f"LP {peer}: STEP_DONE({step}) missing")
                elif self._ev_counts[peer][step] < got[0].sent_count:
                    parts.append(
                        f"LP {peer}: {self._ev_counts[peer][step]}/{got[0].sent_count} "
                        f"events for step {step}")
            return (f"LP {self.lp}: barrier timeout at step {step} "
                    f"({'; '.join(parts) or 'unknown cause'})")

        self._drain_until(complete, diagnostic)

    def _wait_data(self, step: int, expected) -> None:
        def complete():
            return all(se in self._datas for se in expected)

        def diagnostic():
            missing = sorted(se for se in expected if se not in self._datas)
            return (f"LP {self.lp}: migration state for entities {missing} "
                    f"never arrived at step {step}")

        self._drain_until(complete, diagnostic)
