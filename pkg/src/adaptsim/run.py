"""High-level run entry points shared by the CLI and the test suite."""

from __future__ import annotations

import socket
import threading

from .config import RunConfig
from .engine import RunResult, SimDriver
from .metrics import write_merged_trace, write_rows_as_merged
from .netprofile import NetProfile
from .tcprun import TcpLpDriver


def simulate(cfg: RunConfig, policy_factory=None, check_invariants=False,
             shuffle_seed=None, steps=None, on_step=None) -> RunResult:
    """Run all LPs in-process under the deterministic virtual clock."""
    profile = cfg.profile if cfg.profile is not None else NetProfile.zero(cfg.num_lps)
    driver = SimDriver(cfg.model, cfg.heuristics, cfg.num_lps, cfg.seed, profile,
                       policy_factory=policy_factory,
                       check_invariants=check_invariants,
                       shuffle_seed=shuffle_seed)
    return driver.run(cfg.model.steps if steps is None else steps, on_step=on_step)


def free_ports(count: int) -> list:
    socks = []
    try:
        for _ in range(count):
            s = socket.socket()
            s.bind(("127.0.0.1", 0))
            socks.append(s)
        return [s.getsockname()[1] for s in socks]
    finally:
        for s in socks:
            s.close()


def run_threads(cfg: RunConfig, trace_dir=None):
    """Real-threads mode: every LP runs the TCP engine over loopback in one
    process. No determinism guarantees (real time, real sockets); the
    virtual-clock path is the reproducible one."""
    import copy

    trace_dir = trace_dir or cfg.trace_dir
    ports = free_ports(cfg.num_lps)
    peers = [f"127.0.0.1:{p}" for p in ports]
    drivers = []
    for lp in range(cfg.num_lps):
        sub = copy.deepcopy(cfg)
        sub.mode = "tcp"
        sub.peers = peers
        sub.this_lp = lp
        drivers.append(TcpLpDriver(sub, lp, trace_dir=trace_dir))
    errors = []

    def work(d):
        try:
            d.run()
        except Exception as exc:  # surfaced after join
            errors.append((d.lp, exc))

    threads = [threading.Thread(target=work, args=(d,), name=f"lp{d.lp}")
               for d in drivers]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        lp, exc = errors[0]
        raise RuntimeError(f"LP {lp} failed: {exc}") from exc
    return drivers


def write_sim_traces(cfg: RunConfig, result: RunResult, trace_dir) -> None:
    write_merged_trace(trace_dir, result, cfg.echo())


def merge_thread_traces(cfg: RunConfig, trace_dir) -> None:
    """Produce merged steps.csv from per-LP traces written in threads mode."""
    from . import metrics
    rows = metrics.merge_lp_traces(trace_dir, cfg.num_lps)
    write_rows_as_merged(trace_dir, rows, cfg.num_lps)
