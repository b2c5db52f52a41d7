"""Command-line interface.

Subcommands:

* ``run <config>``            single-process deterministic run (sim mode)
* ``launch <config> --lp N``  one LP of a multi-process TCP deployment
* ``report <dir>...``         charts + WCT gain table from trace dirs
* ``bench``                   kernel backend microbenchmark

Exit codes: 0 success, 1 runtime failure, 2 configuration error,
3 handshake mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .directory import ProtocolViolation
from .engine import RunAbort
from .netprofile import ProfileError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_HANDSHAKE = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="adaptsim",
        description="Distributed time-stepped simulation with adaptive entity migration")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run all LPs in one process (sim mode)")
    p_run.add_argument("config", help="config file path or preset name")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="config override")
    p_run.add_argument("--trace-dir", help="override [run] trace_dir")

    p_launch = sub.add_parser("launch", help="run one LP over TCP")
    p_launch.add_argument("config")
    p_launch.add_argument("--lp", type=int, default=None,
                          help="this process's LP id (falls back to [net] this_lp)")
    p_launch.add_argument("--override", action="append", default=[],
                          metavar="SECTION.KEY=VALUE")
    p_launch.add_argument("--trace-dir")

    p_report = sub.add_parser("report", help="render charts and WCT table")
    p_report.add_argument("trace_dirs", nargs="+")
    p_report.add_argument("--out", default="report", help="output directory")

    p_bench = sub.add_parser("bench", help="compare kernel backends")
    p_bench.add_argument("--num-mh", type=int, default=12000)
    p_bench.add_argument("--pings", type=int, default=2400)
    p_bench.add_argument("--repeats", type=int, default=5)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "launch":
            return cmd_launch(args)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "bench":
            return cmd_bench(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    raise AssertionError("unreachable")


def _print_summary(cfg, result) -> None:
    echo = cfg.echo()
    avg = result.avg_lcr
    final = result.final_lcr
    print("run complete: " + " ".join(f"{k}={v}" for k, v in echo.items()))
    print(f"kernel_backend={result.backend} "
          f"total_wct_s={result.total_wct_ns / 1e9:.6f} "
          f"avg_lcr={'n/a' if avg is None else f'{avg:.4f}'} "
          f"final_lcr={'n/a' if final is None else f'{final:.4f}'} "
          f"total_interactions={result.total_interactions} "
          f"total_migrations={result.total_migrations}")


def cmd_run(args) -> int:
    from .run import merge_thread_traces, run_threads, simulate, write_sim_traces

    cfg = load_config(args.config, args.override)
    if args.trace_dir:
        cfg.trace_dir = args.trace_dir
    if cfg.mode != "sim":
        raise ConfigError("`adaptsim run` needs run.mode=sim; use `launch` for tcp")
    try:
        if cfg.threads:
            if not cfg.trace_dir:
                raise ConfigError("threads mode needs run.trace_dir for its traces")
            run_threads(cfg)
            merge_thread_traces(cfg, cfg.trace_dir)
            print(f"threads-mode run complete; traces in {cfg.trace_dir}")
            return EXIT_OK
        result = simulate(cfg)
        if cfg.trace_dir:
            write_sim_traces(cfg, result, cfg.trace_dir)
        _print_summary(cfg, result)
        return EXIT_OK
    except (RunAbort, ProtocolViolation, ProfileError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def cmd_launch(args) -> int:
    from .tcpnet import HandshakeError, MeshError
    from .tcprun import TcpLpDriver

    cfg = load_config(args.config, args.override)
    if args.trace_dir:
        cfg.trace_dir = args.trace_dir
    if cfg.mode != "tcp":
        raise ConfigError("`adaptsim launch` needs run.mode=tcp")
    this_lp = args.lp if args.lp is not None else cfg.this_lp
    if this_lp is None or not 0 <= this_lp < cfg.num_lps:
        raise ConfigError(f"--lp must be in [0, {cfg.num_lps})")
    driver = TcpLpDriver(cfg, this_lp)
    try:
        driver.run()
    except HandshakeError as exc:
        print(f"handshake failed: {exc}", file=sys.stderr)
        return EXIT_HANDSHAKE
    except (MeshError, RunAbort, ProtocolViolation, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"LP {this_lp} finished {cfg.model.steps} steps")
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import ReportError, gain_table, render_report

    try:
        runs, warnings = render_report(args.trace_dirs, args.out)
    except ReportError as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(gain_table(runs), end="")
    print(f"charts written to {args.out}/")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_bench

    run_bench(num_mh=args.num_mh, pings=args.pings, repeats=args.repeats)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
