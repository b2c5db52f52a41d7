"""Network profiles for the simulated transport.

A profile file is INI-style, one ``[link <from> <to>]`` section per
directed pair plus optional ``[lp <id>]`` sections:

    [link 0 1]
    latency_ms = 184.85
    jitter_ms = 0
    bandwidth_mbps = 17.4      ; or "unlimited"

    [lp 2]
    cpu_slowdown = 3.0

Latencies are one-way. The bundled ``testbed-paper`` profile carries the
three-host Internet testbed measurements (round-trip times halved per
direction, measured bandwidths, and CPU slowdown factors approximating
the hosts' core-count disparity).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

NS_PER_MS = 1_000_000


class ProfileError(Exception):
    pass


@dataclass
class LinkSpec:
    latency_ns: int = 0
    jitter_ns: int = 0
    bandwidth_mbps: float | None = None  # None = unlimited

    def serialization_ns(self, size_bytes: int) -> int:
        if self.bandwidth_mbps is None:
            return 0
        # mbps = 1e6 bit/s, so one bit takes 1000/mbps ns.
        return int(round(size_bytes * 8 * 1000.0 / self.bandwidth_mbps))


@dataclass
class NetProfile:
    links: dict = field(default_factory=dict)      # (from, to) -> LinkSpec
    slowdowns: dict = field(default_factory=dict)  # lp -> factor >= 1
    default_link: LinkSpec | None = None

    @classmethod
    def zero(cls, num_lps: int) -> "NetProfile":
        """Ideal network: zero latency, unlimited bandwidth, no slowdown."""
        prof = cls(default_link=LinkSpec())
        for lp in range(num_lps):
            prof.slowdowns[lp] = 1.0
        return prof

    def link(self, src: int, dst: int) -> LinkSpec:
        spec = self.links.get((src, dst))
        if spec is None:
            if self.default_link is not None:
                return self.default_link
            raise ProfileError(f"no link specification for {src} -> {dst}")
        return spec

    def slowdown(self, lp: int) -> float:
        return self.slowdowns.get(lp, 1.0)

    def validate(self, num_lps: int) -> None:
        if self.default_link is not None:
            return
        for src in range(num_lps):
            for dst in range(num_lps):
                if src != dst and (src, dst) not in self.links:
                    raise ProfileError(
                        f"profile missing [link {src} {dst}] for a {num_lps}-LP run")


def parse_profile(text: str) -> NetProfile:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ProfileError(f"profile parse error: {exc}") from exc

    prof = NetProfile()
    for section in parser.sections():
        words = section.split()
        if words[0] == "link" and len(words) == 3:
            src, dst = int(words[1]), int(words[2])
            if src == dst:
                raise ProfileError(f"[{section}]: self-link not allowed")
            opts = parser[section]
            latency_ms = float(opts.get("latency_ms", "0"))
            jitter_ms = float(opts.get("jitter_ms", "0"))
            if latency_ms < 0 or jitter_ms < 0:
                raise ProfileError(f"[{section}]: negative latency/jitter")
            bw_raw = opts.get("bandwidth_mbps", "unlimited").strip().lower()
            if bw_raw == "unlimited":
                bandwidth = None
            else:
                bandwidth = float(bw_raw)
                if bandwidth <= 0:
                    raise ProfileError(f"[{section}]: bandwidth must be positive")
            prof.links[(src, dst)] = LinkSpec(
                latency_ns=int(round(latency_ms * NS_PER_MS)),
                jitter_ns=int(round(jitter_ms * NS_PER_MS)),
                bandwidth_mbps=bandwidth,
            )
        elif words[0] == "lp" and len(words) == 2:
            lp = int(words[1])
            factor = float(parser[section].get("cpu_slowdown", "1.0"))
            if factor < 1.0:
                raise ProfileError(f"[{section}]: cpu_slowdown must be >= 1")
            prof.slowdowns[lp] = factor
        else:
            raise ProfileError(f"unrecognized profile section [{section}]")
    return prof


def load_profile(path) -> NetProfile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_profile(fh.read())
    except OSError as exc:
        raise ProfileError(f"cannot read profile {path}: {exc}") from exc
