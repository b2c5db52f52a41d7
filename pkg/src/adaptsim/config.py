"""Run configuration: INI-style file with [model], [heuristics], [run],
[net] and (for tcp mode) [peers] sections. docs/config.md documents every
key; presets shipped with the package can be referenced by bare name.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .heuristics import HeuristicConfig
from .manet import ModelConfig
from .netprofile import NetProfile, ProfileError, load_profile

MODE_SIM = "sim"
MODE_TCP = "tcp"


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    heuristics: HeuristicConfig = field(default_factory=HeuristicConfig)
    mode: str = MODE_SIM
    num_lps: int = 3
    seed: int = 42
    trace_dir: str | None = None
    barrier_timeout_s: float = 60.0
    threads: bool = False
    profile_path: str | None = None
    profile: NetProfile | None = None
    peers: list[str] = field(default_factory=list)
    this_lp: int | None = None
    connect_retries: int = 30
    connect_delay_s: float = 1.0

    def validate(self) -> "RunConfig":
        self.model.validate()
        self.heuristics.validate()
        if self.mode not in (MODE_SIM, MODE_TCP):
            raise ConfigError(f"run.mode must be sim or tcp, not {self.mode!r}")
        if self.num_lps < 1:
            raise ConfigError("run.num_lps must be >= 1")
        if self.mode == MODE_TCP:
            if len(self.peers) != self.num_lps:
                raise ConfigError(
                    f"tcp mode needs one [peers] entry per LP "
                    f"({len(self.peers)} given for {self.num_lps} LPs)")
        if self.profile is None:
            self.profile = NetProfile.zero(self.num_lps)
        try:
            self.profile.validate(self.num_lps)
        except ProfileError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def echo(self) -> dict:
        """Flat key=value view for trace/summary embedding."""
        out = {
            "mode": self.heuristics.mode,
            "engine": self.mode,
            "num_lps": self.num_lps,
            "seed": self.seed,
            "num_mh": self.model.num_mh,
            "steps": self.model.steps,
            "radius": self.model.radius,
            "fraction": self.model.fraction,
        }
        return out


_MODEL_KEYS = {
    "num_mh": int, "arena_w": float, "arena_h": float, "radius": float,
    "fraction": float, "steps": int, "speed_min": float, "speed_max": float,
    "waypoint_eps": float, "seed": int,
}
_HEUR_KEYS = {
    "mode": str, "window": int, "interval": int, "theta": float,
    "migration_factor": int, "delta": float, "cooldown": int,
    "epsilon": float, "quota": float, "alpha": float,
}


def _parse_bool(raw: str, where: str) -> bool:
    val = raw.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: not a boolean: {raw!r}")


def preset_path(name: str) -> Path | None:
    """Resolve a bare preset name to a packaged file, if it exists."""
    base = resources.files("adaptsim").joinpath("presets")
    for suffix in ("", ".ini", ".profile"):
        candidate = base.joinpath(name + suffix)
        if candidate.is_file():
            return Path(str(candidate))
    return None


def _resolve_profile(raw: str, base_dir: Path) -> Path:
    p = Path(raw)
    if p.is_file():
        return p
    rel = base_dir / raw
    if rel.is_file():
        return rel
    preset = preset_path(raw)
    if preset is not None:
        return preset
    raise ConfigError(f"network profile not found: {raw}")


def load_config(path_or_preset: str, overrides=()) -> RunConfig:
    """Parse, override and validate a run configuration.

    overrides: iterable of "section.key=value" strings.
    """
    path = Path(path_or_preset)
    if not path.is_file():
        preset = preset_path(path_or_preset)
        if preset is None:
            raise ConfigError(f"config file not found: {path_or_preset}")
        path = preset

    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), key.strip(), value.strip())

    cfg = RunConfig()
    seen_model_seed = None

    for section in parser.sections():
        if section == "model":
            for key, raw in parser.items(section):
                typ = _MODEL_KEYS.get(key)
                if typ is None:
                    raise ConfigError(f"[model]: unknown key {key!r}")
                if key == "seed":
                    seen_model_seed = _convert(int, raw, f"model.{key}")
                else:
                    setattr(cfg.model, key, _convert(typ, raw, f"model.{key}"))
        elif section == "heuristics":
            for key, raw in parser.items(section):
                typ = _HEUR_KEYS.get(key)
                if typ is None:
                    raise ConfigError(f"[heuristics]: unknown key {key!r}")
                setattr(cfg.heuristics, key, _convert(typ, raw, f"heuristics.{key}"))
        elif section == "run":
            for key, raw in parser.items(section):
                if key == "mode":
                    cfg.mode = raw.strip()
                elif key == "num_lps":
                    cfg.num_lps = _convert(int, raw, "run.num_lps")
                elif key == "global_seed":
                    cfg.seed = _convert(int, raw, "run.global_seed")
                elif key == "trace_dir":
                    cfg.trace_dir = raw.strip()
                elif key == "barrier_timeout_s":
                    cfg.barrier_timeout_s = _convert(float, raw, "run.barrier_timeout_s")
                elif key == "threads":
                    cfg.threads = _parse_bool(raw, "run.threads")
                else:
                    raise ConfigError(f"[run]: unknown key {key!r}")
        elif section == "net":
            for key, raw in parser.items(section):
                if key == "profile":
                    cfg.profile_path = raw.strip()
                elif key == "this_lp":
                    cfg.this_lp = _convert(int, raw, "net.this_lp")
                elif key == "connect_retries":
                    cfg.connect_retries = _convert(int, raw, "net.connect_retries")
                elif key == "connect_delay_s":
                    cfg.connect_delay_s = _convert(float, raw, "net.connect_delay_s")
                else:
                    raise ConfigError(f"[net]: unknown key {key!r}")
        elif section == "peers":
            entries = sorted(parser.items(section), key=lambda kv: int(kv[0]))
            expected = list(range(len(entries)))
            if [int(k) for k, _ in entries] != expected:
                raise ConfigError("[peers]: keys must be dense LP ids 0..n-1")
            cfg.peers = [v.strip() for _, v in entries]
        else:
            raise ConfigError(f"unknown config section [{section}]")

    if seen_model_seed is not None and not parser.has_option("run", "global_seed"):
        cfg.seed = seen_model_seed

    if cfg.profile_path:
        profile_file = _resolve_profile(cfg.profile_path, path.parent)
        try:
            cfg.profile = load_profile(profile_file)
        except ProfileError as exc:
            raise ConfigError(str(exc)) from exc

    try:
        cfg.validate()
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _convert(typ, raw, where):
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
