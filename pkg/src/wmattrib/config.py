"""Declarative experiment configuration (INI file with key=value sections).

Example::

    [experiment]
    n = 64
    tau = 0.9
    s = 1000
    samples_per_user = 100
    fdr_samples = 1000
    seed = 20240601
    postprocess = identity

    [selection]
    strategy = absta
    depth = 8

    [channel]
    beta = 0.99
    gamma = 0.05
    gamma_mode = worstcase

    [profiles]
    identity = none
    jpeg-like = absolute 0.09
    blur-like = scale 0.93

``beta`` is either a constant or ``uniform(lo, hi)`` for per-user
heterogeneity. ``tau`` is parsed as an exact decimal. Unknown sections or
keys are rejected rather than ignored, so typos fail loudly.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from ._exact import exact_fraction
from .channel import GAMMA_MODES, PostprocessProfile
from .detection import DetectionThreshold
from .errors import ConfigError
from .rng import substream
from .selection import STRATEGY_KINDS, SelectionStrategy

__all__ = [
    "BetaSpec",
    "ChannelSpec",
    "ExperimentConfig",
    "load_config",
    "loads_config",
    "dump_config",
    "dumps_config",
]

_UNIFORM_RE = re.compile(r"^uniform\(\s*([^,\s]+)\s*,\s*([^,\s)]+)\s*\)$")


@dataclass(frozen=True)
class BetaSpec:
    """Constant accuracy (lo == hi) or a uniform per-user range."""

    lo: float
    hi: float

    def __post_init__(self):
        if not 0.0 < self.lo <= self.hi <= 1.0:
            raise ConfigError(f"beta range must satisfy 0 < lo <= hi <= 1, got {self}")

    @property
    def constant(self) -> bool:
        return self.lo == self.hi

    def resolve(self, seed: int, user_index: int) -> float:
        """Accuracy for one user; stable in the user index, not the count."""
        if self.constant:
            return self.lo
        return float(substream(seed, 3, user_index).uniform(self.lo, self.hi))

    def render(self) -> str:
        if self.constant:
            return repr(self.lo)
        return f"uniform({self.lo!r}, {self.hi!r})"

    @classmethod
    def parse(cls, text: str) -> "BetaSpec":
        text = text.strip()
        match = _UNIFORM_RE.match(text)
        try:
            if match:
                return cls(float(match.group(1)), float(match.group(2)))
            value = float(text)
            return cls(value, value)
        except ValueError as exc:
            raise ConfigError(f"cannot parse beta spec {text!r}") from exc


@dataclass(frozen=True)
class ChannelSpec:
    """Channel description before user identities exist."""

    beta: BetaSpec
    gamma: float
    gamma_mode: str = "worstcase"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 0.5:
            raise ConfigError(f"gamma must be in [0, 1/2], got {self.gamma}")
        if self.gamma_mode not in GAMMA_MODES:
            raise ConfigError(
                f"unknown gamma mode {self.gamma_mode!r}; choices: {GAMMA_MODES}"
            )


def _default_profiles() -> Mapping[str, PostprocessProfile]:
    return {"identity": PostprocessProfile("identity")}


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 64
    tau: Fraction = Fraction(9, 10)
    s: int = 1000
    samples_per_user: int = 100
    fdr_samples: int = 1000
    seed: int = 0
    strategy: SelectionStrategy = SelectionStrategy("absta")
    channel: ChannelSpec = ChannelSpec(BetaSpec(0.99, 0.99), 0.05)
    postprocess: Optional[str] = None
    profiles: Mapping[str, PostprocessProfile] = field(default_factory=_default_profiles)

    def __post_init__(self):
        object.__setattr__(self, "tau", exact_fraction(self.tau))
        DetectionThreshold(self.tau, self.n)  # validates tau and n together
        if self.s < 1:
            raise ConfigError("s must be >= 1")
        if self.samples_per_user < 1:
            raise ConfigError("samples_per_user must be >= 1")
        if self.fdr_samples < 0:
            raise ConfigError("fdr_samples must be >= 0")
        if self.postprocess is not None and self.postprocess not in self.profiles:
            raise ConfigError(
                f"postprocess names unknown profile {self.postprocess!r}; "
                f"known: {sorted(self.profiles)}"
            )


def _parse_profile(name: str, text: str) -> PostprocessProfile:
    parts = text.split()
    try:
        if parts == ["none"]:
            return PostprocessProfile(name)
        if len(parts) == 2 and parts[0] in ("absolute", "scale"):
            return PostprocessProfile(name, parts[0], float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"profile {name!r}: bad amount in {text!r}") from exc
    raise ConfigError(
        f"profile {name!r}: expected 'none', 'absolute <x>' or 'scale <x>', got {text!r}"
    )


def _render_profile(profile: PostprocessProfile) -> str:
    if profile.mode == "none":
        return "none"
    return f"{profile.mode} {profile.amount!r}"


_KNOWN_KEYS = {
    "experiment": {"n", "tau", "s", "samples_per_user", "fdr_samples", "seed", "postprocess"},
    "selection": {"strategy", "depth", "seed"},
    "channel": {"beta", "gamma", "gamma_mode"},
}


def loads_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # profile names are case sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config syntax: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS and section != "profiles":
            raise ConfigError(f"unknown config section [{section}]")
        if section in _KNOWN_KEYS:
            extra = set(parser[section]) - _KNOWN_KEYS[section]
            if extra:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(extra)}")

    def get(section: str, key: str, default: str | None = None) -> str | None:
        if parser.has_option(section, key):
            return parser.get(section, key)
        return default

    try:
        n = int(get("experiment", "n", "64"))
        s = int(get("experiment", "s", "1000"))
        samples = int(get("experiment", "samples_per_user", "100"))
        fdr_samples = int(get("experiment", "fdr_samples", "1000"))
        seed = int(get("experiment", "seed", "0"))
        depth = int(get("selection", "depth", "8"))
        sel_seed_raw = get("selection", "seed")
        gamma = float(get("channel", "gamma", "0.05"))
    except ValueError as exc:
        raise ConfigError(f"bad numeric value: {exc}") from exc

    tau = exact_fraction(get("experiment", "tau", "0.9"))
    postprocess = get("experiment", "postprocess")
    kind = get("selection", "strategy", "absta")
    if kind not in STRATEGY_KINDS:
        raise ConfigError(f"unknown strategy {kind!r}; choices: {STRATEGY_KINDS}")
    strategy = SelectionStrategy(
        kind, depth=depth, rng_seed=int(sel_seed_raw) if sel_seed_raw else seed
    )
    channel = ChannelSpec(
        beta=BetaSpec.parse(get("channel", "beta", "0.99")),
        gamma=gamma,
        gamma_mode=get("channel", "gamma_mode", "worstcase"),
    )
    profiles = dict(_default_profiles())
    if parser.has_section("profiles"):
        for name, value in parser.items("profiles"):
            profiles[name] = _parse_profile(name, value)
    return ExperimentConfig(
        n=n,
        tau=tau,
        s=s,
        samples_per_user=samples,
        fdr_samples=fdr_samples,
        seed=seed,
        strategy=strategy,
        channel=channel,
        postprocess=postprocess,
        profiles=profiles,
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())


def dumps_config(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["experiment"] = {
        "n": str(cfg.n),
        "tau": _render_fraction(cfg.tau),
        "s": str(cfg.s),
        "samples_per_user": str(cfg.samples_per_user),
        "fdr_samples": str(cfg.fdr_samples),
        "seed": str(cfg.seed),
    }
    if cfg.postprocess is not None:
        parser["experiment"]["postprocess"] = cfg.postprocess
    parser["selection"] = {
        "strategy": cfg.strategy.kind,
        "depth": str(cfg.strategy.depth),
        "seed": str(cfg.strategy.rng_seed),
    }
    parser["channel"] = {
        "beta": cfg.channel.beta.render(),
        "gamma": repr(cfg.channel.gamma),
        "gamma_mode": cfg.channel.gamma_mode,
    }
    parser["profiles"] = {
        name: _render_profile(profile) for name, profile in sorted(cfg.profiles.items())
    }
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def dump_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_config(cfg))


def _render_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"
