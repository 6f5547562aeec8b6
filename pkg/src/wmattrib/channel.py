"""Abstract watermark channel: decoding noise for content with and
without an embedded watermark.

Watermarked content decodes each embedded bit correctly with probability
beta_i, independently per bit. Unwatermarked content decodes bits whose
1-probability stays within gamma of a fair coin; two shapes of that
assumption are simulated:

* ``worstcase`` - every bit is 1 with probability exactly 0.5 + gamma,
  the distribution the closed-form false-detection bound is tight
  against;
* ``perbituniform`` - each position gets its own 1-probability drawn
  once per experiment uniformly from [0.5 - gamma, 0.5 + gamma], a
  milder channel useful for showing the bound's slack.

Post-processing (compression, blur, ...) is modeled as a named reduction
of beta, not as image math.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

import numpy as np

from .bitstring import Watermark, bitwise_accuracy, pack_bits
from .errors import ConfigError

__all__ = [
    "GAMMA_MODES",
    "ChannelParams",
    "DecodeSample",
    "PostprocessProfile",
    "simulate_watermarked_decode",
    "simulate_watermarked_batch",
    "unwatermarked_bit_probs",
    "simulate_unwatermarked_decode",
    "simulate_unwatermarked_batch",
    "estimate_beta",
    "estimate_gamma",
    "degrade_beta",
    "resolve_profile",
]

GAMMA_MODES = ("worstcase", "perbituniform")

# Degraded accuracies are clipped to stay strictly positive.
_BETA_FLOOR = 1e-12


@dataclass(frozen=True)
class ChannelParams:
    """Resolved channel description: one accuracy per user plus the
    unwatermarked-bit bias and its shape."""

    beta: Mapping[str, float]
    gamma: float
    gamma_mode: str = "worstcase"
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta", MappingProxyType(dict(self.beta)))
        for user_id, value in self.beta.items():
            if not 0.0 < value <= 1.0:
                raise ValueError(f"beta for {user_id!r} must be in (0, 1], got {value}")
        if not 0.0 <= self.gamma <= 0.5:
            raise ValueError(f"gamma must be in [0, 1/2], got {self.gamma}")
        if self.gamma_mode not in GAMMA_MODES:
            raise ValueError(
                f"unknown gamma mode {self.gamma_mode!r}; choices: {GAMMA_MODES}"
            )


@dataclass(frozen=True)
class DecodeSample:
    """One decoded bitstring; user_id is empty for unwatermarked content."""

    decoded: Watermark
    user_id: str = ""


def _check_beta(beta_i: float) -> None:
    if not 0.0 < beta_i <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta_i}")


def simulate_watermarked_decode(
    wm: Watermark, beta_i: float, rng: np.random.Generator
) -> Watermark:
    """Decode one watermarked content item: each bit kept with prob beta_i."""
    _check_beta(beta_i)
    flips = rng.random(wm.n) >= beta_i
    return Watermark(wm.bits ^ flips.astype(np.uint8))


def simulate_watermarked_batch(
    wm: Watermark, beta_i: float, count: int, rng: np.random.Generator
) -> np.ndarray:
    """``count`` decodes at once, returned as a packed (count, words) matrix."""
    _check_beta(beta_i)
    if count < 0:
        raise ValueError("count must be >= 0")
    flips = (rng.random((count, wm.n)) >= beta_i).astype(np.uint8)
    return pack_bits(wm.bits[None, :] ^ flips)


def unwatermarked_bit_probs(
    n: int, gamma: float, gamma_mode: str, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """Per-position 1-probabilities for unwatermarked decoding.

    ``worstcase`` needs no randomness; ``perbituniform`` draws the vector
    from ``rng`` and is meant to be drawn once per experiment and reused
    for every sample.
    """
    if not 0.0 <= gamma <= 0.5:
        raise ValueError(f"gamma must be in [0, 1/2], got {gamma}")
    if gamma_mode == "worstcase":
        return np.full(n, 0.5 + gamma)
    if gamma_mode == "perbituniform":
        if rng is None:
            raise ValueError("perbituniform needs an rng for the per-bit draw")
        return rng.uniform(0.5 - gamma, 0.5 + gamma, size=n)
    raise ValueError(f"unknown gamma mode {gamma_mode!r}; choices: {GAMMA_MODES}")


def simulate_unwatermarked_decode(
    n: int,
    gamma: float,
    gamma_mode: str,
    rng: np.random.Generator,
    bit_probs: Optional[np.ndarray] = None,
) -> Watermark:
    """Decode one unwatermarked content item.

    Pass ``bit_probs`` (from ``unwatermarked_bit_probs``) to share one
    per-bit probability draw across samples; otherwise the vector is
    derived per call.
    """
    if bit_probs is None:
        bit_probs = unwatermarked_bit_probs(n, gamma, gamma_mode, rng)
    bits = (rng.random(n) < bit_probs).astype(np.uint8)
    return Watermark(bits)


def simulate_unwatermarked_batch(
    n: int,
    gamma: float,
    gamma_mode: str,
    count: int,
    rng: np.random.Generator,
    bit_probs: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, int]:
    """``count`` unwatermarked decodes, packed, plus the total 1-bit count
    (the ingredient for estimating gamma)."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if bit_probs is None:
        bit_probs = unwatermarked_bit_probs(n, gamma, gamma_mode, rng)
    bits = (rng.random((count, n)) < bit_probs[None, :]).astype(np.uint8)
    return pack_bits(bits), int(bits.sum())


def _decoded(sample: DecodeSample | Watermark) -> Watermark:
    return sample.decoded if isinstance(sample, DecodeSample) else sample


def estimate_beta(samples: Sequence[DecodeSample | Watermark], wm: Watermark) -> float:
    """Mean bitwise accuracy of decoded samples against one watermark."""
    if not samples:
        raise ValueError("need at least one sample")
    total = sum(bitwise_accuracy(_decoded(s), wm) for s in samples)
    return float(total / len(samples))


def estimate_gamma(samples: Sequence[DecodeSample | Watermark]) -> float:
    """Estimated bias of unwatermarked decoding: |mean 1-frequency - 1/2|."""
    if not samples:
        raise ValueError("need at least one sample")
    ones = 0
    bits = 0
    for s in samples:
        w = _decoded(s)
        ones += int(w.bits.sum())
        bits += w.n
    return abs(float(Fraction(ones, bits)) - 0.5)


@dataclass(frozen=True)
class PostprocessProfile:
    """A named reduction of the channel accuracy.

    ``none`` leaves beta untouched, ``absolute`` subtracts ``amount``,
    ``scale`` multiplies by ``amount``.
    """

    name: str
    mode: str = "none"
    amount: float = 0.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("profile name must be non-empty")
        if self.mode not in ("none", "absolute", "scale"):
            raise ValueError(f"unknown profile mode {self.mode!r}")
        if self.mode == "absolute" and not 0.0 <= self.amount < 1.0:
            raise ValueError("absolute reduction must be in [0, 1)")
        if self.mode == "scale" and not 0.0 < self.amount <= 1.0:
            raise ValueError("scale factor must be in (0, 1]")


IDENTITY_PROFILE = PostprocessProfile("identity")


def degrade_beta(beta_i: float, profile: PostprocessProfile) -> float:
    """Accuracy after post-processing; never larger, always positive."""
    _check_beta(beta_i)
    if profile.mode == "none":
        return beta_i
    if profile.mode == "absolute":
        reduced = beta_i - profile.amount
    else:
        reduced = beta_i * profile.amount
    return max(min(reduced, beta_i), _BETA_FLOOR)


def resolve_profile(
    name: str, profiles: Mapping[str, PostprocessProfile]
) -> PostprocessProfile:
    """Look up a profile by name, erroring on unknown names."""
    try:
        return profiles[name]
    except KeyError:
        raise ConfigError(
            f"unknown post-processing profile {name!r}; "
            f"known: {sorted(profiles) or '(none)'}"
        ) from None
