"""Closed-form accuracy guarantees for detection and attribution.

For a channel that redecodes each embedded bit correctly with
probability beta (independently across bits), the matched-bit count
against the right watermark is Binomial(n, beta); for unwatermarked
content whose decoded bits are within gamma of a fair coin, the count
against any fixed watermark is stochastically dominated by
Binomial(n, 0.5 + gamma). Every bound below is a sum of binomial tails
built on those two facts.

Tails are summed term by term in log space with compensated
accumulation, which keeps absolute error near 1e-15 for n up to the
supported cap. Fractional thresholds are integerized exactly (ceil for
lower tails of the >= type, floor for <= tails) before any float math
happens; see ``_exact.exact_fraction`` for how float inputs are read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ._exact import exact_fraction

__all__ = [
    "MAX_TAIL_N",
    "BoundInputs",
    "BoundResult",
    "binom_tail_ge",
    "binom_tail_le",
    "tdr_lower_bound",
    "fdr_upper_bound_general",
    "fdr_upper_bound_independent",
    "tar_lower_bound",
    "detection_implies_attribution_gap",
]

MAX_TAIL_N = 4096


def _check_tail_args(n: int, p: float) -> None:
    if not 1 <= n <= MAX_TAIL_N:
        raise ValueError(f"n must be in [1, {MAX_TAIL_N}], got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")


def _log_pmf(n: int, k: int, log_p: float, log_q: float) -> float:
    return (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * log_p
        + (n - k) * log_q
    )


def _tail_sum(n: int, p: float, ks: range) -> float:
    log_p = math.log(p)
    log_q = math.log1p(-p)
    logs = [_log_pmf(n, k, log_p, log_q) for k in ks]
    top = max(logs)
    total = math.fsum(math.exp(v - top) for v in logs)
    return min(1.0, math.exp(top + math.log(total)))


def binom_tail_ge(n: int, p: float, k: int) -> float:
    """Pr(X >= k) for X ~ Binomial(n, p)."""
    _check_tail_args(n, p)
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    return _tail_sum(n, p, range(k, n + 1))


def binom_tail_le(n: int, p: float, k: int) -> float:
    """Pr(X <= k) for X ~ Binomial(n, p)."""
    _check_tail_args(n, p)
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    return _tail_sum(n, p, range(0, k + 1))


@dataclass(frozen=True)
class BoundInputs:
    """Parameters shared by the bound formulas.

    ``tau``, ``alpha_min_i`` and ``alpha_max_i`` take part in exact
    threshold arithmetic, so floats given here are interpreted at their
    shortest decimal representation. The alpha statistics are None for a
    single-user codebook, in which case the terms that need them are
    omitted.
    """

    n: int
    tau: Fraction
    beta_i: float
    gamma: float
    s: int
    alpha_min_i: Optional[Fraction] = None
    alpha_max_i: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "tau", exact_fraction(self.tau))
        if self.alpha_min_i is not None:
            object.__setattr__(self, "alpha_min_i", exact_fraction(self.alpha_min_i))
        if self.alpha_max_i is not None:
            object.__setattr__(self, "alpha_max_i", exact_fraction(self.alpha_max_i))
        if not 1 <= self.n <= MAX_TAIL_N:
            raise ValueError(f"n must be in [1, {MAX_TAIL_N}]")
        if not Fraction(1, 2) < self.tau <= 1:
            raise ValueError(f"tau must be in (1/2, 1], got {self.tau}")
        if not 0.0 < self.beta_i <= 1.0:
            raise ValueError(f"beta_i must be in (0, 1], got {self.beta_i}")
        if not 0.0 <= self.gamma <= 0.5:
            raise ValueError(f"gamma must be in [0, 1/2], got {self.gamma}")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        for name in ("alpha_min_i", "alpha_max_i"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    @property
    def k_detect(self) -> int:
        """Smallest integer matched count that clears the threshold."""
        return math.ceil(self.tau * self.n)


@dataclass(frozen=True)
class BoundResult:
    """A bound value clamped to [0, 1], with its raw ingredients."""

    value: float
    clamped: bool
    terms: dict[str, float]


def _clamp(raw: float, terms: dict[str, float]) -> BoundResult:
    if raw > 1.0:
        return BoundResult(1.0, True, terms)
    if raw < 0.0:
        return BoundResult(0.0, True, terms)
    return BoundResult(raw, False, terms)


def tdr_lower_bound(inp: BoundInputs) -> BoundResult:
    """Guaranteed-minimum detection rate for watermarked content of user i.

    Needs tau < beta_i: detection must sit strictly between the fair-coin
    and the channel accuracy for the argument to apply. Covers both the
    high-match case and the everything-flipped case (whose reach depends
    on how close the nearest other watermark is, alpha_min_i).
    """
    if float(inp.tau) >= inp.beta_i:
        raise ValueError(
            f"bound needs tau < beta_i, got tau={float(inp.tau)} beta_i={inp.beta_i}"
        )
    term_high = binom_tail_ge(inp.n, inp.beta_i, inp.k_detect)
    terms = {"tail_ge": term_high, "k_ge": float(inp.k_detect)}
    raw = term_high
    if inp.s >= 2 and inp.alpha_min_i is not None:
        k_low = math.floor(inp.n - inp.tau * inp.n - inp.alpha_min_i * inp.n)
        term_low = binom_tail_le(inp.n, inp.beta_i, k_low)
        terms["tail_le"] = term_low
        terms["k_le"] = float(k_low)
        raw += term_low
    return _clamp(raw, terms)


def fdr_upper_bound_general(inp: BoundInputs) -> BoundResult:
    """Worst-case false detection rate with no assumption on decoded bits.

    Treats the decoded string as matching the first user's watermark like
    a fair coin, and accounts for adversarial proximity through
    alpha_max_i (of the first registered user). With a single user the
    proximity term is undefined and omitted.
    """
    term_high = binom_tail_ge(inp.n, 0.5, inp.k_detect)
    terms = {"tail_ge": term_high, "k_ge": float(inp.k_detect)}
    raw = term_high
    if inp.s >= 2:
        if inp.alpha_max_i is None:
            raise ValueError("alpha_max_i is required when s >= 2")
        k_low = math.floor(inp.n - inp.tau * inp.n + inp.alpha_max_i * inp.n)
        term_low = binom_tail_le(inp.n, 0.5, k_low)
        terms["tail_le"] = term_low
        terms["k_le"] = float(k_low)
        raw += term_low
    return _clamp(raw, terms)


def fdr_upper_bound_independent(inp: BoundInputs) -> BoundResult:
    """False detection rate when watermarks were selected independently
    of the unwatermarked content's decoding.

    Each of the s watermarks is cleared with probability at most
    Pr(Binomial(n, 0.5 + gamma) >= k); a union over users evaluated as
    -expm1(s * log1p(-p)) stays accurate for s up to billions.
    """
    per_user = binom_tail_ge(inp.n, 0.5 + inp.gamma, inp.k_detect)
    terms = {"per_user_tail": per_user, "k_ge": float(inp.k_detect)}
    if per_user >= 1.0:
        return BoundResult(1.0, False, terms)
    value = -math.expm1(inp.s * math.log1p(-per_user))
    return _clamp(value, terms)


def tar_lower_bound(inp: BoundInputs) -> BoundResult:
    """Guaranteed-minimum rate of detecting AND naming the right user.

    The matched count must clear both the detection threshold and
    strictly more than half of n plus half the worst overlap with any
    other watermark (alpha_max_i), past which no other user can win the
    argmax. With a single user only the detection threshold applies.
    """
    k = inp.k_detect
    terms: dict[str, float] = {"k_detect": float(k)}
    if inp.s >= 2:
        if inp.alpha_max_i is None:
            raise ValueError("alpha_max_i is required when s >= 2")
        k_attr = math.floor((1 + inp.alpha_max_i) / 2 * inp.n) + 1
        terms["k_attr"] = float(k_attr)
        k = max(k, k_attr)
    value = binom_tail_ge(inp.n, inp.beta_i, k)
    terms["tail_ge"] = value
    terms["k_used"] = float(k)
    return _clamp(value, terms)


def detection_implies_attribution_gap(
    inp: BoundInputs,
) -> tuple[BoundResult, BoundResult, bool]:
    """Both lower bounds plus whether detection already implies attribution.

    When the detection threshold is at least the attribution threshold
    (tau high enough relative to alpha_max_i), any detected sample of
    user i is necessarily attributed to user i, and the two bounds share
    their leading term.
    """
    tdr = tdr_lower_bound(inp)
    tar = tar_lower_bound(inp)
    if inp.s >= 2 and inp.alpha_max_i is not None:
        k_attr = math.floor((1 + inp.alpha_max_i) / 2 * inp.n) + 1
        coincide = inp.k_detect >= k_attr
    else:
        coincide = True
    return tdr, tar, coincide
