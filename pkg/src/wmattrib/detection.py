"""Detection and user attribution from a decoded bitstring.

Content is flagged as watermarked when some registered watermark matches
the decoded string in at least ceil(tau * n) positions, and attributed
to the user whose watermark matches best. Threshold integerization is
exact (never a float comparison), and ties on the best accuracy go to
the lowest registration index but are reported so callers can score them
as attribution failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from typing import Optional

from . import _kernels
from ._exact import exact_fraction
from .bitstring import Codebook, Watermark
from .errors import LengthMismatchError

__all__ = [
    "DetectionThreshold",
    "AttributionResult",
    "Outcome",
    "detect",
    "attribute",
    "classify_outcome",
]


@dataclass(frozen=True)
class DetectionThreshold:
    """A bitwise-accuracy threshold tau in (1/2, 1] bound to a length n.

    ``k_min`` is the smallest matched-bit count that clears tau, computed
    as ceil(tau * n) in exact rational arithmetic; float inputs are read
    at their shortest decimal representation (0.7 means 7/10).
    """

    tau: Fraction
    n: int
    k_min: int = 0

    def __init__(self, tau: float | str | Fraction, n: int):
        tau = exact_fraction(tau)
        if not Fraction(1, 2) < tau <= 1:
            raise ValueError(f"tau must be in (1/2, 1], got {tau}")
        if n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "k_min", math.ceil(tau * n))


@dataclass(frozen=True)
class AttributionResult:
    """Outcome of matching one decoded string against a codebook.

    ``attributed_user`` is present only when detected. ``best_ba`` and
    ``runner_up_ba`` are always populated for diagnostics (runner-up is
    None for a single-user codebook). ``tied`` means the best accuracy is
    shared by several users; the named user is then the lowest
    registration index among them.
    """

    detected: bool
    attributed_user: Optional[str]
    tied: bool
    best_ba: Fraction
    runner_up_ba: Optional[Fraction]


class Outcome(IntEnum):
    """The five possible (ground truth, decision) combinations."""

    CORRECT_REJECTION = 1
    FALSE_DETECTION = 2
    MISSED_DETECTION = 3
    CORRECT_ATTRIBUTION = 4
    WRONG_ATTRIBUTION = 5


def _check_inputs(decoded: Watermark, book: Codebook, thr: DetectionThreshold) -> None:
    if len(book) == 0:
        raise ValueError("codebook has no registered users")
    if decoded.n != book.n:
        raise LengthMismatchError(f"decoded length {decoded.n} != codebook n {book.n}")
    if thr.n != book.n:
        raise LengthMismatchError(f"threshold bound to n={thr.n}, codebook n={book.n}")


def detect(decoded: Watermark, book: Codebook, thr: DetectionThreshold) -> bool:
    """True when some registered watermark clears the threshold."""
    _check_inputs(decoded, book, thr)
    _, best = _kernels.best_match(book.words, decoded.words, book.n)
    return best >= thr.k_min


def attribute(
    decoded: Watermark, book: Codebook, thr: DetectionThreshold
) -> AttributionResult:
    """Detection decision plus the best-matching user and tie diagnostics."""
    _check_inputs(decoded, book, thr)
    idx, best, runner = _kernels.attribute_batch(
        book.words, decoded.words.reshape(1, -1), book.n
    )
    best = int(best[0])
    runner = int(runner[0])
    detected = best >= thr.k_min
    tied = len(book) >= 2 and runner == best
    return AttributionResult(
        detected=detected,
        attributed_user=book.user_id(int(idx[0])) if detected else None,
        tied=tied,
        best_ba=Fraction(best, book.n),
        runner_up_ba=Fraction(runner, book.n) if len(book) >= 2 else None,
    )


def classify_outcome(true_user: Optional[str], result: AttributionResult) -> Outcome:
    """Score one decision against ground truth.

    ``true_user`` is None for content that carries no watermark. A tie on
    the best accuracy never counts as a correct attribution, even when
    the named user is the right one.
    """
    if true_user is None:
        return Outcome.FALSE_DETECTION if result.detected else Outcome.CORRECT_REJECTION
    if not result.detected:
        return Outcome.MISSED_DETECTION
    if result.attributed_user == true_user and not result.tied:
        return Outcome.CORRECT_ATTRIBUTION
    return Outcome.WRONG_ATTRIBUTION
