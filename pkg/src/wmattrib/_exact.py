"""Exact-arithmetic helpers for threshold integerization.

Detection thresholds must never be integerized through floating point:
0.7 * 10 is 7.000000000000001 as a float and ceils the wrong way. A float
input is therefore read back at its shortest decimal representation (the
number the caller actually wrote) and turned into a Fraction before any
ceil or floor is taken.
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction

__all__ = ["exact_fraction"]


def exact_fraction(x: float | int | str | Fraction) -> Fraction:
    """Convert ``x`` to an exact Fraction.

    Floats are interpreted at their shortest round-tripping decimal, so
    ``exact_fraction(0.7) == Fraction(7, 10)``. Strings may be decimal
    ("0.7") or rational ("7/10").
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a number here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"not a finite number: {x!r}")
        return Fraction(Decimal(repr(x)))
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a number: {x!r}") from exc
    raise TypeError(f"cannot convert {type(x).__name__} to an exact fraction")
