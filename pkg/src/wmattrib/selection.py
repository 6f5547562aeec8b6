"""Watermark selection: give each new user a bitstring far from all others.

The decision problem underneath is "does some length-n bitstring match
every registered watermark in at most m positions?". Three solvers answer
it:

* ``bsta_decision`` - a bounded search tree over bit flips. Started from
  the complement of the first watermark with depth equal to m it is an
  exact decider (and exponential, so it carries a node budget); with a
  small constant depth and a random start it is the fast approximate
  variant ``absta_decision``.
* ``nrg_decision`` - iterated random flipping of positions that agree
  with the currently closest watermark, never revisiting a flipped
  position.

Both approximate solvers have one-sided error: a returned watermark
always honors the bound, but NotExist may be wrong. ``select_watermark``
sweeps m upward from a warm start until a solver succeeds, which keeps
the largest pairwise accuracy of the grown codebook near the attainable
minimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .bitstring import Codebook, Watermark, pack_bits, unpack_bits, words_for
from .errors import WorkBudgetExceededError
from .rng import substream

__all__ = [
    "STRATEGY_KINDS",
    "SelectionStrategy",
    "DecisionOutcome",
    "NOT_EXIST",
    "random_select",
    "bsta_decision",
    "absta_decision",
    "nrg_decision",
    "select_watermark",
    "register_user",
    "brute_force_farthest",
]

STRATEGY_KINDS = ("random", "bsta", "nrg", "absta")

DEFAULT_EXACT_NODE_BUDGET = 10_000_000
DEFAULT_APPROX_NODE_BUDGET = 20_000


@dataclass(frozen=True)
class SelectionStrategy:
    """How watermarks are chosen for new users.

    ``depth`` only applies to the approximate search tree. The exact
    solver errors out when its node budget is exceeded; the approximate
    one gives up on the current m instead (still one-sided).
    """

    kind: str
    depth: int = 8
    rng_seed: int = 0
    exact_node_budget: int = DEFAULT_EXACT_NODE_BUDGET
    approx_node_budget: int = DEFAULT_APPROX_NODE_BUDGET

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choices: {STRATEGY_KINDS}")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.exact_node_budget < 1 or self.approx_node_budget < 1:
            raise ValueError("node budgets must be >= 1")


@dataclass(frozen=True)
class DecisionOutcome:
    """Found(watermark) or NotExist (watermark is None)."""

    watermark: Optional[Watermark] = None

    @property
    def found(self) -> bool:
        return self.watermark is not None


NOT_EXIST = DecisionOutcome()


def random_select(n: int, rng: np.random.Generator) -> Watermark:
    """Uniformly random watermark: each bit an independent fair coin."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Watermark(rng.integers(0, 2, size=n, dtype=np.uint8))


def _check_decision_args(existing: Codebook, init: Watermark | None, m: int) -> None:
    if len(existing) == 0:
        raise ValueError("decision problem needs a non-empty codebook")
    if init is not None and init.n != existing.n:
        raise ValueError(f"init length {init.n} != codebook n {existing.n}")
    if not 0 <= m <= existing.n:
        raise ValueError(f"m must be in [0, n], got {m}")


def bsta_decision(
    existing: Codebook,
    init: Watermark,
    d: int,
    m: int,
    *,
    node_budget: int = DEFAULT_EXACT_NODE_BUDGET,
) -> DecisionOutcome:
    """Bounded search tree from ``init`` with at most ``d`` flips.

    At each node that still matches some watermark in more than m
    positions, branches over the first m+1 agreeing positions. Exact when
    init is the complement of the first registered watermark and d = m.
    Raises WorkBudgetExceededError past ``node_budget`` visited nodes.
    """
    _check_decision_args(existing, init, m)
    if d < 0:
        raise ValueError("d must be >= 0")
    status, found, _ = _kernels.bsta_search(
        existing.words, init.words, existing.n, d, m, node_budget
    )
    if status == _kernels.BUDGET_EXCEEDED:
        raise WorkBudgetExceededError(
            f"search exceeded {node_budget} nodes (n={existing.n}, m={m}, d={d})"
        )
    if status == _kernels.FOUND:
        return DecisionOutcome(Watermark._from_words(found, existing.n))
    return NOT_EXIST


def absta_decision(
    existing: Codebook,
    d: int,
    m: int,
    rng: np.random.Generator,
    *,
    node_budget: int = DEFAULT_APPROX_NODE_BUDGET,
) -> DecisionOutcome:
    """Approximate variant: one uniformly random start, constant depth d.

    A blown node budget counts as NotExist, which keeps the error
    one-sided (any returned watermark still honors the bound).
    """
    _check_decision_args(existing, None, m)
    if d < 0:
        raise ValueError("d must be >= 0")
    init = random_select(existing.n, rng)
    status, found, _ = _kernels.bsta_search(
        existing.words, init.words, existing.n, d, m, node_budget
    )
    if status == _kernels.FOUND:
        return DecisionOutcome(Watermark._from_words(found, existing.n))
    return NOT_EXIST


def nrg_decision(
    existing: Codebook,
    init: Watermark,
    m: int,
    rng: np.random.Generator,
) -> DecisionOutcome:
    """Iterated random flipping against the closest watermark.

    While the closest watermark w* agrees with the candidate on more than
    m positions, flips (matched - m) of the agreeing, never-yet-flipped
    positions chosen uniformly, until m positions of the initial
    candidate have been flipped. Gives up (NotExist) when the overlap is
    more than 2m, when the flip budget is spent, or when exclusions leave
    too few positions to flip.
    """
    _check_decision_args(existing, init, m)
    n = existing.n
    words = existing.words
    cand = init.words.copy()
    flipped = np.zeros(n, dtype=bool)
    budget = m
    positions = np.arange(n)
    word_of = positions >> 6
    masks = np.uint64(1) << (8 * ((positions >> 3) & 7) + (7 - (positions & 7))).astype(
        np.uint64
    )
    while True:
        i, matched = _kernels.best_match(words, cand, n)
        if matched > 2 * m:
            return NOT_EXIST
        if matched <= m:
            return DecisionOutcome(Watermark._from_words(cand, n))
        if budget <= 0:
            return NOT_EXIST
        agree = (unpack_bits(cand, n) == unpack_bits(words[i], n)) & ~flipped
        pool = positions[agree]
        flips = matched - m
        if pool.size < flips:
            return NOT_EXIST
        chosen = rng.choice(pool, size=flips, replace=False)
        np.bitwise_xor.at(cand, word_of[chosen], masks[chosen])
        flipped[chosen] = True
        budget -= flips


def _warm_start(existing: Codebook) -> int:
    """Largest matched-bit count of the last registered watermark."""
    if len(existing) < 2:
        return 0
    words = existing.words
    _, matched = _kernels.best_match(words[:-1], words[-1], existing.n)
    return matched


def select_watermark(
    existing: Codebook, strategy: SelectionStrategy
) -> tuple[Watermark, int]:
    """Choose a watermark for the next user.

    Returns (watermark, achieved_m) where achieved_m is the realized
    largest matched-bit count against the codebook, so the new watermark
    matches every registered one in at most achieved_m positions. The
    first user gets a uniformly random watermark (achieved_m = 0 by
    convention). Decision strategies sweep m up from a warm start (the
    previous user's largest overlap); the random strategy just draws.
    The exact strategy also steps m down until a refusal certifies the
    result, so its achieved_m is minimal for any codebook, including
    ones this process did not build.

    Deterministic given (existing, strategy): randomness comes from a
    substream keyed by the registration index.
    """
    n = existing.n
    g = substream(strategy.rng_seed, 0, len(existing))
    if len(existing) == 0:
        return random_select(n, g), 0
    words = existing.words

    def finish(wm: Watermark) -> tuple[Watermark, int]:
        _, matched = _kernels.best_match(words, wm.words, n)
        return wm, matched

    def fresh_random() -> Watermark:
        # Collision guard; only matters for tiny n or a full space.
        if n < 62 and len(existing) >= (1 << n):
            raise ValueError("codebook already uses every length-n watermark")
        for _ in range(100_000):
            wm = random_select(n, g)
            if wm not in existing:
                return wm
        raise WorkBudgetExceededError("could not draw an unused watermark")

    if strategy.kind == "random":
        return finish(fresh_random())

    m = _warm_start(existing)
    stale = 0
    # For the exact search a refusal at m-1 certifies that a hit at m is
    # optimal. The warm start can overshoot on a codebook this process
    # did not build, so an unproven hit walks m downward instead of
    # returning right away.
    best: tuple[Watermark, int] | None = None
    proven = False
    while True:
        if strategy.kind == "bsta":
            init = existing.watermark(0).complement()
            out = bsta_decision(
                existing, init, m, m, node_budget=strategy.exact_node_budget
            )
        elif strategy.kind == "nrg":
            init = existing.watermark(0).complement()
            out = nrg_decision(existing, init, m, g)
        else:
            out = absta_decision(
                existing, strategy.depth, m, g, node_budget=strategy.approx_node_budget
            )
        if out.found:
            wm = out.watermark
            if wm not in existing:
                if strategy.kind != "bsta":
                    return finish(wm)
                wm, realized = finish(wm)
                if proven or realized == 0:
                    return wm, realized
                best = (wm, realized)
                m = realized - 1
                continue
            # A duplicate means every bound is slack (only possible with
            # m = n, or a strategy that revisits its deterministic init).
            stale += 1
            if strategy.kind == "bsta" or stale >= 16 or m >= n:
                if m >= n:
                    return finish(fresh_random())
                m += 1
                stale = 0
            continue
        proven = True
        if best is not None:
            return best
        m += 1


def register_user(
    book: Codebook, user_id: str, strategy: SelectionStrategy
) -> tuple[Watermark, int]:
    """Select a watermark for ``user_id`` and append it to the codebook."""
    wm, achieved = select_watermark(book, strategy)
    book.add(user_id, wm)
    return wm, achieved


def _int_to_watermark(value: int, n: int) -> Watermark:
    bits = np.array([(value >> (n - 1 - k)) & 1 for k in range(n)], np.uint8)
    return Watermark(bits)


def brute_force_farthest(existing: Codebook, *, max_n: int = 20) -> tuple[Watermark, int]:
    """Exhaustive reference: the watermark minimizing the largest overlap.

    Enumerates all 2^n candidates, so it refuses n > max_n. Ties break to
    the lexicographically smallest bitstring. Returns (watermark, m_opt).
    """
    n = existing.n
    if len(existing) == 0:
        raise ValueError("needs a non-empty codebook")
    if n > max_n:
        raise WorkBudgetExceededError(f"2^{n} candidates exceed the enumeration cap")
    cands = np.arange(1 << n, dtype=np.uint64)
    worst = np.zeros(1 << n, dtype=np.int64)
    for i in range(len(existing)):
        bits = unpack_bits(existing.words[i], n)
        value = 0
        for b in bits:
            value = (value << 1) | int(b)
        matched = n - np.bitwise_count(cands ^ np.uint64(value)).astype(np.int64)
        np.maximum(worst, matched, out=worst)
    best = int(np.argmin(worst))
    return _int_to_watermark(best, n), int(worst[best])
