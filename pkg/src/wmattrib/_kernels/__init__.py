"""Bit-kernel backend selection.

Two interchangeable implementations of the hot kernels exist: a compiled
Cython extension (``_fastbits``) and a pure NumPy fallback (``_pybits``).
The compiled one is used when importable; the environment variable
``WMATTRIB_BACKEND`` (``compiled`` or ``python``) forces a choice, and
``set_backend`` switches at runtime (used by tests and benchmarks).

Both backends are deterministic integer computations with identical
contracts, so every caller sees bit-identical results either way.
"""

from __future__ import annotations

import os

from . import _pybits

FOUND = _pybits.FOUND
NOT_EXIST = _pybits.NOT_EXIST
BUDGET_EXCEEDED = _pybits.BUDGET_EXCEEDED

_BACKENDS = {"python": _pybits}
try:
    from . import _fastbits

    _BACKENDS["compiled"] = _fastbits
except ImportError:  # pragma: no cover - depends on the build
    _fastbits = None


def _default_backend() -> str:
    forced = os.environ.get("WMATTRIB_BACKEND")
    if forced is not None:
        if forced not in _BACKENDS:
            raise ImportError(
                f"WMATTRIB_BACKEND={forced!r} is not available; "
                f"choices: {sorted(_BACKENDS)}"
            )
        return forced
    return "compiled" if "compiled" in _BACKENDS else "python"


_active_name = _default_backend()
_active = _BACKENDS[_active_name]


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active_name


def set_backend(name: str) -> str:
    """Switch the kernel backend; returns the previous backend name."""
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choices: {sorted(_BACKENDS)}")
    previous = _active_name
    _active_name = name
    _active = _BACKENDS[name]
    return previous


def matched_count(a, b, n):
    return _active.matched_count(a, b, n)


def match_counts(book, cand, n):
    return _active.match_counts(book, cand, n)


def best_match(book, cand, n):
    return _active.best_match(book, cand, n)


def attribute_batch(book, cands, n):
    return _active.attribute_batch(book, cands, n)


def pairwise_stats(book, n):
    return _active.pairwise_stats(book, n)


def bsta_search(book, init, n, depth, m, node_budget):
    return _active.bsta_search(book, init, n, depth, m, node_budget)
