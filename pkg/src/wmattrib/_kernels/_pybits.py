"""Pure NumPy implementation of the bit kernels.

Every function here is a deterministic integer computation over packed
64-bit words, with the same contract as the compiled module, so results
are bit-identical across backends. Candidate and codebook arrays are
C-contiguous uint64 matrices whose padding bits (beyond the real length
n) are zero, which lets matched-bit counts reduce to n minus the XOR
popcount of whole words.
"""

from __future__ import annotations

import numpy as np

FOUND = 0
NOT_EXIST = 1
BUDGET_EXCEEDED = 2

def matched_count(a: np.ndarray, b: np.ndarray, n: int) -> int:
    """Number of positions on which two packed bitstrings agree."""
    return int(n - int(np.bitwise_count(a ^ b).sum()))


def match_counts(book: np.ndarray, cand: np.ndarray, n: int) -> np.ndarray:
    """Matched-bit count of ``cand`` against every row of ``book``."""
    hd = np.bitwise_count(book ^ cand[None, :]).sum(axis=1).astype(np.int64)
    return n - hd


def best_match(book: np.ndarray, cand: np.ndarray, n: int) -> tuple[int, int]:
    """Index and matched-bit count of the closest row; ties pick the lowest index."""
    hd = np.bitwise_count(book ^ cand[None, :]).sum(axis=1).astype(np.int64)
    i = int(np.argmin(hd))
    return i, int(n - hd[i])


def attribute_batch(
    book: np.ndarray, cands: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best row index, best count, and runner-up count for each candidate row.

    The runner-up is the highest count among the other rows; -1 when the
    book has a single row.
    """
    num = cands.shape[0]
    s = book.shape[0]
    w = book.shape[1]
    best_idx = np.empty(num, np.int64)
    best_cnt = np.empty(num, np.int64)
    runner_cnt = np.empty(num, np.int64)
    block = max(1, 4_000_000 // max(s * w, 1))
    for lo in range(0, num, block):
        chunk = cands[lo : lo + block]
        hd = np.bitwise_count(chunk[:, None, :] ^ book[None, :, :]).sum(axis=2)
        cnt = (n - hd).astype(np.int64)
        idx = cnt.argmax(axis=1)
        rows = np.arange(cnt.shape[0])
        best_idx[lo : lo + block] = idx
        best_cnt[lo : lo + block] = cnt[rows, idx]
        if s >= 2:
            runner_cnt[lo : lo + block] = np.partition(cnt, s - 2, axis=1)[:, s - 2]
        else:
            runner_cnt[lo : lo + block] = -1
    return best_idx, best_cnt, runner_cnt


def pairwise_stats(book: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row min and max matched-bit count against all other rows.

    Requires at least two rows. One triangular pass serves both statistics.
    """
    s = book.shape[0]
    mins = np.full(s, np.iinfo(np.int64).max, np.int64)
    maxs = np.full(s, np.iinfo(np.int64).min, np.int64)
    for i in range(s - 1):
        hd = np.bitwise_count(book[i + 1 :] ^ book[i]).sum(axis=1).astype(np.int64)
        cnt = n - hd
        lo = int(cnt.min())
        hi = int(cnt.max())
        if lo < mins[i]:
            mins[i] = lo
        if hi > maxs[i]:
            maxs[i] = hi
        np.minimum(mins[i + 1 :], cnt, out=mins[i + 1 :])
        np.maximum(maxs[i + 1 :], cnt, out=maxs[i + 1 :])
    return mins, maxs


class _SearchState:
    __slots__ = ("nodes", "budget")

    def __init__(self, budget: int) -> None:
        self.nodes = 0
        self.budget = budget


def _bsta_rec(
    book: np.ndarray,
    cand: np.ndarray,
    depth: int,
    m: int,
    n: int,
    word_of: np.ndarray,
    masks: np.ndarray,
    state: _SearchState,
) -> tuple[int, np.ndarray | None]:
    state.nodes += 1
    if state.nodes > state.budget:
        return BUDGET_EXCEEDED, None
    if depth < 0:
        return NOT_EXIST, None
    i, matched = best_match(book, cand, n)
    if matched > m + depth:
        return NOT_EXIST, None
    if matched <= m:
        return FOUND, cand.copy()
    row = book[i]
    taken = 0
    for k in range(n):
        word = word_of[k]
        mask = masks[k]
        if (cand[word] ^ row[word]) & mask:
            continue
        child = cand.copy()
        child[word] ^= mask
        status, found = _bsta_rec(
            book, child, depth - 1, m, n, word_of, masks, state
        )
        if status != NOT_EXIST:
            return status, found
        taken += 1
        if taken == m + 1:
            break
    return NOT_EXIST, None


def bsta_search(
    book: np.ndarray,
    init: np.ndarray,
    n: int,
    depth: int,
    m: int,
    node_budget: int,
) -> tuple[int, np.ndarray | None, int]:
    """Bounded search tree over bit flips of ``init``.

    Expands, at each violating node, the first m+1 positions that agree
    with the closest row. Returns (status, packed words or None, nodes
    visited).
    """
    # Bit k lives in word k >> 6; bytes are packed MSB-first and words are
    # little-endian views of the byte stream.
    ks = np.arange(n)
    word_of = ks >> 6
    masks = np.uint64(1) << (8 * ((ks >> 3) & 7) + (7 - (ks & 7))).astype(np.uint64)
    state = _SearchState(node_budget)
    status, found = _bsta_rec(book, init.copy(), depth, m, n, word_of, masks, state)
    return status, found, state.nodes
