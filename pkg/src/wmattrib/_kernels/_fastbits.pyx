# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit kernels: XOR/popcount scans and the bounded search tree.

Same contracts as the NumPy fallback; all functions are deterministic
integer computations, so outputs are bit-identical across backends.
"""

import numpy as np

from libc.stdint cimport int64_t, uint64_t

FOUND = 0
NOT_EXIST = 1
BUDGET_EXCEEDED = 2

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int64_t _row_matched(const uint64_t* row, const uint64_t* cand,
                                 Py_ssize_t words, int64_t n) noexcept nogil:
    cdef Py_ssize_t w
    cdef int64_t hd = 0
    for w in range(words):
        hd += __builtin_popcountll(row[w] ^ cand[w])
    return n - hd


def matched_count(a, b, int n):
    """Number of positions on which two packed bitstrings agree."""
    cdef const uint64_t[::1] av = a
    cdef const uint64_t[::1] bv = b
    return int(_row_matched(&av[0], &bv[0], av.shape[0], n))


def match_counts(book, cand, int n):
    """Matched-bit count of ``cand`` against every row of ``book``."""
    cdef const uint64_t[:, ::1] bk = book
    cdef const uint64_t[::1] cv = cand
    cdef Py_ssize_t s = bk.shape[0], words = bk.shape[1], i
    out = np.empty(s, dtype=np.int64)
    cdef int64_t[::1] ov = out
    for i in range(s):
        ov[i] = _row_matched(&bk[i, 0], &cv[0], words, n)
    return out


def best_match(book, cand, int n):
    """Index and matched-bit count of the closest row; ties pick the lowest index."""
    cdef const uint64_t[:, ::1] bk = book
    cdef const uint64_t[::1] cv = cand
    cdef Py_ssize_t s = bk.shape[0], words = bk.shape[1], i, best_i = 0
    cdef int64_t best = -1, cnt
    for i in range(s):
        cnt = _row_matched(&bk[i, 0], &cv[0], words, n)
        if cnt > best:
            best = cnt
            best_i = i
    return int(best_i), int(best)


def attribute_batch(book, cands, int n):
    """Best row index, best count, and runner-up count for each candidate row.

    The runner-up is the highest count among the other rows; -1 when the
    book has a single row.
    """
    cdef const uint64_t[:, ::1] bk = book
    cdef const uint64_t[:, ::1] cs = cands
    cdef Py_ssize_t s = bk.shape[0], words = bk.shape[1], num = cs.shape[0], i, j
    best_idx = np.empty(num, dtype=np.int64)
    best_cnt = np.empty(num, dtype=np.int64)
    runner_cnt = np.empty(num, dtype=np.int64)
    cdef int64_t[::1] bi = best_idx
    cdef int64_t[::1] bc = best_cnt
    cdef int64_t[::1] rc = runner_cnt
    cdef int64_t best, second, cnt
    cdef Py_ssize_t arg
    with nogil:
        for j in range(num):
            best = -1
            second = -1
            arg = 0
            for i in range(s):
                cnt = _row_matched(&bk[i, 0], &cs[j, 0], words, n)
                if cnt > best:
                    second = best
                    best = cnt
                    arg = i
                elif cnt > second:
                    second = cnt
            bi[j] = arg
            bc[j] = best
            rc[j] = second
    return best_idx, best_cnt, runner_cnt


def pairwise_stats(book, int n):
    """Per-row min and max matched-bit count against all other rows.

    Requires at least two rows. One triangular pass serves both statistics.
    """
    cdef const uint64_t[:, ::1] bk = book
    cdef Py_ssize_t s = bk.shape[0], words = bk.shape[1], i, j
    mins = np.full(s, np.iinfo(np.int64).max, dtype=np.int64)
    maxs = np.full(s, np.iinfo(np.int64).min, dtype=np.int64)
    cdef int64_t[::1] mn = mins
    cdef int64_t[::1] mx = maxs
    cdef int64_t cnt
    with nogil:
        for i in range(s - 1):
            for j in range(i + 1, s):
                cnt = _row_matched(&bk[i, 0], &bk[j, 0], words, n)
                if cnt < mn[i]:
                    mn[i] = cnt
                if cnt > mx[i]:
                    mx[i] = cnt
                if cnt < mn[j]:
                    mn[j] = cnt
                if cnt > mx[j]:
                    mx[j] = cnt
    return mins, maxs


cdef int _bsta(const uint64_t* book, Py_ssize_t s, Py_ssize_t words,
               uint64_t* stack, Py_ssize_t lvl, int depth, int m, int n,
               int64_t* nodes, int64_t budget, Py_ssize_t* out_lvl) noexcept nogil:
    cdef Py_ssize_t i, best_i = 0, word
    cdef int64_t best = -1, cnt
    cdef int k, taken, shift, status
    cdef uint64_t mask
    cdef uint64_t* cand = stack + lvl * words
    cdef uint64_t* child = stack + (lvl + 1) * words

    nodes[0] += 1
    if nodes[0] > budget:
        return 2
    if depth < 0:
        return 1
    for i in range(s):
        cnt = _row_matched(book + i * words, cand, words, n)
        if cnt > best:
            best = cnt
            best_i = i
    if best > <int64_t>(m + depth):
        return 1
    if best <= <int64_t>m:
        out_lvl[0] = lvl
        return 0
    taken = 0
    for k in range(n):
        word = k >> 6
        shift = 8 * ((k >> 3) & 7) + (7 - (k & 7))
        mask = (<uint64_t>1) << shift
        if (cand[word] ^ (book + best_i * words)[word]) & mask:
            continue
        for i in range(words):
            child[i] = cand[i]
        child[word] ^= mask
        status = _bsta(book, s, words, stack, lvl + 1, depth - 1, m, n,
                       nodes, budget, out_lvl)
        if status != 1:
            return status
        taken += 1
        if taken == m + 1:
            break
    return 1


def bsta_search(book, init, int n, int depth, int m, long long node_budget):
    """Bounded search tree over bit flips of ``init``.

    Expands, at each violating node, the first m+1 positions that agree
    with the closest row. Returns (status, packed words or None, nodes
    visited).
    """
    cdef const uint64_t[:, ::1] bk = book
    cdef const uint64_t[::1] iv = init
    cdef Py_ssize_t words = bk.shape[1]
    stack = np.zeros((depth + 2, words), dtype=np.uint64)
    cdef uint64_t[:, ::1] st = stack
    cdef Py_ssize_t w
    for w in range(words):
        st[0, w] = iv[w]
    cdef int64_t nodes = 0
    cdef Py_ssize_t out_lvl = 0
    cdef int status
    status = _bsta(&bk[0, 0], bk.shape[0], words, &st[0, 0], 0, depth, m, n,
                   &nodes, node_budget, &out_lvl)
    if status == 0:
        return 0, np.array(stack[out_lvl], dtype=np.uint64), int(nodes)
    return int(status), None, int(nodes)
