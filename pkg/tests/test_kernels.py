"""The compiled and pure-Python kernels must be interchangeable: same
results, same tie-breaks, and for the tree search the same node counts,
on every input. Reference behavior is pinned by slow per-bit oracles."""

import numpy as np
import pytest

from wmattrib import _kernels
from wmattrib._kernels import BUDGET_EXCEEDED, FOUND, NOT_EXIST
from wmattrib.bitstring import Watermark, pack_bits, unpack_bits


def random_packed(rng, rows, n):
    bits = rng.integers(0, 2, (rows, n), dtype=np.uint8)
    return pack_bits(bits), bits


def oracle_matched(bits_a, bits_b):
    return int((bits_a == bits_b).sum())


class TestMatching:
    def test_matched_count_oracle(self, backend, rng):
        for _ in range(50):
            n = int(rng.integers(1, 200))
            packed, bits = random_packed(rng, 2, n)
            got = _kernels.matched_count(packed[0], packed[1], n)
            assert got == oracle_matched(bits[0], bits[1])

    def test_match_counts_oracle(self, backend, rng):
        for _ in range(20):
            n = int(rng.integers(1, 130))
            rows = int(rng.integers(1, 20))
            book, book_bits = random_packed(rng, rows, n)
            cand, cand_bits = random_packed(rng, 1, n)
            got = _kernels.match_counts(book, cand[0], n)
            want = [oracle_matched(b, cand_bits[0]) for b in book_bits]
            assert list(got) == want

    def test_best_match_tie_picks_lowest_index(self, backend):
        book = pack_bits(
            np.array([[0, 0, 1, 1], [1, 1, 0, 0], [0, 0, 1, 1]], np.uint8)
        )
        cand = pack_bits(np.array([[0, 0, 1, 1]], np.uint8))[0]
        idx, cnt = _kernels.best_match(book, cand, 4)
        assert (idx, cnt) == (0, 4)
        # rows 0 and 2 tie at distance 0; flipping cand keeps the tie at 4-0
        idx, _ = _kernels.best_match(book, pack_bits(np.array([[1, 1, 0, 0]], np.uint8))[0], 4)
        assert idx == 1

    def test_attribute_batch_oracle(self, backend, rng):
        for _ in range(15):
            n = int(rng.integers(2, 100))
            rows = int(rng.integers(1, 12))
            cands_count = int(rng.integers(1, 30))
            book, book_bits = random_packed(rng, rows, n)
            cands, cand_bits = random_packed(rng, cands_count, n)
            idx, best, runner = _kernels.attribute_batch(book, cands, n)
            for c in range(cands_count):
                counts = [oracle_matched(b, cand_bits[c]) for b in book_bits]
                want_idx = int(np.argmax(counts))
                assert idx[c] == want_idx
                assert best[c] == counts[want_idx]
                if rows == 1:
                    assert runner[c] == -1
                else:
                    counts[want_idx] = -1
                    assert runner[c] == max(counts)

    def test_pairwise_stats_oracle(self, backend, rng):
        for _ in range(10):
            n = int(rng.integers(2, 90))
            rows = int(rng.integers(2, 14))
            book, bits = random_packed(rng, rows, n)
            mins, maxs = _kernels.pairwise_stats(book, n)
            for i in range(rows):
                counts = [
                    oracle_matched(bits[i], bits[j]) for j in range(rows) if j != i
                ]
                assert mins[i] == min(counts)
                assert maxs[i] == max(counts)


class TestSearchKernel:
    def run(self, rng, n, rows, m, depth=None, budget=10**6):
        book, _ = random_packed(rng, rows, n)
        init, _ = random_packed(rng, 1, n)
        d = m if depth is None else depth
        return book, _kernels.bsta_search(book, init[0], n, d, m, budget)

    def test_found_result_is_sound(self, backend, rng):
        hits = 0
        for _ in range(120):
            n = int(rng.integers(4, 24))
            m = int(rng.integers(0, n // 2 + 1))
            book, (status, words, nodes) = self.run(rng, n, int(rng.integers(1, 6)), m)
            assert nodes >= 1
            if status == FOUND:
                hits += 1
                realized = int(_kernels.match_counts(book, words, n).max())
                assert realized <= m
                # the result is a valid packed bitstring (padding clean)
                bits = unpack_bits(words, n)
                assert np.array_equal(pack_bits(bits.reshape(1, -1))[0], words)
            else:
                assert status == NOT_EXIST
                assert words is None
        assert hits > 10  # the sweep must exercise the Found branch

    def test_budget_exhaustion_reported(self, backend, rng):
        saw = 0
        for _ in range(40):
            n, m = 16, 4
            _, (status, words, nodes) = self.run(rng, n, 5, m, budget=2)
            if status == BUDGET_EXCEEDED:
                saw += 1
                assert words is None
                assert nodes >= 2
        assert saw > 0

    def test_zero_budget_immediately_exceeded(self, backend, rng):
        _, (status, words, nodes) = self.run(rng, 8, 3, 2, budget=0)
        assert status == BUDGET_EXCEEDED and words is None


@pytest.mark.skipif(
    len(_kernels.available_backends()) < 2, reason="only one backend built"
)
class TestBackendParity:
    def both(self, fn):
        results = []
        previous = _kernels.active_backend()
        try:
            for name in _kernels.available_backends():
                _kernels.set_backend(name)
                results.append(fn())
        finally:
            _kernels.set_backend(previous)
        return results

    def test_matching_kernels_identical(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 150))
            rows = int(rng.integers(1, 16))
            book, _ = random_packed(rng, rows, n)
            cands, _ = random_packed(rng, int(rng.integers(1, 10)), n)

            a, b = self.both(lambda: _kernels.match_counts(book, cands[0], n))
            assert np.array_equal(a, b)
            a, b = self.both(lambda: _kernels.best_match(book, cands[0], n))
            assert a == b
            a, b = self.both(lambda: _kernels.attribute_batch(book, cands, n))
            assert all(np.array_equal(x, y) for x, y in zip(a, b))
            if rows >= 2:
                a, b = self.both(lambda: _kernels.pairwise_stats(book, n))
                assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_search_identical_including_node_counts(self, rng):
        for _ in range(60):
            n = int(rng.integers(4, 26))
            rows = int(rng.integers(1, 7))
            m = int(rng.integers(0, n // 2 + 1))
            depth = int(rng.integers(0, m + 1)) if m else 0
            budget = int(rng.choice([3, 50, 10**6]))
            book, _ = random_packed(rng, rows, n)
            init, _ = random_packed(rng, 1, n)
            a, b = self.both(
                lambda: _kernels.bsta_search(book, init[0], n, depth, m, budget)
            )
            assert a[0] == b[0], "status differs"
            assert a[2] == b[2], "node count differs"
            if a[1] is None:
                assert b[1] is None
            else:
                assert np.array_equal(a[1], b[1])
