import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wmattrib.bitstring import (
    Codebook,
    Watermark,
    alpha_max,
    alpha_min,
    bitwise_accuracy,
    load_codebook,
    matched_bits,
    max_pairwise_ba,
    pack_bits,
    pairwise_match_stats,
    save_codebook,
    unpack_bits,
)
from wmattrib.errors import (
    CodebookFormatError,
    DuplicateUserError,
    DuplicateWatermarkError,
    LengthMismatchError,
)

bit_arrays = st.integers(1, 200).flatmap(
    lambda n: st.lists(st.integers(0, 1), min_size=n, max_size=n)
)


class TestWatermark:
    def test_from_bit_string(self):
        wm = Watermark("1010")
        assert wm.n == 4
        assert list(wm.bits) == [1, 0, 1, 0]

    def test_bit_layout_is_msb_first_per_byte(self):
        # First bit of the string lands in the high bit of byte 0.
        assert Watermark("10000000").words[0] == 0x80
        # Bit 8 lands in the high bit of byte 1 of a little-endian word.
        assert Watermark("000000001").words[0] == 0x8000
        assert Watermark("1" * 64).words[0] == 0xFFFFFFFFFFFFFFFF

    def test_padding_bits_are_zero(self):
        wm = Watermark("111")
        assert wm.words[0] == 0xE0

    @given(bit_arrays)
    def test_pack_unpack_round_trip(self, bits):
        arr = np.array(bits, dtype=np.uint8)
        packed = pack_bits(arr.reshape(1, -1))
        assert np.array_equal(unpack_bits(packed[0], len(bits)), arr)

    @given(bit_arrays)
    def test_hex_round_trip(self, bits):
        wm = Watermark(bits)
        assert Watermark.from_hex(wm.to_hex(), wm.n) == wm

    def test_from_hex_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            Watermark.from_hex("abcd", 8)

    def test_from_hex_rejects_nonzero_padding(self):
        # n=4 uses one byte; the low nibble is padding and must be zero.
        with pytest.raises(ValueError):
            Watermark.from_hex("ff", 4)
        with pytest.raises(ValueError):
            Watermark.from_hex("ff", 7)
        assert Watermark.from_hex("fe", 7) == Watermark("1111111")

    def test_from_hex_rejects_garbage(self):
        with pytest.raises(ValueError):
            Watermark.from_hex("zz", 8)

    def test_rejects_non_binary_values(self):
        with pytest.raises(ValueError):
            Watermark([0, 2, 1])
        with pytest.raises(ValueError):
            Watermark("10x1")
        with pytest.raises(ValueError):
            Watermark([])

    def test_complement(self):
        wm = Watermark("10110")
        assert wm.complement() == Watermark("01001")
        assert wm.complement().complement() == wm

    def test_equality_and_hash(self):
        a = Watermark("1100")
        b = Watermark([1, 1, 0, 0])
        assert a == b and hash(a) == hash(b)
        assert a != Watermark("11000")  # same prefix, different length
        assert a != Watermark("0011")

    def test_immutable(self):
        wm = Watermark("1100")
        with pytest.raises(AttributeError):
            wm.n = 5
        with pytest.raises(ValueError):
            wm.words[:] = 0  # the packed view is read-only


class TestAccuracy:
    def test_matched_bits_exact(self):
        assert matched_bits(Watermark("1100"), Watermark("1001")) == 2
        assert bitwise_accuracy(Watermark("1100"), Watermark("1001")) == Fraction(1, 2)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            matched_bits(Watermark("110"), Watermark("1100"))

    @given(bit_arrays, st.randoms(use_true_random=False))
    @settings(max_examples=60)
    def test_symmetry_and_complement(self, bits, rand):
        a = Watermark(bits)
        b = Watermark([rand.randint(0, 1) for _ in bits])
        assert bitwise_accuracy(a, b) == bitwise_accuracy(b, a)
        assert bitwise_accuracy(a, b.complement()) == 1 - bitwise_accuracy(a, b)
        assert bitwise_accuracy(a, a) == 1

    @given(st.data())
    @settings(max_examples=60)
    def test_hamming_triangle_inequality(self, data):
        n = data.draw(st.integers(1, 96))
        bits = st.lists(st.integers(0, 1), min_size=n, max_size=n)
        a, b, c = (Watermark(data.draw(bits)) for _ in range(3))
        d = lambda x, y: x.n - matched_bits(x, y)
        assert d(a, c) <= d(a, b) + d(b, c)


class TestCodebook:
    def make(self):
        book = Codebook(4)
        book.add("alice", Watermark("0000"))
        book.add("bob", Watermark("1111"))
        book.add("carol", Watermark("0011"))
        return book

    def test_lookup(self):
        book = self.make()
        assert len(book) == 3
        assert book.user_ids == ("alice", "bob", "carol")
        assert book.index_of("bob") == 1
        assert book.watermark(2) == Watermark("0011")
        assert Watermark("1111") in book
        assert Watermark("1110") not in book

    def test_duplicate_user_rejected(self):
        book = self.make()
        with pytest.raises(DuplicateUserError):
            book.add("alice", Watermark("0101"))

    def test_duplicate_watermark_rejected(self):
        book = self.make()
        with pytest.raises(DuplicateWatermarkError):
            book.add("dave", Watermark("1111"))

    def test_bad_user_ids(self):
        book = Codebook(4)
        with pytest.raises(ValueError):
            book.add("", Watermark("0000"))
        with pytest.raises(ValueError):
            book.add("a\tb", Watermark("0000"))

    def test_length_mismatch(self):
        book = self.make()
        with pytest.raises(LengthMismatchError):
            book.add("dave", Watermark("00000"))

    def test_alpha_stats(self):
        book = self.make()
        # alice: vs bob 0/4 match, vs carol 2/4.
        assert alpha_min(book, 0) == 0
        assert alpha_max(book, 0) == Fraction(1, 2)
        assert max_pairwise_ba(book) == Fraction(1, 2)
        mins, maxs = pairwise_match_stats(book)
        assert list(mins) == [0, 0, 2]
        assert list(maxs) == [2, 2, 2]

    def test_alpha_needs_two_users(self):
        book = Codebook(4)
        book.add("solo", Watermark("0101"))
        with pytest.raises(ValueError):
            alpha_min(book, 0)

    def test_growth_beyond_initial_capacity(self):
        book = Codebook(8)
        rng = np.random.default_rng(5)
        wms = set()
        while len(wms) < 200:
            wms.add(Watermark(rng.integers(0, 2, 8, dtype=np.uint8)))
        for i, wm in enumerate(sorted(wms, key=lambda w: w.to_hex())):
            book.add(f"u{i}", wm)
        assert len(book) == 200
        assert book.watermark(150) in book


class TestCodebookIO:
    def round_trip(self, book):
        buf = io.BytesIO()
        save_codebook(book, buf)
        buf.seek(0)
        return load_codebook(buf)

    def test_round_trip(self):
        book = TestCodebook().make()
        again = self.round_trip(book)
        assert again == book
        assert again.user_ids == book.user_ids

    def test_file_shape(self):
        buf = io.BytesIO()
        save_codebook(TestCodebook().make(), buf)
        lines = buf.getvalue().decode().splitlines()
        assert lines[0] == "wmdb v1 n=4 count=3"
        assert lines[1] == "alice\t00"
        assert len(lines) == 4

    @pytest.mark.parametrize(
        "payload",
        [
            b"",
            b"wmdb v2 n=4 count=0\n",
            b"wmdb v1 n=4\n",
            b"wmdb v1 n=4 count=2\nalice\t00\n",  # count mismatch
            b"wmdb v1 n=4 count=1\nalice 00\n",  # missing tab
            b"wmdb v1 n=4 count=1\nalice\tzz\n",
            b"wmdb v1 n=4 count=1\nalice\t0f\n",  # nonzero padding
            b"wmdb v1 n=0 count=0\n",
            b"\xff\xfe wmdb",
        ],
    )
    def test_malformed_inputs(self, payload):
        with pytest.raises(CodebookFormatError):
            load_codebook(io.BytesIO(payload))

    def test_duplicate_user_in_file(self):
        data = b"wmdb v1 n=4 count=2\na\t00\na\tf0\n"
        with pytest.raises(DuplicateUserError):
            load_codebook(io.BytesIO(data))

    def test_duplicate_watermark_in_file(self):
        data = b"wmdb v1 n=4 count=2\na\t00\nb\t00\n"
        with pytest.raises(DuplicateWatermarkError):
            load_codebook(io.BytesIO(data))
