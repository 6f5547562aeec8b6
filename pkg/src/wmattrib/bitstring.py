"""Watermark bitstrings, bitwise accuracy, and codebook storage.

A watermark is an immutable bitstring of fixed length n. Bits are packed
MSB-first into bytes (bit k of the string is bit 7-(k%8) of byte k//8)
and the byte stream is held as little-endian 64-bit words, so comparing
two watermarks reduces to XOR plus popcount over whole words. Padding
bits beyond n are always zero.

Bitwise accuracy is kept exact: it is returned as a Fraction
matched_count/n, and callers that need a threshold compare matched
counts as integers instead of floats.

The on-disk codebook format is line-oriented UTF-8::

    wmdb v1 n=<bits> count=<records>
    <user_id>\t<hex bits, MSB-first, zero-padded to ceil(n/8) bytes>
    ...

Codebooks are append-only: entries may be added through the selection
module's registration flow, never changed or removed. All reads are safe
to share across threads; writing is single-writer by convention (the CLI
additionally takes a lock file).
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from . import _kernels
from .errors import (
    CodebookFormatError,
    DuplicateUserError,
    DuplicateWatermarkError,
    LengthMismatchError,
)

__all__ = [
    "Watermark",
    "Codebook",
    "matched_bits",
    "bitwise_accuracy",
    "alpha_min",
    "alpha_max",
    "max_pairwise_ba",
    "pairwise_match_stats",
    "save_codebook",
    "load_codebook",
]

_HEADER_RE = re.compile(r"^wmdb v1 n=(\d+) count=(\d+)$")


def words_for(n: int) -> int:
    """Number of 64-bit words holding an n-bit string."""
    return (n + 63) // 64


def bytes_for(n: int) -> int:
    return (n + 7) // 8


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (…, n) array of 0/1 values into (…, words) uint64.

    The byte layout is MSB-first per byte; words are little-endian views
    of the byte stream, so the layout is identical on any machine.
    """
    arr = np.ascontiguousarray(bits, dtype=np.uint8)
    n = arr.shape[-1]
    if n == 0:
        raise ValueError("empty bitstring")
    if arr.max(initial=0) > 1:
        raise ValueError("bits must be 0 or 1")
    packed = np.packbits(arr, axis=-1, bitorder="big")
    pad = words_for(n) * 8 - packed.shape[-1]
    if pad:
        shape = packed.shape[:-1] + (pad,)
        packed = np.concatenate([packed, np.zeros(shape, np.uint8)], axis=-1)
    flat = np.frombuffer(packed.tobytes(), dtype="<u8")
    return flat.reshape(arr.shape[:-1] + (words_for(n),)).astype(np.uint64)


def unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    """Inverse of pack_bits: (…, words) uint64 back to (…, n) uint8 bits."""
    le = np.ascontiguousarray(words, dtype=np.uint64).astype("<u8")
    raw = np.frombuffer(le.tobytes(), dtype=np.uint8)
    raw = raw.reshape(words.shape[:-1] + (words.shape[-1] * 8,))
    return np.unpackbits(raw, axis=-1, bitorder="big")[..., :n]


class Watermark:
    """An immutable bitstring of length n."""

    __slots__ = ("n", "_words")

    def __init__(self, bits: Iterable[int] | str | np.ndarray):
        if isinstance(bits, str):
            if not bits or set(bits) - {"0", "1"}:
                raise ValueError(f"not a bitstring: {bits!r}")
            arr = np.frombuffer(bits.encode("ascii"), np.uint8) - ord("0")
        else:
            arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError("bits must be a non-empty 1-D sequence")
        words = pack_bits(arr.astype(np.uint8))
        words.setflags(write=False)
        object.__setattr__(self, "n", int(arr.size))
        object.__setattr__(self, "_words", words)

    def __setattr__(self, name, value):
        raise AttributeError("Watermark is immutable")

    @classmethod
    def _from_words(cls, words: np.ndarray, n: int) -> "Watermark":
        w = object.__new__(cls)
        arr = np.ascontiguousarray(words, dtype=np.uint64)
        arr.setflags(write=False)
        object.__setattr__(w, "n", int(n))
        object.__setattr__(w, "_words", arr)
        return w

    @classmethod
    def from_hex(cls, text: str, n: int) -> "Watermark":
        """Parse the on-disk hex encoding; strict about length and padding."""
        if n < 1:
            raise ValueError("n must be >= 1")
        nbytes = bytes_for(n)
        if len(text) != nbytes * 2:
            raise ValueError(
                f"expected {nbytes * 2} hex digits for n={n}, got {len(text)}"
            )
        try:
            raw = bytes.fromhex(text)
        except ValueError as exc:
            raise ValueError(f"not hex: {text!r}") from exc
        tail = n % 8
        if tail and raw[-1] & ((1 << (8 - tail)) - 1):
            raise ValueError("padding bits beyond n must be zero")
        padded = raw + b"\x00" * (words_for(n) * 8 - nbytes)
        words = np.frombuffer(padded, dtype="<u8").astype(np.uint64)
        return cls._from_words(words, n)

    @property
    def words(self) -> np.ndarray:
        """Packed little-endian words (read-only view)."""
        return self._words

    @property
    def bits(self) -> np.ndarray:
        return unpack_bits(self._words, self.n)

    def to_hex(self) -> str:
        return self._words.astype("<u8").tobytes()[: bytes_for(self.n)].hex()

    def complement(self) -> "Watermark":
        ones = pack_bits(np.ones(self.n, np.uint8))
        return Watermark._from_words(self._words ^ ones, self.n)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Watermark):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self._words, other._words))

    def __hash__(self) -> int:
        return hash((self.n, self._words.tobytes()))

    def __repr__(self) -> str:
        return f"Watermark.from_hex({self.to_hex()!r}, n={self.n})"


def matched_bits(a: Watermark, b: Watermark) -> int:
    """Number of positions on which two watermarks agree."""
    if a.n != b.n:
        raise LengthMismatchError(f"lengths differ: {a.n} vs {b.n}")
    return _kernels.matched_count(a.words, b.words, a.n)


def bitwise_accuracy(a: Watermark, b: Watermark) -> Fraction:
    """Fraction of matching positions, exact."""
    return Fraction(matched_bits(a, b), a.n)


class Codebook:
    """Registration-ordered collection of distinct per-user watermarks.

    Rows live in one contiguous uint64 matrix (amortized doubling) so the
    kernels can scan the whole book in a single pass.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = int(n)
        self._ids: list[str] = []
        self._index: dict[str, int] = {}
        self._keys: set[bytes] = set()
        self._buf = np.zeros((8, words_for(n)), dtype=np.uint64)
        self._count = 0

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[tuple[str, Watermark]]) -> "Codebook":
        book = cls(n)
        for user_id, wm in entries:
            book.add(user_id, wm)
        return book

    def __len__(self) -> int:
        return self._count

    @property
    def words(self) -> np.ndarray:
        """(s, words) packed matrix, read-only view in registration order."""
        view = self._buf[: self._count]
        view.setflags(write=False)
        return view

    @property
    def user_ids(self) -> tuple[str, ...]:
        return tuple(self._ids)

    def user_id(self, i: int) -> str:
        return self._ids[i]

    def index_of(self, user_id: str) -> int:
        return self._index[user_id]

    def watermark(self, i: int) -> Watermark:
        if not 0 <= i < self._count:
            raise IndexError(f"user index {i} out of range")
        return Watermark._from_words(self._buf[i].copy(), self.n)

    def __iter__(self) -> Iterator[tuple[str, Watermark]]:
        for i, uid in enumerate(self._ids):
            yield uid, self.watermark(i)

    def __contains__(self, wm: Watermark) -> bool:
        if not isinstance(wm, Watermark) or wm.n != self.n:
            return False
        return wm.words.tobytes() in self._keys

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return (
            self.n == other.n
            and self._ids == other._ids
            and bool(np.array_equal(self.words, other.words))
        )

    def add(self, user_id: str, wm: Watermark) -> None:
        """Append one entry; ids and watermarks must both be new."""
        if not isinstance(user_id, str) or not user_id:
            raise ValueError("user_id must be a non-empty string")
        if "\t" in user_id or "\n" in user_id or "\r" in user_id:
            raise ValueError("user_id must not contain tabs or newlines")
        if wm.n != self.n:
            raise LengthMismatchError(f"watermark length {wm.n} != codebook n {self.n}")
        if user_id in self._index:
            raise DuplicateUserError(f"user id already registered: {user_id!r}")
        key = wm.words.tobytes()
        if key in self._keys:
            raise DuplicateWatermarkError(
                f"watermark already assigned to another user: {wm.to_hex()}"
            )
        if self._count == self._buf.shape[0]:
            grown = np.zeros((2 * self._buf.shape[0], self._buf.shape[1]), np.uint64)
            grown[: self._count] = self._buf[: self._count]
            self._buf = grown
        self._buf[self._count] = wm.words
        self._index[user_id] = self._count
        self._ids.append(user_id)
        self._keys.add(key)
        self._count += 1


def _require_pair(book: Codebook) -> None:
    if len(book) < 2:
        raise ValueError("statistic needs at least two registered users")


def alpha_min(book: Codebook, i: int) -> Fraction:
    """Smallest bitwise accuracy between user i's watermark and any other."""
    _require_pair(book)
    counts = _kernels.match_counts(book.words, book.words[i], book.n)
    counts[i] = book.n + 1
    return Fraction(int(counts.min()), book.n)


def alpha_max(book: Codebook, i: int) -> Fraction:
    """Largest bitwise accuracy between user i's watermark and any other."""
    _require_pair(book)
    counts = _kernels.match_counts(book.words, book.words[i], book.n)
    counts[i] = -1
    return Fraction(int(counts.max()), book.n)


def max_pairwise_ba(book: Codebook) -> Fraction:
    """Largest bitwise accuracy over all pairs of registered watermarks."""
    _require_pair(book)
    _, maxs = _kernels.pairwise_stats(book.words, book.n)
    return Fraction(int(maxs.max()), book.n)


def pairwise_match_stats(book: Codebook) -> tuple[np.ndarray, np.ndarray]:
    """Per-user (min, max) matched-bit counts against all other users.

    One O(s^2) pass; used by experiments that need every user's extremes.
    """
    _require_pair(book)
    return _kernels.pairwise_stats(book.words, book.n)


def save_codebook(book: Codebook, sink: BinaryIO) -> None:
    """Write the line-oriented codebook format to a binary stream."""
    sink.write(f"wmdb v1 n={book.n} count={len(book)}\n".encode("utf-8"))
    for i, uid in enumerate(book.user_ids):
        hexed = book.watermark(i).to_hex()
        sink.write(f"{uid}\t{hexed}\n".encode("utf-8"))


def load_codebook(source: BinaryIO) -> Codebook:
    """Parse a codebook stream; strict about header, counts, and padding."""
    try:
        text = source.read().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodebookFormatError(f"not UTF-8: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CodebookFormatError("empty stream, missing header")
    header = _HEADER_RE.match(lines[0])
    if header is None:
        raise CodebookFormatError(f"malformed header: {lines[0]!r}")
    n = int(header.group(1))
    count = int(header.group(2))
    if n < 1:
        raise CodebookFormatError("header n must be >= 1")
    if len(lines) - 1 != count:
        raise CodebookFormatError(
            f"header promises {count} records, stream has {len(lines) - 1}"
        )
    book = Codebook(n)
    for lineno, line in enumerate(lines[1:], start=2):
        uid, sep, hexed = line.partition("\t")
        if not sep or not uid:
            raise CodebookFormatError(f"line {lineno}: expected '<user_id>\\t<hex>'")
        try:
            wm = Watermark.from_hex(hexed, n)
        except ValueError as exc:
            raise CodebookFormatError(f"line {lineno}: {exc}") from exc
        book.add(uid, wm)
    return book
