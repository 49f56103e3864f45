"""Deterministic random bits and exact coin flips.

A :class:`BitSource` is a single bit stream, read most-significant bit
first out of consecutive 64-bit Philox outputs.  Everything random in the
package is drawn from one of these, so every output is a pure function of
the inputs and the 256-bit seed.  :class:`TapeSource` replays a fixed list
of bits and is what the decision-tree tests use.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np

SEED_BITS = 256
_MASK64 = (1 << 64) - 1
_REFILL = 512
_UNPACK8 = struct.Struct(">8Q").unpack


class TapeExhausted(Exception):
    """Raised by :class:`TapeSource` when the recorded bits run out."""


class BitStream:
    """Minimal interface shared by the real source and the test tape."""

    bits_consumed: int

    def next_bit(self) -> int:
        raise NotImplementedError

    def randbits(self, k: int) -> int:
        value = 0
        for _ in range(k):
            value = (value << 1) | self.next_bit()
        return value


class TapeSource(BitStream):
    """Bit stream backed by a recorded tape; raises when it runs dry."""

    def __init__(self, bits: Iterable[int]):
        self.tape = [int(b) & 1 for b in bits]
        self.bits_consumed = 0

    def next_bit(self) -> int:
        if self.bits_consumed >= len(self.tape):
            raise TapeExhausted(self.bits_consumed)
        bit = self.tape[self.bits_consumed]
        self.bits_consumed += 1
        return bit


def parse_seed(text: str) -> int:
    """Accept a 64-hex-digit string or a decimal integer."""
    text = text.strip()
    if len(text) == 64 and all(c in "0123456789abcdefABCDEF" for c in text):
        return int(text, 16)
    if text.isdigit():
        value = int(text)
        if value >= 1 << SEED_BITS:
            raise ValueError("seed does not fit in 256 bits")
        return value
    raise ValueError(f"seed must be 64 hex digits or a decimal integer, got {text!r}")


def format_seed(seed: int) -> str:
    return f"{seed:064x}"


def entropy_seed() -> int:
    return int.from_bytes(os.urandom(SEED_BITS // 8), "big")


_local = threading.local()
_EMPTY4 = np.zeros(4, dtype=np.uint64)


def _philox_raw(key: np.ndarray, counter: int, n: int) -> np.ndarray:
    """``n`` (a multiple of 4) Philox4x64 outputs for ``key`` starting at ``counter``.

    One generator per thread is re-keyed for every call, which is much
    cheaper than building a fresh generator per source.
    """
    gen = getattr(_local, "philox", None)
    if gen is None:
        gen = _local.philox = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
    gen.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array([(counter >> s) & _MASK64 for s in (0, 64, 128, 192)], dtype=np.uint64),
            "key": key,
        },
        "buffer": _EMPTY4,
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }
    return gen.random_raw(n)


class BitSource(BitStream):
    """Seeded Philox bit stream with an exact consumed-bit counter.

    The first 512 bits are a keyed blake2b digest of the seed, so small
    children are cheap.  After that the seed is hashed into a 128-bit
    Philox key and a 256-bit starting counter and the stream continues with
    the generator's 64-bit outputs.  Words are read most-significant bit
    first.
    """

    def __init__(self, seed: int):
        if not 0 <= seed < 1 << SEED_BITS:
            raise ValueError("seed must be a 256-bit nonnegative integer")
        self.seed = seed
        self.bits_consumed = 0
        head = hashlib.blake2b(self.seed_bytes, digest_size=64, person=b"prefix").digest()
        self._key = None
        self._counter = 0
        self._refill = 64
        self._pending: List[int] = list(_UNPACK8(head))
        self._pos = 0
        self._cur = 0
        self._avail = 0

    def __repr__(self) -> str:
        return f"BitSource(seed={format_seed(self.seed)}, bits_consumed={self.bits_consumed})"

    @property
    def seed_bytes(self) -> bytes:
        return self.seed.to_bytes(SEED_BITS // 8, "big")

    def _raw(self, n: int) -> np.ndarray:
        if self._key is None:
            material = hashlib.blake2b(self.seed_bytes, digest_size=48, person=b"philox4x64").digest()
            self._key = np.frombuffer(material[:16], dtype=">u8").astype(np.uint64)
            self._counter = int.from_bytes(material[16:], "little")
        n4 = -(-n // 4) * 4
        out = _philox_raw(self._key, self._counter, n4)
        self._counter = (self._counter + n4 // 4) % (1 << 256)
        return out

    def _next_word(self) -> int:
        if self._pos >= len(self._pending):
            self._pending = self._raw(self._refill).tolist()
            self._refill = min(self._refill * 4, _REFILL)
            self._pos = 0
        word = self._pending[self._pos]
        self._pos += 1
        return word

    def next_bit(self) -> int:
        if self._avail == 0:
            self._cur = self._next_word()
            self._avail = 64
        self._avail -= 1
        self.bits_consumed += 1
        bit = self._cur >> self._avail
        self._cur &= (1 << self._avail) - 1
        return bit

    def randbits(self, k: int) -> int:
        if k < 0:
            raise ValueError("k must be nonnegative")
        self.bits_consumed += k
        if k <= self._avail:
            self._avail -= k
            value = self._cur >> self._avail
            self._cur &= (1 << self._avail) - 1
            return value
        value, need = self._cur, k - self._avail
        while need >= 64:
            value = (value << 64) | self._next_word()
            need -= 64
        if need:
            word = self._next_word()
            value = (value << need) | (word >> (64 - need))
            self._cur = word & ((1 << (64 - need)) - 1)
            self._avail = 64 - need
        else:
            self._cur = 0
            self._avail = 0
        return value

    def words(self, n: int) -> np.ndarray:
        """Next ``64 * n`` bits as an array of ``n`` unsigned 64-bit words."""
        out = np.empty(n, dtype=np.uint64)
        if n == 0:
            return out
        take = min(n, len(self._pending) - self._pos)
        if take > 0:
            out[:take] = self._pending[self._pos:self._pos + take]
            self._pos += take
        if take < n:
            fresh = self._raw(n - take)
            out[take:] = fresh[:n - take]
            self._pending = fresh[n - take:].tolist()
            self._pos = 0
        if self._avail:
            # realign: the stream continues from the partly used word
            s = self._avail
            carry = self._cur
            shifted = np.empty_like(out)
            shifted[0] = (carry << (64 - s)) | (int(out[0]) >> s)
            if n > 1:
                shifted[1:] = (out[:-1] << np.uint64(64 - s)) | (out[1:] >> np.uint64(s))
            self._cur = int(out[-1]) & ((1 << s) - 1)
            out = shifted
        self.bits_consumed += 64 * n
        return out

    def split(self, label: bytes) -> "BitSource":
        """Child source keyed on (seed, label); does not advance this source."""
        if isinstance(label, str):
            label = label.encode()
        digest = hashlib.blake2b(label, key=self.seed_bytes, digest_size=32, person=b"split").digest()
        return BitSource(int.from_bytes(digest, "big"))

    def fork(self) -> "BitSource":
        """Child source seeded from the next 256 bits of this stream."""
        return BitSource(self.randbits(SEED_BITS))


def next_bit(src: BitStream) -> int:
    return src.next_bit()


def split(src: BitSource, label: bytes) -> BitSource:
    return src.split(label)


def bernoulli_exact(src: BitStream, p: Fraction) -> bool:
    """Return True with probability exactly ``p``.

    Compares a uniform U in [0, 1), revealed one random bit at a time,
    with the binary expansion of ``p`` obtained by doubling its remainder;
    the first disagreeing bit decides ``U < p``.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"probability {p} outside [0, 1]")
    num, den = p.numerator, p.denominator
    if num == 0:
        return False
    if num == den:
        return True
    while True:
        num <<= 1
        pbit = 1 if num >= den else 0
        if pbit:
            num -= den
        ubit = src.next_bit()
        if ubit != pbit:
            return ubit < pbit
        if num == 0:
            # p's expansion ended and U matches it so far, hence U >= p
            return False


def uniform_below(src: BitStream, n: int) -> int:
    """Exactly uniform integer in ``[0, n)`` by rejection on ``ceil(log2 n)`` bits."""
    if n < 1:
        raise ValueError("uniform_below needs n >= 1")
    k = (n - 1).bit_length()
    while True:
        r = src.randbits(k)
        if r < n:
            return r


def decision_tree(
    experiment: Callable[[BitStream], object], max_bits: int
) -> Tuple[Dict[object, Fraction], Fraction]:
    """Exact outcome law of ``experiment`` over all bit prefixes.

    Walks every tape up to ``max_bits`` bits, branching only where the
    experiment asks for another bit.  Returns the probability of each
    outcome and the mass of paths still undecided at the depth limit.
    """
    law: Dict[object, Fraction] = {}
    undecided = Fraction(0)
    stack: List[Tuple[int, ...]] = [()]
    while stack:
        prefix = stack.pop()
        tape = TapeSource(prefix)
        try:
            outcome = experiment(tape)
        except TapeExhausted:
            if len(prefix) >= max_bits:
                undecided += Fraction(1, 1 << len(prefix))
            else:
                stack.append(prefix + (0,))
                stack.append(prefix + (1,))
            continue
        weight = Fraction(1, 1 << len(prefix))
        law[outcome] = law.get(outcome, Fraction(0)) + weight
    return law, undecided


__all__ = [
    "BitSource",
    "BitStream",
    "TapeSource",
    "TapeExhausted",
    "bernoulli_exact",
    "decision_tree",
    "entropy_seed",
    "format_seed",
    "next_bit",
    "parse_seed",
    "split",
    "uniform_below",
]
