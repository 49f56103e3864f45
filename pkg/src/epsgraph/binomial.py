"""Exact sampling from the truncated binomial B_Delta(N, p).

The target is the binomial law restricted to an interval
``I = [mu_bar - delta_minus, mu_bar + delta_plus]`` wide enough that the
mass outside it is below ``eps``.  A lazy Metropolis chain on ``I`` has
this law as its stationary distribution; the chain is monotone, so
coupling-from-the-past with the two extreme starting states returns an
exact draw.

Two couplings live here:

* the *grand* coupling used by :func:`sample_truncated_binomial`, where
  every state consumes the same word at each time step;
* the single-coordinate coupling of :func:`coupled_step`, where one fair
  bit picks which copy moves.  Its forward coalescence time is what the
  ``2(L+1)**2`` bound speaks about, and :func:`forward_coupling` runs it;
  the value at forward coalescence is *not* an exact draw, which is why
  the sampler uses the backward construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .arith import as_rational, ln_upper_bound, pow2_ceil_exp
from .randomness import BitSource, BitStream, bernoulli_exact

# words below this index are drawn straight from the caller's source and kept
_CACHED_WORDS = (1 << 20) - 1
_CHUNK = 1 << 20


@dataclass(frozen=True)
class TruncatedBinomialSpec:
    N: int
    p: Fraction
    eps: Fraction
    mu: Fraction
    xi: Fraction
    mu_bar: int
    log_bound: int
    delta: int
    delta_minus: int
    delta_plus: int
    lo: int
    hi: int

    @property
    def gap_max(self) -> int:
        """L, the starting distance between the two extreme chains."""
        return self.delta_plus + self.delta_minus

    @property
    def coupling_bound(self) -> int:
        return 2 * (self.gap_max + 1) ** 2

    def _ratio_terms(self):
        a = self.p.numerator
        c = self.p.denominator - a
        return self.N, a, c, self.mu_bar, self.lo, self.hi

    @property
    def fits_int64(self) -> bool:
        n, a, c, _, lo, hi = self._ratio_terms()
        biggest = max((hi + 1) * c, (n - lo + 1) * a, n * a + 1)
        return biggest < K.INT64_SAFE

    def contains(self, k: int) -> bool:
        return self.lo <= k <= self.hi


def build_spec(N: int, p, eps) -> TruncatedBinomialSpec:
    """Interval and constants for B_Delta(N, p) with tail mass below ``eps``.

    ``ln(2/eps)`` is replaced by the integer ``ceil(log2(2/eps))`` and every
    factor under the square root is bounded by a power of two, so ``delta``
    is itself a power of two and no irrational quantity is ever formed.
    """
    p = as_rational(p)
    eps = as_rational(eps)
    if N < 1:
        raise ValueError("N must be at least 1")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    mu = N * p
    floor_mu = mu.numerator // mu.denominator
    xi = mu - floor_mu
    if xi <= 1 - p:
        mu_bar = floor_mu
    else:
        mu_bar = floor_mu + 1
    bound = ln_upper_bound(2 / eps)
    spread = max(p, Fraction(4 * bound, N))
    e = 2 + pow2_ceil_exp(N) + pow2_ceil_exp(spread) + pow2_ceil_exp(bound)
    delta = 1 << -(-e // 2)
    delta_minus = min(delta, mu_bar)
    delta_plus = min(delta, N - mu_bar)
    return TruncatedBinomialSpec(
        N=N, p=p, eps=eps, mu=mu, xi=xi, mu_bar=mu_bar, log_bound=bound,
        delta=delta, delta_minus=delta_minus, delta_plus=delta_plus,
        lo=mu_bar - delta_minus, hi=mu_bar + delta_plus,
    )


def _check_state(spec: TruncatedBinomialSpec, k: int) -> None:
    if not spec.contains(k):
        raise ValueError(f"state {k} outside [{spec.lo}, {spec.hi}]")


def alpha_plus(spec: TruncatedBinomialSpec, k: int) -> Fraction:
    _check_state(spec, k)
    if k == spec.hi:
        return Fraction(0)
    if k < spec.mu_bar:
        return Fraction(1)
    return Fraction(spec.N - k, k + 1) * spec.p / (1 - spec.p)


def alpha_minus(spec: TruncatedBinomialSpec, k: int) -> Fraction:
    _check_state(spec, k)
    if k == spec.lo:
        return Fraction(0)
    if k > spec.mu_bar:
        return Fraction(1)
    return Fraction(k, spec.N - k + 1) * (1 - spec.p) / spec.p


def chain_step(spec: TruncatedBinomialSpec, k: int, src: BitStream) -> int:
    """One lazy Metropolis step: hold 1/2, propose up 1/4, propose down 1/4."""
    _check_state(spec, k)
    branch = src.randbits(2)
    if branch < 2:
        return k
    if branch == 2:
        return k + 1 if bernoulli_exact(src, alpha_plus(spec, k)) else k
    return k - 1 if bernoulli_exact(src, alpha_minus(spec, k)) else k


class _Tail:
    """Bits of a stored uniform beyond its 62-bit prefix, revealed on demand."""

    def __init__(self, src: BitStream):
        self.src = src
        self.bits: List[int] = []

    def bit(self, i: int) -> int:
        while len(self.bits) <= i:
            self.bits.append(self.src.next_bit())
        return self.bits[i]


def _uniform_below(prefix: int, tail: _Tail, num: int, den: int) -> bool:
    """Exact ``U < num/den`` for U = 0.prefix(62 bits) tail..."""
    if num <= 0:
        return False
    if num >= den:
        return True
    rem = num
    i = 0
    while True:
        rem <<= 1
        pbit = 1 if rem >= den else 0
        if pbit:
            rem -= den
        ubit = (prefix >> (61 - i)) & 1 if i < 62 else tail.bit(i - 62)
        if ubit != pbit:
            return ubit < pbit
        if rem == 0:
            return False
        i += 1


def _up_ratio(n, a, c, mubar, hi, k):
    if k == hi:
        return 0, 1
    if k < mubar:
        return 1, 1
    return (n - k) * a, (k + 1) * c


def _down_ratio(n, a, c, mubar, lo, k):
    if k == lo:
        return 0, 1
    if k > mubar:
        return 1, 1
    return k * c, (n - k + 1) * a


@dataclass(frozen=True)
class CouplingState:
    x: int
    y: int
    steps: int
    gap_max: int


def initial_coupling(spec: TruncatedBinomialSpec) -> CouplingState:
    return CouplingState(x=spec.hi, y=spec.lo, steps=0, gap_max=spec.gap_max)


def _resolve_forward(spec, state: CouplingState, word: int, tail: _Tail) -> CouplingState:
    n, a, c, mubar, lo, hi = spec._ratio_terms()
    sel = (word >> 63) & 1
    down = (word >> 62) & 1
    prefix = word & K.MASK62
    k = state.x if sel else state.y
    if down:
        num, den = _down_ratio(n, a, c, mubar, lo, k)
    else:
        num, den = _up_ratio(n, a, c, mubar, hi, k)
    x, y = state.x, state.y
    if _uniform_below(prefix, tail, num, den):
        if sel:
            x += -1 if down else 1
        else:
            y += -1 if down else 1
    return replace(state, x=x, y=y, steps=state.steps + 1)


def coupled_step(spec: TruncatedBinomialSpec, state: CouplingState, src: BitSource) -> CouplingState:
    """One step of the single-coordinate coupling.

    The word's top bit picks the copy that moves (0: Y, 1: X), the next
    bit picks the direction (0: up, 1: down), and the remaining bits drive
    the exact acceptance test.
    """
    if state.x == state.y:
        raise ValueError("coupled_step called on a coalesced state")
    word = int(src.words(1)[0])
    return _resolve_forward(spec, state, word, _Tail(src))


class ForwardRun(NamedTuple):
    value: int
    coupling_time: int
    violations: int


def forward_coupling(spec: TruncatedBinomialSpec, src: BitSource,
                     max_steps: Optional[int] = None) -> ForwardRun:
    """Run the single-coordinate coupling from (hi, lo) until the copies meet.

    Consumes words from ``src`` exactly as repeated :func:`coupled_step`
    calls would (barring a 62-bit tie, where the extra bits come from a
    different place).  ``value`` is the meeting point, which is biased; use
    this for coupling-time measurements only.
    """
    if spec.lo == spec.hi:
        return ForwardRun(spec.lo, 0, 0)
    sweep = K.jit.forward_sweep if spec.fits_int64 else K.forward_sweep
    n, a, c, mubar, lo, hi = spec._ratio_terms()
    state = initial_coupling(spec)
    x, y, steps, violations = state.x, state.y, 0, 0
    chunk = 256
    while max_steps is None or steps < max_steps:
        size = chunk if max_steps is None else min(chunk, max_steps - steps)
        words = src.words(size).view(np.int64)
        if not spec.fits_int64:
            words = words.tolist()
        start = 0
        while start < len(words):
            status, used, x, y, v = sweep(words[start:], x, y, n, a, c, mubar, lo, hi)
            violations += v
            steps += used
            if status == K.COALESCED:
                return ForwardRun(x, steps, violations)
            if status == K.UNDECIDED:
                word = int(words[start + used]) & ((1 << 64) - 1)
                nxt = _resolve_forward(spec, CouplingState(x, y, steps, spec.gap_max), word, _Tail(src))
                x, y, steps = nxt.x, nxt.y, nxt.steps
                if not lo <= y <= x <= hi:
                    violations += 1
                if x == y:
                    return ForwardRun(x, steps, violations)
                start += used + 1
            else:
                start = len(words)
        chunk = min(chunk * 2, _CHUNK)
    raise RuntimeError(f"no coalescence within {max_steps} steps")


class BinomialDraw(NamedTuple):
    value: int
    coupling_time: int


@dataclass
class ChainStats:
    """Counters accumulated across sampler calls."""

    draws: int = 0
    coupling_time: int = 0
    updates: int = 0
    violations: int = 0

    def add(self, other: "ChainStats") -> None:
        self.draws += other.draws
        self.coupling_time += other.coupling_time
        self.updates += other.updates
        self.violations += other.violations


class _PastWords:
    """The words driving time steps -1, -2, ... for one backward run.

    Word ``i`` drives the step ending at time ``-i``.  The first
    ``_CACHED_WORDS`` come straight from the caller's source in index order
    and are kept; each later doubling level ``j`` (indices ``2**j - 1`` to
    ``2**(j+1) - 2``) is a child stream regenerated on every pass, read in
    forward-time order so it can be produced in chunks.
    """

    def __init__(self, src: BitSource):
        self.src = src
        self.cache = np.empty(0, dtype=np.int64)
        self._session: Optional[BitSource] = None
        self._tails: Dict[int, _Tail] = {}

    @property
    def session(self) -> BitSource:
        if self._session is None:
            self._session = self.src.fork()
        return self._session

    def tail(self, index: int) -> _Tail:
        if index not in self._tails:
            self._tails[index] = _Tail(self.session.split(b"tail:%d" % index))
        return self._tails[index]

    def ensure(self, count: int) -> None:
        """Cache the first ``count`` words (at most ``_CACHED_WORDS``)."""
        count = min(count, _CACHED_WORDS)
        if len(self.cache) < count:
            more = self.src.words(count - len(self.cache)).view(np.int64)
            self.cache = more if len(self.cache) == 0 else np.concatenate([self.cache, more])

    def segments(self, depth: int):
        """Yield ``(first_index, words)`` in forward-time order for a run of ``depth`` steps.

        Within a segment, position ``r`` holds index ``first_index - r``.
        """
        level = depth.bit_length() - 1
        while (1 << level) - 1 >= _CACHED_WORDS:
            top_index = (1 << (level + 1)) - 2
            stream = self.session.split(b"cftp-level:%d" % level)
            remaining = 1 << level
            while remaining:
                size = min(remaining, _CHUNK)
                yield top_index, stream.words(size).view(np.int64)
                top_index -= size
                remaining -= size
            level -= 1
        cached = min(depth, _CACHED_WORDS)
        self.ensure(cached)
        yield cached - 1, np.ascontiguousarray(self.cache[cached - 1::-1])


def _resolve_grand(spec, top: int, bot: int, word: int, tail: _Tail):
    n, a, c, mubar, lo, hi = spec._ratio_terms()
    branch = (word >> 62) & 3
    prefix = word & K.MASK62
    if branch == 2:
        top += _uniform_below(prefix, tail, *_up_ratio(n, a, c, mubar, hi, top))
        bot += _uniform_below(prefix, tail, *_up_ratio(n, a, c, mubar, hi, bot))
    elif branch == 3:
        top -= _uniform_below(prefix, tail, *_down_ratio(n, a, c, mubar, lo, top))
        bot -= _uniform_below(prefix, tail, *_down_ratio(n, a, c, mubar, lo, bot))
    return top, bot


def sample_truncated_binomial(spec: TruncatedBinomialSpec, src: BitSource,
                              stats: Optional[ChainStats] = None) -> BinomialDraw:
    """Exact draw from B_Delta(N, p) by monotone coupling from the past.

    The top and bottom chains start at ``hi`` and ``lo`` at time ``-D`` and
    run to time 0 with shared words; if they have met, their common value
    is returned together with ``D``.  Otherwise ``D`` grows to ``2D + 1``
    and the words already used for the most recent steps are reused.
    """
    if spec.lo == spec.hi:
        if stats is not None:
            stats.draws += 1
        return BinomialDraw(spec.lo, 0)
    fast = spec.fits_int64
    sweep = K.jit.grand_sweep if fast else K.grand_sweep
    n, a, c, mubar, lo, hi = spec._ratio_terms()
    past = _PastWords(src)
    depth = (1 << (spec.gap_max.bit_length() + 1)) - 1
    updates = violations = 0
    cftp = K.jit.cftp_cached if fast else K.cftp_cached
    # the whole doubling loop runs in one call while the words are cached
    past.ensure(4 * depth + 3)
    while True:
        words = past.cache if fast else past.cache.tolist()
        status, value, depth, u, v = cftp(words, depth, n, a, c, mubar, lo, hi)
        updates += u
        violations += v
        if status == K.COALESCED:
            if stats is not None:
                stats.draws += 1
                stats.coupling_time += depth
                stats.updates += updates
                stats.violations += violations
            return BinomialDraw(value, depth)
        if status == K.UNDECIDED or len(past.cache) >= _CACHED_WORDS:
            break
        past.ensure(2 * len(past.cache) + 1)
    while True:
        top, bot = hi, lo
        for first_index, words in past.segments(depth):
            seq = words if fast else words.tolist()
            start = 0
            while start < len(seq):
                stop, top, bot, v = sweep(seq[start:], top, bot, n, a, c, mubar, lo, hi)
                violations += v
                if stop < 0:
                    break
                pos = start + stop
                index = first_index - pos
                word = int(seq[pos]) & ((1 << 64) - 1)
                top, bot = _resolve_grand(spec, top, bot, word, past.tail(index))
                if not lo <= bot <= top <= hi:
                    violations += 1
                start = pos + 1
            updates += len(seq)
        if top == bot:
            if stats is not None:
                stats.draws += 1
                stats.coupling_time += depth
                stats.updates += updates
                stats.violations += violations
            return BinomialDraw(top, depth)
        depth = 2 * depth + 1
