"""Exact oracles and statistics for checking the samplers.

Distributions are kept as integer weights over a common denominator, so
normalization, tails and detailed balance are exact integer identities.
Floats appear only when a statistic is finally reported.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Tuple

from .arith import as_rational
from .binomial import TruncatedBinomialSpec, alpha_minus, alpha_plus
from .generators import EdgeList
from .randomness import BitStream, bernoulli_exact, uniform_below

PMF_CAP = 10 ** 4
NAIVE_CAP = 10 ** 3


@dataclass(frozen=True)
class ExactPmf:
    """Law on ``lo..hi`` with mass ``weights[k - lo] / denominator``."""

    lo: int
    weights: Tuple[int, ...]
    denominator: int

    def __post_init__(self):
        if self.denominator <= 0 or any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative over a positive denominator")
        if sum(self.weights) != self.denominator:
            raise ValueError("weights do not sum to the denominator")

    @property
    def hi(self) -> int:
        return self.lo + len(self.weights) - 1

    @property
    def support(self) -> range:
        return range(self.lo, self.hi + 1)

    def mass(self, k: int) -> Fraction:
        if not self.lo <= k <= self.hi:
            return Fraction(0)
        return Fraction(self.weights[k - self.lo], self.denominator)

    def masses(self) -> Dict[int, Fraction]:
        return {k: self.mass(k) for k in self.support}

    def restrict(self, lo: int, hi: int) -> "ExactPmf":
        """Condition on ``lo <= k <= hi``."""
        lo, hi = max(lo, self.lo), min(hi, self.hi)
        part = self.weights[lo - self.lo:hi - self.lo + 1]
        if not part or sum(part) == 0:
            raise ValueError("conditioning on an event of probability 0")
        return ExactPmf(lo, tuple(part), sum(part))

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "ExactPmf":
        return cls(lo, (1,) * (hi - lo + 1), hi - lo + 1)

    @classmethod
    def from_masses(cls, masses: Dict[int, Fraction]) -> "ExactPmf":
        lo, hi = min(masses), max(masses)
        den = 1
        for m in masses.values():
            den = den * m.denominator // _gcd(den, m.denominator)
        weights = tuple(int(masses.get(k, 0) * den) for k in range(lo, hi + 1))
        return cls(lo, weights, den)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


@dataclass
class Histogram:
    counts: Counter = field(default_factory=Counter)
    total: int = 0

    @classmethod
    def of(cls, samples: Iterable[int]) -> "Histogram":
        h = cls()
        h.update(samples)
        return h

    def add(self, k: int, times: int = 1) -> None:
        self.counts[k] += times
        self.total += times

    def update(self, samples: Iterable[int]) -> None:
        for k in samples:
            self.add(k)

    def frequency(self, k: int) -> Fraction:
        if self.total == 0:
            raise ValueError("empty histogram")
        return Fraction(self.counts.get(k, 0), self.total)


def _binomial_weights(N: int, p: Fraction, cap: int) -> Tuple[List[int], int]:
    # w_k = C(N, k) a^k c^(N-k) with p = a/b, c = b - a, built by the ratio
    # w_(k+1) / w_k = (N - k) a / ((k + 1) c); every quotient is exact
    if N > cap:
        raise ValueError(f"N = {N} exceeds the exact pmf cap {cap}")
    if N < 0:
        raise ValueError("N must be nonnegative")
    p = as_rational(p)
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    a, b = p.numerator, p.denominator
    c = b - a
    w = c ** N
    weights = [w]
    for k in range(N):
        w = w * (N - k) * a // ((k + 1) * c)
        weights.append(w)
    return weights, b ** N


def binomial_pmf_exact(N: int, p, cap: int = PMF_CAP) -> ExactPmf:
    weights, den = _binomial_weights(N, as_rational(p), cap)
    return ExactPmf(0, tuple(weights), den)


def truncated_pmf(spec: TruncatedBinomialSpec, cap: int = PMF_CAP) -> ExactPmf:
    return binomial_pmf_exact(spec.N, spec.p, cap).restrict(spec.lo, spec.hi)


def tail_mass(N: int, p, lo: int, hi: int, cap: int = PMF_CAP) -> Fraction:
    """Exact binomial mass outside ``[lo, hi]``."""
    weights, den = _binomial_weights(N, as_rational(p), cap)
    inside = sum(weights[max(lo, 0):max(hi + 1, 0)])
    return Fraction(den - inside, den)


def spec_tail_mass(spec: TruncatedBinomialSpec, cap: int = PMF_CAP) -> Fraction:
    return tail_mass(spec.N, spec.p, spec.lo, spec.hi, cap)


def check_detailed_balance(
    spec: TruncatedBinomialSpec,
    up: Optional[Callable[[TruncatedBinomialSpec, int], Fraction]] = None,
    down: Optional[Callable[[TruncatedBinomialSpec, int], Fraction]] = None,
    cap: int = PMF_CAP,
) -> bool:
    """True iff B(k-1) a+(k-1) == B(k) a-(k) for every adjacent pair of ``I``.

    ``up``/``down`` replace the chain's acceptance ratios, which is how the
    check is shown to be sensitive.  Ratios outside ``[0, 1]`` fail too.
    """
    up = up or alpha_plus
    down = down or alpha_minus
    weights, _ = _binomial_weights(spec.N, spec.p, cap)
    for k in range(spec.lo + 1, spec.hi + 1):
        a_up, a_down = up(spec, k - 1), down(spec, k)
        if not (0 <= a_up <= 1 and 0 <= a_down <= 1):
            return False
        if weights[k - 1] * a_up != weights[k] * a_down:
            return False
    return True


def tv_distance(h: Histogram, pmf: ExactPmf) -> Fraction:
    """Exact total variation between the empirical law of ``h`` and ``pmf``."""
    if h.total == 0:
        raise ValueError("empty histogram")
    outcomes = set(h.counts) | set(pmf.support)
    total = Fraction(0)
    for k in outcomes:
        total += abs(Fraction(h.counts.get(k, 0), h.total) - pmf.mass(k))
    return total / 2


def tv_between(p: Dict[int, Fraction], q: Dict[int, Fraction]) -> Fraction:
    return sum((abs(p.get(k, 0) - q.get(k, 0)) for k in set(p) | set(q)), Fraction(0)) / 2


class ChiSquare(NamedTuple):
    statistic: float
    dof: int


def chi_square(h: Histogram, pmf: ExactPmf, min_expected: int = 5) -> ChiSquare:
    """Pearson statistic against exact expected counts.

    Consecutive outcomes are pooled until each bin expects at least
    ``min_expected`` draws; a leftover low bin joins the last full one.
    A draw where ``pmf`` has no mass makes the statistic infinite.
    """
    if h.total == 0:
        raise ValueError("empty histogram")
    if any(c and pmf.mass(k) == 0 for k, c in h.counts.items()):
        return ChiSquare(float("inf"), max(len(pmf.weights) - 1, 0))
    bins: List[Tuple[Fraction, int]] = []
    exp_acc, obs_acc = Fraction(0), 0
    for k in pmf.support:
        exp_acc += pmf.mass(k) * h.total
        obs_acc += h.counts.get(k, 0)
        if exp_acc >= min_expected:
            bins.append((exp_acc, obs_acc))
            exp_acc, obs_acc = Fraction(0), 0
    if exp_acc or obs_acc:
        if bins:
            e, o = bins.pop()
            bins.append((e + exp_acc, o + obs_acc))
        else:
            bins.append((exp_acc, obs_acc))
    stat = sum((o - e) ** 2 / e for e, o in bins if e)
    return ChiSquare(float(stat), len(bins) - 1)


def chi_square_critical(dof: int, level: float = 0.999) -> float:
    from scipy.stats import chi2

    return float(chi2.ppf(level, dof))


def naive_exact_gnp(n: int, p, src: BitStream, cap: int = NAIVE_CAP) -> EdgeList:
    """One exact coin per pair; slow, but its law is exactly G(n, p)."""
    if n > cap:
        raise ValueError(f"n = {n} exceeds the naive generator cap {cap}")
    p = as_rational(p)
    if not 0 <= p <= 1:
        raise ValueError(f"probability {p} outside [0, 1]")
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if bernoulli_exact(src, p)]
    return EdgeList(n, edges, meta={"model": "naive-gnp", "n": n, "p": p})


# geometric skipping with a finite-precision uniform

def _first_below(q: Fraction, bound: Fraction) -> int:
    """Smallest s >= 1 with q**s < bound, for 0 < q < 1 and 0 < bound <= 1."""
    qn, qd = q.numerator, q.denominator
    bn, bd = bound.numerator, bound.denominator

    def below(s: int) -> bool:
        return qn ** s * bd < bn * qd ** s

    hi = 1
    while not below(hi):
        hi *= 2
    lo = hi // 2 + 1 if hi > 1 else 1
    while lo < hi:
        mid = (lo + hi) // 2
        if below(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def baseline_skip(p: Fraction, b: int, j: int) -> int:
    """Skip produced by the quantized uniform ``r = j / 2**b``.

    The smallest ``s >= 1`` with ``r < 1 - (1 - p)**s``, decided exactly, so
    rounding ``r`` to ``b`` bits is the only approximation.
    """
    return _first_below(1 - p, Fraction((1 << b) - j, 1 << b))


def _check_skip_args(p: Fraction, b: int) -> Fraction:
    p = as_rational(p)
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if b < 1:
        raise ValueError("precision must be at least one bit")
    return p


def skip_baseline_draw(p, b: int, src: BitStream) -> int:
    p = _check_skip_args(p, b)
    return baseline_skip(p, b, src.randbits(b))


def max_skip_bound(p, b: int) -> Tuple[int, Fraction]:
    """Largest skip any ``b``-bit uniform can produce, and the exact mass beyond it."""
    p = _check_skip_args(p, b)
    kmax = _first_below(1 - p, Fraction(1, 1 << b))
    return kmax, (1 - p) ** kmax


def baseline_skip_law(p, b: int) -> Dict[int, Fraction]:
    """Exact law of the quantized skip.

    ``s`` is produced by the ``j`` with ``1 - q**(s-1) <= j / 2**b < 1 - q**s``,
    so its count is a difference of two integer ceilings.
    """
    p = _check_skip_args(p, b)
    q = 1 - p
    scale = 1 << b
    kmax, _ = max_skip_bound(p, b)
    law = {}
    prev = 0
    for s in range(1, kmax + 1):
        edge = scale * (1 - q ** s)
        upto = -(-edge.numerator // edge.denominator)
        if upto > prev:
            law[s] = Fraction(upto - prev, scale)
        prev = upto
    return law


def geometric_law(p, kmax: int) -> Dict[int, Fraction]:
    """P(skip = s) = (1-p)**(s-1) p for ``s <= kmax``; the rest is left out."""
    p = as_rational(p)
    return {s: (1 - p) ** (s - 1) * p for s in range(1, kmax + 1)}


def skip_law_tv(p, b: int) -> Fraction:
    """Exact TV between the quantized skip law and the geometric law."""
    kmax, missing = max_skip_bound(p, b)
    return tv_between(baseline_skip_law(p, b), geometric_law(p, kmax)) + missing / 2


def skip_baseline_gnp(n: int, p, b: int, src: BitStream) -> EdgeList:
    """Geometric-skip G(n, p) with each uniform rounded to ``b`` bits.

    Pairs ``(w, v)``, ``w < v``, are scanned row by row; each draw jumps
    ahead by a skip from :func:`baseline_skip`.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    p = as_rational(p)
    if b < 1:
        raise ValueError("precision must be at least one bit")
    edges = []
    if p == 0:
        return EdgeList(n, edges, meta={"model": "skip-baseline", "n": n, "p": p, "bits": b})
    v, w = 1, -1
    while v < n:
        if p == 1:
            w += 1
        else:
            w += baseline_skip(p, b, src.randbits(b))
        while w >= v and v < n:
            w -= v
            v += 1
        if v < n:
            edges.append((w, v))
    edges.sort()
    return EdgeList(n, edges, meta={"model": "skip-baseline", "n": n, "p": p, "bits": b})


def uniform_draws(k: int, count: int, src: BitStream) -> Histogram:
    """``count`` exact uniform draws from ``range(k)``; a control for :func:`chi_square`."""
    return Histogram.of(uniform_below(src, k) for _ in range(count))


def length_dominance_holds(rows, diagonal: bool = False) -> bool:
    """d * sum <w_u, w_v> >= sum |w_u| |w_v| over pairs u < v, decided exactly.

    With ``diagonal`` the sums run over all ordered pairs, u == v included;
    that form holds for every matrix, while the u < v form can fail when
    rows are nearly orthogonal.  The right side is a sum of square roots,
    bracketed between rationals by integer square roots at growing
    precision until the comparison is decided.
    """
    import math

    rows = [[as_rational(x) for x in r] for r in rows]
    d = len(rows[0]) if rows else 0
    n = len(rows)
    lhs = Fraction(0)
    products = []
    for u in range(n):
        for v in range(0 if diagonal else u + 1, n):
            lhs += sum((x * y for x, y in zip(rows[u], rows[v])), Fraction(0))
            su = sum((x * x for x in rows[u]), Fraction(0))
            sv = sum((x * x for x in rows[v]), Fraction(0))
            products.append(su * sv)
    lhs *= d
    bits = 32
    while True:
        scale = 1 << bits
        low = high = Fraction(0)
        for t in products:
            # floor and ceil of sqrt(t) * scale
            num = t.numerator * scale * scale
            r = math.isqrt(num // t.denominator)
            low += Fraction(r, scale)
            high += Fraction(r + 1, scale)
        if lhs >= high:
            return True
        if lhs < low:
            return False
        if bits > 4096:
            # equality up to 2**-4096 per term; settle it with the exact squares
            return _dominance_exact(lhs, products)
        bits *= 2


def _dominance_exact(lhs: Fraction, products: List[Fraction]) -> bool:
    # only reached when lhs sits within rounding of the sum; that happens
    # exactly when the sum is rational, so test each term for a perfect square
    import math

    total = Fraction(0)
    for t in products:
        rn, rd = math.isqrt(t.numerator), math.isqrt(t.denominator)
        if rn * rn != t.numerator or rd * rd != t.denominator:
            raise ArithmeticError("cannot decide comparison with an irrational sum")
        total += Fraction(rn, rd)
    return lhs >= total


__all__ = [
    "ChiSquare",
    "ExactPmf",
    "Histogram",
    "baseline_skip",
    "baseline_skip_law",
    "binomial_pmf_exact",
    "check_detailed_balance",
    "chi_square",
    "chi_square_critical",
    "geometric_law",
    "length_dominance_holds",
    "max_skip_bound",
    "naive_exact_gnp",
    "skip_baseline_draw",
    "skip_baseline_gnp",
    "skip_law_tv",
    "spec_tail_mass",
    "tail_mass",
    "truncated_pmf",
    "tv_between",
    "tv_distance",
    "uniform_draws",
]
