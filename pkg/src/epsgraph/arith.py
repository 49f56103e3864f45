"""Exact integer and rational helpers.

Python's ``int`` is the arbitrary-precision integer and
:class:`fractions.Fraction` the reduced rational; this module adds the
power-of-two bounds and combinatorial coefficients the samplers need,
without ever touching floating point.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Union

RationalLike = Union[int, Fraction, str]

__all__ = [
    "Fraction",
    "as_rational",
    "parse_rational",
    "format_rational",
    "pow2_ceil_exp",
    "isqrt_ceil",
    "ln_upper_bound",
    "binomial_coeff",
    "multinomial",
]


def parse_rational(text: str) -> Fraction:
    """Parse ``"a/b"``, ``"0.25"`` or ``"1e-2"`` into an exact rational.

    Decimal digits are taken literally: ``"0.333"`` is 333/1000, not 1/3.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty rational")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed rational {text!r}") from exc


def as_rational(x: RationalLike) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rational(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def format_rational(x: Fraction) -> str:
    return str(x)


def _ge_pow2(x: Fraction, e: int) -> bool:
    """True iff 2**e >= x."""
    a, b = x.numerator, x.denominator
    if e >= 0:
        return b << e >= a
    return b >= a << -e


def pow2_ceil_exp(x: RationalLike) -> int:
    """Smallest integer ``e`` with ``2**e >= x``."""
    x = as_rational(x)
    if x <= 0:
        raise ValueError("pow2_ceil_exp needs x > 0")
    e = x.numerator.bit_length() - x.denominator.bit_length()
    # the estimate is within one of the answer
    while not _ge_pow2(x, e):
        e += 1
    while _ge_pow2(x, e - 1):
        e -= 1
    return e


def isqrt_ceil(n: int) -> int:
    """Smallest ``s >= 0`` with ``s*s >= n``."""
    if n < 0:
        raise ValueError("isqrt_ceil needs n >= 0")
    s = math.isqrt(n)
    return s if s * s == n else s + 1


def ln_upper_bound(x: RationalLike) -> int:
    """Integer ``ceil(log2 x)``, an upper bound on ``ln x`` for ``x > 1``."""
    x = as_rational(x)
    if x <= 1:
        raise ValueError("ln_upper_bound needs x > 1")
    return pow2_ceil_exp(x)


def binomial_coeff(n: int, k: int) -> int:
    if k < 0 or k > n:
        raise ValueError(f"binomial_coeff needs 0 <= k <= n, got n={n}, k={k}")
    return math.comb(n, k)


def multinomial(k: int, parts: Iterable[int]) -> int:
    """``k! / prod(p!)`` computed as a product of binomials."""
    parts = list(parts)
    if any(p < 0 for p in parts):
        raise ValueError("multinomial parts must be nonnegative")
    if sum(parts) != k:
        raise ValueError(f"multinomial parts sum to {sum(parts)}, expected {k}")
    result, seen = 1, 0
    for p in parts:
        seen += p
        result *= math.comb(seen, p)
    return result
