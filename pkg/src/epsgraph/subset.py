"""Uniform k-subsets and edge-index unranking."""

from __future__ import annotations

import math
from typing import List, Tuple

from .randomness import BitStream, uniform_below


def sample_k_subset(N: int, k: int, src: BitStream) -> List[int]:
    """Uniform random ``k``-subset of ``range(N)``, returned sorted.

    Floyd's method: for ``j`` from ``N - k`` to ``N - 1`` draw
    ``t`` uniform in ``[0, j]`` and insert ``t``, or ``j`` if ``t`` is
    already taken.  Uses exactly ``k`` uniform draws.
    """
    if not 0 <= k <= N:
        raise ValueError(f"need 0 <= k <= N, got k={k}, N={N}")
    if k == N:
        return list(range(N))
    chosen = set()
    add = chosen.add
    for j in range(N - k, N):
        t = uniform_below(src, j + 1)
        add(j if t in chosen else t)
    return sorted(chosen)


def unrank_pair(c: int, n: int) -> Tuple[int, int]:
    """Colexicographic pair ``(u, v)``, ``u < v < n``, of rank ``c``.

    ``v`` is the largest integer with ``v(v-1)/2 <= c`` and
    ``u = c - v(v-1)/2``.
    """
    if not 0 <= c < n * (n - 1) // 2:
        raise ValueError(f"pair rank {c} out of range for n={n}")
    v = (1 + math.isqrt(8 * c + 1)) // 2
    # the closed form is exact; the loops only guard the boundary
    while v * (v - 1) // 2 > c:
        v -= 1
    while (v + 1) * v // 2 <= c:
        v += 1
    return c - v * (v - 1) // 2, v


def rank_pair(u: int, v: int) -> int:
    if u > v:
        u, v = v, u
    return v * (v - 1) // 2 + u


def unrank_bipartite(c: int, n1: int, n2: int) -> Tuple[int, int]:
    if not 0 <= c < n1 * n2:
        raise ValueError(f"bipartite rank {c} out of range for {n1}x{n2}")
    return divmod(c, n2)


def rank_bipartite(u: int, v: int, n2: int) -> int:
    return u * n2 + v
