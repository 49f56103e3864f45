"""Random graph generators built on the truncated-binomial sampler.

Every generator follows the same pattern: split the candidate edges into
blocks that share one edge probability, draw each block's edge count from
B_Delta, pick that many edges uniformly, and, where the block probability
was rounded up, thin the chosen edges back to the true probability with an
exact coin.  Each block draws from its own child of the run's source, and
blocks are merged in a fixed order, so concurrent execution cannot change
the output.

Samplers are objects so the per-block setup can be reused across many
draws; the ``sample_*`` functions are one-shot conveniences.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from .arith import as_rational, binomial_coeff, multinomial, pow2_ceil_exp
from .binomial import ChainStats, TruncatedBinomialSpec, build_spec, sample_truncated_binomial
from .randomness import BitSource, BitStream, bernoulli_exact
from .subset import sample_k_subset, unrank_bipartite, unrank_pair

Pair = Tuple[int, int]

MAX_VERTICES = 1 << 63


@dataclass
class EdgeList:
    n: int
    edges: List[Pair]
    directed: bool = False
    n2: Optional[int] = None
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def bipartite(self) -> bool:
        return self.n2 is not None

    def __len__(self) -> int:
        return len(self.edges)


class BlockSampler:
    """Edge indices for one block of ``N`` candidates sharing probability ``p``.

    ``p == 0`` and ``p >= 1`` are deterministic and never touch the chain.
    """

    def __init__(self, N: int, p: Fraction, eps: Fraction):
        self.N = N
        self.p = p
        self.spec: Optional[TruncatedBinomialSpec] = None
        if N > 0 and 0 < p < 1:
            self.spec = build_spec(N, p, eps)

    @property
    def deterministic(self) -> bool:
        return self.spec is None

    def sample(self, src: BitStream, stats: ChainStats) -> List[int]:
        if self.N == 0 or self.p <= 0:
            return []
        if self.p >= 1:
            return list(range(self.N))
        m, _ = sample_truncated_binomial(self.spec, src, stats)
        return sample_k_subset(self.N, m, src)


def _check_unit(name: str, value: Fraction) -> None:
    if not 0 <= value <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _check_eps(eps: Fraction) -> None:
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")


def _stats_meta(stats: ChainStats) -> Dict[str, object]:
    return {
        "chain_draws": stats.draws,
        "coupling_steps": stats.coupling_time,
        "chain_updates": stats.updates,
        "monotonicity_violations": stats.violations,
    }


class GnpSampler:
    def __init__(self, n: int, p, eps):
        self.n = n
        self.p = as_rational(p)
        self.eps = as_rational(eps)
        if n < 1:
            raise ValueError("n must be at least 1")
        _check_unit("p", self.p)
        _check_eps(self.eps)
        self.block = BlockSampler(n * (n - 1) // 2, self.p, self.eps)

    def sample(self, src: BitStream) -> EdgeList:
        stats = ChainStats()
        indices = self.block.sample(src, stats)
        n = self.n
        edges = sorted(unrank_pair(c, n) for c in indices)
        meta = {"model": "gnp", "n": n, "p": self.p, "eps": self.eps}
        meta.update(_stats_meta(stats))
        return EdgeList(n=n, edges=edges, meta=meta)


class BipartiteSampler:
    def __init__(self, n1: int, n2: int, p, eps):
        self.n1, self.n2 = n1, n2
        self.p = as_rational(p)
        self.eps = as_rational(eps)
        if n1 < 1 or n2 < 1:
            raise ValueError("both sides need at least one vertex")
        _check_unit("p", self.p)
        _check_eps(self.eps)
        self.block = BlockSampler(n1 * n2, self.p, self.eps)

    def sample(self, src: BitStream) -> EdgeList:
        stats = ChainStats()
        indices = self.block.sample(src, stats)
        edges = [unrank_bipartite(c, self.n1, self.n2) for c in indices]
        meta = {"model": "bipartite", "n1": self.n1, "n2": self.n2, "p": self.p, "eps": self.eps}
        meta.update(_stats_meta(stats))
        return EdgeList(n=self.n1, n2=self.n2, edges=edges, meta=meta)


def sample_gnp(n: int, p, eps, src: BitStream) -> EdgeList:
    return GnpSampler(n, p, eps).sample(src)


def sample_gnp_bipartite(n1: int, n2: int, p, eps, src: BitStream) -> EdgeList:
    return BipartiteSampler(n1, n2, p, eps).sample(src)


# -- given expected degrees ---------------------------------------------------

@dataclass(frozen=True)
class VertexClassPartition:
    exponent: Tuple[int, ...]  # per vertex: rounded weight is 2**exponent
    classes: Dict[int, Tuple[int, ...]]  # exponent -> ascending global ids

    @property
    def count(self) -> int:
        return len(self.classes)


def round_weights(weights: Sequence) -> VertexClassPartition:
    exps = []
    for w in weights:
        w = as_rational(w)
        if w <= 0:
            raise ValueError(f"weights must be positive, got {w}")
        exps.append(pow2_ceil_exp(w))
    classes: Dict[int, List[int]] = {}
    for u, i in enumerate(exps):
        classes.setdefault(i, []).append(u)
    return VertexClassPartition(
        exponent=tuple(exps),
        classes={i: tuple(classes[i]) for i in sorted(classes)},
    )


def _pow2(e: int) -> Fraction:
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)


def exponent_range(exponents: Sequence[int]) -> int:
    if not exponents:
        return 0
    return max(abs(max(exponents)), abs(min(exponents)))


@dataclass
class _Block:
    label: bytes
    left: Tuple[int, ...]
    right: Optional[Tuple[int, ...]]  # None: pairs within ``left``
    rounded: Fraction
    sampler: BlockSampler


def _run_blocks(blocks, work: Callable, workers: Optional[int]):
    if workers and workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, blocks))
    return [work(b) for b in blocks]


class WeightedSampler:
    """G(n, w): edge {u, v} present with probability min(w_u w_v, 1).

    ``target`` overrides the per-pair probability; it must never exceed
    the rounded block probability (the inner-product sampler relies on
    this to fold its own normalization into the same thinning step).
    """

    def __init__(self, weights: Sequence, eps, target: Optional[Callable[[int, int], Fraction]] = None):
        self.weights = [as_rational(w) for w in weights]
        self.eps = as_rational(eps)
        _check_eps(self.eps)
        self.partition = round_weights(self.weights)
        self.target = target or self._product_target
        kc = self.partition.count
        self.eps_block = 2 * self.eps / (kc * (kc + 1)) if kc else self.eps
        self.blocks: List[_Block] = []
        items = list(self.partition.classes.items())
        for a, (i, members) in enumerate(items):
            p = min(_pow2(2 * i), Fraction(1))
            m = len(members)
            self.blocks.append(_Block(b"class:%d" % i, members, None, p,
                                      BlockSampler(m * (m - 1) // 2, p, self.eps_block)))
            for j, others in items[a + 1:]:
                p = min(_pow2(i + j), Fraction(1))
                self.blocks.append(_Block(b"pair:%d:%d" % (i, j), members, others, p,
                                          BlockSampler(len(members) * len(others), p, self.eps_block)))

    def _product_target(self, u: int, v: int) -> Fraction:
        return min(self.weights[u] * self.weights[v], Fraction(1))

    def acceptance(self, u: int, v: int) -> Fraction:
        """Thinning ratio applied to a sampled edge {u, v}."""
        rounded = min(_pow2(self.partition.exponent[u] + self.partition.exponent[v]), Fraction(1))
        return self.target(u, v) / rounded

    def _sample_block(self, run: BitSource, block: _Block):
        stats = ChainStats()
        if block.sampler.N == 0:
            return [], stats, 0
        src = run.split(block.label)
        indices = block.sampler.sample(src, stats)
        if block.right is None:
            m = len(block.left)
            pairs = []
            for c in indices:
                a, b = unrank_pair(c, m)
                pairs.append((block.left[a], block.left[b]))
        else:
            pairs = []
            n2 = len(block.right)
            for c in indices:
                a, b = unrank_bipartite(c, len(block.left), n2)
                u, v = block.left[a], block.right[b]
                pairs.append((u, v) if u < v else (v, u))
        kept = []
        for u, v in pairs:
            ratio = self.target(u, v) / block.rounded
            if ratio >= 1 or bernoulli_exact(src, ratio):
                kept.append((u, v))
        return kept, stats, len(pairs)

    def sample(self, src: BitSource, workers: Optional[int] = None) -> EdgeList:
        run = src.fork()
        results = _run_blocks(self.blocks, lambda b: self._sample_block(run, b), workers)
        stats = ChainStats()
        edges: List[Pair] = []
        proposed = 0
        for kept, s, before in results:
            edges.extend(kept)
            stats.add(s)
            proposed += before
        edges.sort()
        meta = {
            "model": "weighted",
            "n": len(self.weights),
            "eps": self.eps,
            "classes": self.partition.count,
            "eps_block": self.eps_block,
            "q": exponent_range(self.partition.exponent),
            "edges_before_normalization": proposed,
        }
        meta.update(_stats_meta(stats))
        return EdgeList(n=len(self.weights), edges=edges, meta=meta)


def sample_weighted(weights: Sequence, eps, src: BitSource, workers: Optional[int] = None) -> EdgeList:
    return WeightedSampler(weights, eps).sample(src, workers)


# -- inner-product kernel -----------------------------------------------------

def inner(x: Sequence[Fraction], y: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(x, y)), Fraction(0))


def rounded_length_exponent(squared_length: Fraction) -> int:
    """``m`` with ``2**(2m)`` the smallest even power of two >= the squared length."""
    e = pow2_ceil_exp(squared_length)
    return -(-e // 2)


class InnerProductSampler:
    """G(n, W): edge {u, v} present with probability min(<w_u, w_v>, 1).

    Each vector's length is rounded up to a power of two, ``L(u) = 2**m_u``
    with ``4**m_u >= |w_u|**2``; the given-degrees sampler runs on those
    lengths, and its thinning step uses the inner product as the target,
    which is at most ``L(u) L(v)`` by Cauchy-Schwarz.  Vertices whose row
    is all zeros take no part and stay isolated.
    """

    def __init__(self, rows: Sequence[Sequence], eps):
        self.rows = [[as_rational(x) for x in row] for row in rows]
        if not self.rows:
            raise ValueError("matrix has no rows")
        d = len(self.rows[0])
        for row in self.rows:
            if len(row) != d:
                raise ValueError("rows must all have the same length")
            if any(x < 0 for x in row):
                raise ValueError("matrix entries must be nonnegative")
        self.d = d
        self.eps = as_rational(eps)
        _check_eps(self.eps)
        self.squared = [inner(row, row) for row in self.rows]
        self.active = [u for u, s in enumerate(self.squared) if s > 0]
        self.length_exp = {u: rounded_length_exponent(self.squared[u]) for u in self.active}
        lengths = [_pow2(self.length_exp[u]) for u in self.active]
        self.weighted = None
        if self.active:
            self.weighted = WeightedSampler(lengths, self.eps, target=self._local_target)

    def _local_target(self, a: int, b: int) -> Fraction:
        u, v = self.active[a], self.active[b]
        return min(inner(self.rows[u], self.rows[v]), Fraction(1))

    def acceptance(self, u: int, v: int) -> Fraction:
        """Ratio min(<w_u, w_v>, 1) / min(L(u) L(v), 1) for active vertices."""
        rounded = min(_pow2(self.length_exp[u] + self.length_exp[v]), Fraction(1))
        return min(inner(self.rows[u], self.rows[v]), Fraction(1)) / rounded

    def sample(self, src: BitSource, workers: Optional[int] = None) -> EdgeList:
        n = len(self.rows)
        meta: Dict[str, object] = {"model": "dot", "n": n, "d": self.d, "eps": self.eps,
                                   "isolated": n - len(self.active)}
        if self.weighted is None:
            meta.update(_stats_meta(ChainStats()))
            return EdgeList(n=n, edges=[], meta=meta)
        local = self.weighted.sample(src, workers)
        ids = self.active
        edges = sorted((ids[a], ids[b]) for a, b in local.edges)
        meta["q"] = exponent_range(list(self.length_exp.values()))
        for key in ("classes", "eps_block", "edges_before_normalization", "chain_draws",
                    "coupling_steps", "chain_updates", "monotonicity_violations"):
            meta[key] = local.meta[key]
        return EdgeList(n=n, edges=edges, meta=meta)


def sample_inner_product(rows: Sequence[Sequence], eps, src: BitSource,
                         workers: Optional[int] = None) -> EdgeList:
    return InnerProductSampler(rows, eps).sample(src, workers)


# -- stochastic Kronecker -----------------------------------------------------

@dataclass(frozen=True)
class EdgeClass:
    alpha: Tuple[int, ...]  # exponent of cell (i, j) at position i * d + j
    size: int
    prob: Optional[Fraction] = None

    @property
    def label(self) -> bytes:
        return b"kron:" + b",".join(b"%d" % a for a in self.alpha)


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def class_count(d: int, k: int) -> int:
    return binomial_coeff(k + d * d - 1, d * d - 1)


def enumerate_edge_classes(d: int, k: int,
                           theta: Optional[Sequence[Sequence[Fraction]]] = None) -> Iterator[EdgeClass]:
    """All exponent vectors over the ``d*d`` initiator cells summing to ``k``.

    Lexicographic order; each class carries its size (a multinomial) and,
    given ``theta``, its edge probability ``prod theta_ij ** alpha_ij``.
    """
    if d < 1 or k < 1:
        raise ValueError("need d >= 1 and k >= 1")
    cells = [as_rational(x) for row in theta for x in row] if theta is not None else None
    for alpha in _compositions(k, d * d):
        prob = None
        if cells is not None:
            prob = Fraction(1)
            for t, a in zip(cells, alpha):
                if a:
                    prob *= t ** a
        yield EdgeClass(alpha=alpha, size=multinomial(k, alpha), prob=prob)


def unrank_class_edge(cls: EdgeClass, rank: int, d: int, k: int) -> Pair:
    """The ``rank``-th ordered pair of an edge class.

    Pairs correspond to arrangements of the class's multiset of cells over
    the ``k`` digit positions, listed lexicographically (cells row-major,
    most significant position first).  Cell ``(i, j)`` at a position
    contributes digit ``i`` to ``u`` and ``j`` to ``v`` in base ``d``.
    """
    if not 0 <= rank < cls.size:
        raise ValueError(f"rank {rank} out of range for class of size {cls.size}")
    counts = list(cls.alpha)
    remaining = k
    total = cls.size  # arrangements of what is left
    u = v = 0
    for _ in range(k):
        for cell, c in enumerate(counts):
            if not c:
                continue
            block = total * c // remaining
            if rank < block:
                break
            rank -= block
        counts[cell] -= 1
        total = block
        remaining -= 1
        i, j = divmod(cell, d)
        u = u * d + i
        v = v * d + j
    return u, v


def kronecker_probability(theta: Sequence[Sequence[Fraction]], u: int, v: int, k: int) -> Fraction:
    """Entry (u, v) of the k-fold Kronecker power, from the base-d digits."""
    d = len(theta)
    prob = Fraction(1)
    for _ in range(k):
        u, i = divmod(u, d)
        v, j = divmod(v, d)
        prob *= as_rational(theta[i][j])
    return prob


@dataclass(frozen=True)
class Initiator:
    theta: Tuple[Tuple[Fraction, ...], ...]
    k: int

    def __post_init__(self):
        d = len(self.theta)
        if d < 1 or any(len(row) != d for row in self.theta):
            raise ValueError("initiator must be a square matrix")
        if any(x < 0 for row in self.theta for x in row):
            raise ValueError("initiator entries must be nonnegative")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if d ** self.k > MAX_VERTICES:
            raise ValueError(f"{d}**{self.k} vertices exceeds the addressable range")

    @classmethod
    def of(cls, theta: Sequence[Sequence], k: int) -> "Initiator":
        return cls(tuple(tuple(as_rational(x) for x in row) for row in theta), k)

    @property
    def d(self) -> int:
        return len(self.theta)

    @property
    def n(self) -> int:
        return self.d ** self.k


class KroneckerSampler:
    """Stochastic Kronecker graph on ``d**k`` vertices, as ordered pairs.

    The native output is directed and includes self-loops; ``undirected``
    keeps only pairs with ``u < v`` and ``self_loops=False`` drops ``u == v``.
    """

    def __init__(self, init: Initiator, eps, undirected: bool = False, self_loops: bool = True):
        self.init = init
        self.eps = as_rational(eps)
        _check_eps(self.eps)
        self.undirected = undirected
        self.self_loops = self_loops
        d, k = init.d, init.k
        self.class_count = class_count(d, k)
        self.eps_class = self.eps / self.class_count
        self.classes = list(enumerate_edge_classes(d, k, init.theta))
        self.samplers = [BlockSampler(c.size, min(c.prob, Fraction(1)), self.eps_class)
                         for c in self.classes]

    def _sample_class(self, run: BitSource, index: int):
        stats = ChainStats()
        cls, sampler = self.classes[index], self.samplers[index]
        if cls.prob == 0:
            return [], stats
        src = run.split(cls.label)
        d, k = self.init.d, self.init.k
        pairs = []
        for rank in sampler.sample(src, stats):
            u, v = unrank_class_edge(cls, rank, d, k)
            if self.undirected and u >= v:
                continue
            if u == v and not self.self_loops:
                continue
            pairs.append((u, v))
        return pairs, stats

    def sample(self, src: BitSource, workers: Optional[int] = None) -> EdgeList:
        run = src.fork()
        results = _run_blocks(list(range(len(self.classes))),
                              lambda i: self._sample_class(run, i), workers)
        stats = ChainStats()
        edges: List[Pair] = []
        for pairs, s in results:
            edges.extend(pairs)
            stats.add(s)
        edges.sort()
        positive = [x for row in self.init.theta for x in row if x > 0]
        meta = {
            "model": "kronecker",
            "n": self.init.n,
            "d": self.init.d,
            "k": self.init.k,
            "eps": self.eps,
            "classes": self.class_count,
            "eps_class": self.eps_class,
            "q": exponent_range([pow2_ceil_exp(x) for x in positive]),
            "undirected": self.undirected,
            "self_loops": self.self_loops,
        }
        meta.update(_stats_meta(stats))
        return EdgeList(n=self.init.n, edges=edges, directed=not self.undirected, meta=meta)


def sample_kronecker(init: Initiator, eps, src: BitSource, undirected: bool = False,
                     self_loops: bool = True, workers: Optional[int] = None) -> EdgeList:
    return KroneckerSampler(init, eps, undirected, self_loops).sample(src, workers)
