import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from epsgraph.randomness import BitSource, decision_tree
from epsgraph.subset import rank_bipartite, rank_pair, sample_k_subset, unrank_bipartite, unrank_pair
from epsgraph.verify import ExactPmf, Histogram, chi_square, chi_square_critical


def test_subset_edges():
    src = BitSource(1)
    assert sample_k_subset(10, 0, src) == []
    assert sample_k_subset(10, 10, src) == list(range(10))
    with pytest.raises(ValueError):
        sample_k_subset(3, 4, src)


@pytest.mark.parametrize("N, k", [(N, k) for N in range(1, 7) for k in range(N + 1)])
def test_subset_law_is_exactly_uniform(N, k):
    law, undecided = decision_tree(lambda t: tuple(sample_k_subset(N, k, t)), 12)
    decided = 1 - undecided
    subsets = list(itertools.combinations(range(N), k))
    assert sorted(law) == subsets
    for s in subsets:
        assert law[s] / decided == Fraction(1, math.comb(N, k))


def test_subset_six_three_chi_square():
    subsets = {s: i for i, s in enumerate(itertools.combinations(range(6), 3))}
    src = BitSource(2)
    draws = 120_000
    h = Histogram.of(subsets[tuple(sample_k_subset(6, 3, src))] for _ in range(draws))
    sigma = math.sqrt(draws / 20 * 19 / 20)
    assert all(abs(h.counts[i] - draws / 20) <= 4 * sigma for i in range(20))
    stat, dof = chi_square(h, ExactPmf.uniform(0, 19))
    assert dof == 19 and stat < chi_square_critical(19)


@given(st.integers(1, 10 ** 6), st.data())
def test_subset_sorted_distinct(N, data):
    k = data.draw(st.integers(0, min(N, 300)))
    out = sample_k_subset(N, k, BitSource(data.draw(st.integers(0, 2 ** 64))))
    assert len(out) == k and out == sorted(set(out)) and all(0 <= x < N for x in out)


def test_unrank_pair_examples():
    assert unrank_pair(0, 5) == (0, 1)
    assert unrank_pair(9, 5) == (3, 4)


def test_unrank_pair_colex_listing():
    colex = sorted(itertools.combinations(range(5), 2), key=lambda p: (p[1], p[0]))
    assert [unrank_pair(c, 5) for c in range(10)] == colex


def test_unrank_pair_bijection_n12():
    pairs = [unrank_pair(c, 12) for c in range(66)]
    assert len(set(pairs)) == 66 and all(0 <= u < v < 12 for u, v in pairs)
    assert [rank_pair(u, v) for u, v in pairs] == list(range(66))


@given(st.integers(2, 10 ** 30), st.data())
def test_unrank_pair_round_trip_large(n, data):
    c = data.draw(st.integers(0, n * (n - 1) // 2 - 1))
    u, v = unrank_pair(c, n)
    assert 0 <= u < v < n and rank_pair(u, v) == c


@pytest.mark.parametrize("c", [-1, 10])
def test_unrank_pair_range(c):
    with pytest.raises(ValueError):
        unrank_pair(c, 5)


def test_unrank_bipartite():
    assert unrank_bipartite(0, 3, 4) == (0, 0)
    assert unrank_bipartite(4, 3, 4) == (1, 0)
    pairs = [unrank_bipartite(c, 3, 4) for c in range(12)]
    assert len(set(pairs)) == 12
    assert [rank_bipartite(u, v, 4) for u, v in pairs] == list(range(12))
    with pytest.raises(ValueError):
        unrank_bipartite(12, 3, 4)
