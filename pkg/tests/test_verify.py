import itertools
import math
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from epsgraph.binomial import alpha_plus, build_spec, sample_truncated_binomial
from epsgraph.randomness import BitSource, decision_tree
from epsgraph.verify import (
    ExactPmf,
    Histogram,
    baseline_skip,
    baseline_skip_law,
    binomial_pmf_exact,
    check_detailed_balance,
    chi_square,
    chi_square_critical,
    geometric_law,
    length_dominance_holds,
    max_skip_bound,
    naive_exact_gnp,
    skip_baseline_draw,
    skip_baseline_gnp,
    skip_law_tv,
    spec_tail_mass,
    tail_mass,
    truncated_pmf,
    tv_between,
    tv_distance,
    uniform_draws,
)

F = Fraction


# exact pmfs

def test_pmf_examples():
    assert binomial_pmf_exact(1, F(1, 3)).masses() == {0: F(2, 3), 1: F(1, 3)}
    pmf = binomial_pmf_exact(15, F(1, 3))
    assert pmf.mass(5) == F(3075072, 14348907) == 3003 * F(1, 3) ** 5 * F(2, 3) ** 10
    assert pmf.mass(16) == 0 and pmf.mass(-1) == 0


@pytest.mark.parametrize("N, p", [(1, F(1, 2)), (15, F(1, 3)), (100, F(7, 10)), (300, F(1, 1000))])
def test_pmf_normalized_and_matches_closed_form(N, p):
    pmf = binomial_pmf_exact(N, p)
    assert sum(pmf.masses().values()) == 1
    for k in (0, N // 3, N):
        assert pmf.mass(k) == math.comb(N, k) * p ** k * (1 - p) ** (N - k)


def test_pmf_cap():
    with pytest.raises(ValueError):
        binomial_pmf_exact(10 ** 4 + 1, F(1, 2))


def test_truncated_equals_full_on_whole_range():
    spec = build_spec(15, F(1, 3), F(1, 100))
    assert (spec.lo, spec.hi) == (0, 15)
    assert truncated_pmf(spec).masses() == binomial_pmf_exact(15, F(1, 3)).masses()
    assert tail_mass(15, F(1, 3), 0, 15) == 0


def test_truncated_rescales_interior():
    spec = build_spec(10 ** 4, F(1, 2), F(1, 10))
    full, trunc = binomial_pmf_exact(spec.N, spec.p), truncated_pmf(spec)
    tail = spec_tail_mass(spec)
    assert 0 < tail < spec.eps
    assert sum(trunc.masses().values()) == 1
    for k in (spec.lo, spec.mu_bar, spec.hi):
        assert trunc.mass(k) > full.mass(k)
        assert trunc.mass(k) == full.mass(k) / (1 - tail)
    assert trunc.mass(spec.lo - 1) == 0


@pytest.mark.parametrize("N, p, eps", [(100, F(7, 10), F(1, 100)), (1000, F(1, 1000), F(1, 10))])
def test_tail_below_eps(N, p, eps):
    spec = build_spec(N, p, eps)
    tail = spec_tail_mass(spec)
    assert tail < eps
    pmf = binomial_pmf_exact(N, p)
    assert tail == 1 - sum(pmf.mass(k) for k in range(spec.lo, spec.hi + 1))


# detailed balance

def test_balance_worked_pair():
    spec = build_spec(15, F(1, 3), F(1, 100))
    pmf = binomial_pmf_exact(15, F(1, 3))
    assert pmf.mass(5) / pmf.mass(4) == F(11, 10)
    assert pmf.mass(4) * 1 * F(1, 4) == pmf.mass(5) * F(10, 11) * F(1, 4)
    assert check_detailed_balance(spec)


@pytest.mark.parametrize("N, p, eps", [(15, F(1, 3), F(1, 100)), (100, F(7, 10), F(1, 100))])
def test_balance_examples(N, p, eps):
    assert check_detailed_balance(build_spec(N, p, eps))


def test_balance_detects_perturbation():
    spec = build_spec(15, F(1, 3), F(1, 100))
    bump = lambda s, k: alpha_plus(s, k) * (1 + F(1, 10 ** 9))
    shrink = lambda s, k: alpha_plus(s, k) * (1 - F(1, 10 ** 9))
    assert not check_detailed_balance(spec, up=bump)
    assert not check_detailed_balance(spec, up=shrink)


# distances and tests

def test_tv_examples():
    pmf = ExactPmf.from_masses({0: F(1, 4), 1: F(3, 4)})
    assert tv_distance(Histogram.of([0, 1, 1, 1]), pmf) == 0
    assert tv_distance(Histogram.of([0] * 7), ExactPmf.uniform(0, 1)) == F(1, 2)
    # mass where the histogram is empty counts, and so do draws outside the support
    assert tv_distance(Histogram.of([5]), ExactPmf.uniform(0, 1)) == 1
    with pytest.raises(ValueError):
        tv_distance(Histogram(), pmf)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=50))
def test_tv_bounds_and_symmetry(samples):
    h = Histogram.of(samples)
    pmf = binomial_pmf_exact(6, F(2, 5))
    tv = tv_distance(h, pmf)
    assert 0 <= tv <= 1
    emp = {k: h.frequency(k) for k in h.counts}
    assert tv == tv_between(emp, pmf.masses()) == tv_between(pmf.masses(), emp)


def test_sampler_tv_small():
    spec = build_spec(15, F(1, 3), F(1, 100))
    src = BitSource(11)
    h = Histogram.of(sample_truncated_binomial(spec, src).value for _ in range(50_000))
    assert tv_distance(h, truncated_pmf(spec)) <= F(3, 100)


def test_histogram_bookkeeping():
    h = Histogram.of([1, 1, 2])
    h.add(3, times=2)
    h.update([2])
    assert h.total == 6 == sum(h.counts.values())
    assert h.frequency(2) == F(1, 3)


def test_chi_square_exact_expectation():
    pmf = ExactPmf.uniform(0, 19)
    h = Histogram()
    for k in range(20):
        h.add(k, 500)
    stat, dof = chi_square(h, pmf)
    assert stat == 0 and dof == 19


def test_chi_square_uniform_passes():
    h = uniform_draws(20, 100_000, BitSource(12))
    stat, dof = chi_square(h, ExactPmf.uniform(0, 19))
    assert dof == 19 and stat < chi_square_critical(19)


def test_chi_square_detects_shifted_p():
    spec_p, drawn_p = F(1, 3), F(1, 3) + F(5, 100)
    src = BitSource(13)
    h = Histogram.of(len(naive_exact_gnp(6, drawn_p, src).edges) for _ in range(5_000))
    stat, dof = chi_square(h, binomial_pmf_exact(15, spec_p))
    assert stat > chi_square_critical(dof)
    same = Histogram.of(len(naive_exact_gnp(6, spec_p, src).edges) for _ in range(5_000))
    stat, dof = chi_square(same, binomial_pmf_exact(15, spec_p))
    assert stat < chi_square_critical(dof)


def test_chi_square_pools_sparse_bins():
    pmf = binomial_pmf_exact(15, F(1, 3))
    h = Histogram.of([5] * 100)
    stat, dof = chi_square(h, pmf)
    assert dof < 15 and stat > 0
    assert chi_square(Histogram.of([16]), pmf).statistic == float("inf")
    with pytest.raises(ValueError):
        chi_square(Histogram(), pmf)


# naive oracle

def test_naive_gnp():
    assert len(naive_exact_gnp(6, F(1), BitSource(1)).edges) == 15
    assert naive_exact_gnp(6, F(0), BitSource(1)).edges == []
    with pytest.raises(ValueError):
        naive_exact_gnp(1001, F(1, 2), BitSource(1))


def test_naive_gnp_edge_frequencies():
    src = BitSource(14)
    runs = 20_000
    counts = Counter()
    sizes = Histogram()
    for _ in range(runs):
        g = naive_exact_gnp(6, F(1, 3), src)
        counts.update(g.edges)
        sizes.add(len(g.edges))
    sigma = math.sqrt(runs * (1 / 3) * (2 / 3))
    for e in itertools.combinations(range(6), 2):
        assert abs(counts[e] - runs / 3) <= 4 * sigma
    assert tv_distance(sizes, binomial_pmf_exact(15, F(1, 3))) <= F(3, 100)


# geometric skipping with quantized uniforms

def test_skip_bound_examples():
    assert max_skip_bound(F(1, 2), 1) == (2, F(1, 4))
    assert max_skip_bound(F(1, 2), 3) == (4, F(1, 16))


def test_one_bit_skip_law():
    law = baseline_skip_law(F(1, 2), 1)
    assert law == {1: F(1, 2), 2: F(1, 2)}
    assert [baseline_skip(F(1, 2), 1, j) for j in (0, 1)] == [1, 2]
    assert geometric_law(F(1, 2), 3)[3] == F(1, 8) and 3 not in law


def test_skip_law_matches_decision_tree():
    for p, b in [(F(1, 3), 4), (F(1, 2), 3), (F(7, 10), 5)]:
        law, undecided = decision_tree(lambda s: skip_baseline_draw(p, b, s), b)
        assert undecided == 0 and law == baseline_skip_law(p, b)


def test_skip_brute_force_thresholds():
    p, b = F(2, 7), 6
    for j in range(1 << b):
        r = F(j, 1 << b)
        s = baseline_skip(p, b, j)
        assert r < 1 - (1 - p) ** s and (s == 1 or r >= 1 - (1 - p) ** (s - 1))


def test_skip_draws_never_exceed_bound():
    src = BitSource(15)
    kmax, _ = max_skip_bound(F(1, 2), 1)
    assert max(skip_baseline_draw(F(1, 2), 1, src) for _ in range(20_000)) <= kmax


@pytest.mark.parametrize("p", [F(1, 3), F(1, 2), F(1, 100)])
def test_skip_bias_shrinks_with_precision(p):
    tvs = [skip_law_tv(p, b) for b in range(1, 25)]
    missing = [max_skip_bound(p, b)[1] for b in range(1, 25)]
    assert all(x >= y for x, y in zip(tvs, tvs[1:]))
    assert all(x >= y for x, y in zip(missing, missing[1:]))
    assert tvs[-1] < F(1, 10 ** 4)


def test_skip_bias_exact_at_one_bit():
    # quantized law {1: 1/2, 2: 1/2} against Geom(1/2): TV is the missing mass
    assert skip_law_tv(F(1, 2), 1) == F(1, 4)


def test_skip_baseline_full_resolution_has_no_missing_pairs():
    N = 15
    p = F(1, 2)
    b = 1
    while F(1, 1 << b) >= (1 - p) ** N:
        b += 1
    kmax, _ = max_skip_bound(p, b)
    assert kmax > N


def test_skip_baseline_gnp_shape():
    g = skip_baseline_gnp(10, F(1), 4, BitSource(1))
    assert g.edges == [(u, v) for u in range(10) for v in range(u + 1, 10)]
    assert skip_baseline_gnp(10, F(0), 4, BitSource(1)).edges == []
    g = skip_baseline_gnp(50, F(1, 5), 8, BitSource(2))
    assert g.edges == sorted(set(g.edges)) and all(0 <= u < v < 50 for u, v in g.edges)


def test_skip_baseline_gnp_one_bit_bias():
    # with p = 1/2 and one bit, at most one pair in a row can be skipped, so
    # every run of two consecutive non-edges is impossible
    src = BitSource(16)
    order = [(w, v) for v in range(1, 6) for w in range(v)]
    for _ in range(2000):
        edges = set(skip_baseline_gnp(6, F(1, 2), 1, src).edges)
        flags = [e in edges for e in order]
        assert flags[0] or flags[1]
        assert all(a or b for a, b in zip(flags[1:], flags[2:]))


@pytest.mark.parametrize("p, b", [(F(0), 3), (F(1, 2), 0)])
def test_skip_domain(p, b):
    with pytest.raises(ValueError):
        max_skip_bound(p, b)


# d times the inner products dominates the products of lengths

def test_dominance_counterexample():
    rows = [[1, 0], [0, 1]]
    assert not length_dominance_holds(rows)
    assert length_dominance_holds(rows, diagonal=True)


def test_dominance_exact_equality():
    assert length_dominance_holds([[1, 0], [1, 0]])
    assert length_dominance_holds([[F(3, 5), F(4, 5)], [F(3, 5), F(4, 5)]], diagonal=True)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.fractions(min_value=0, max_value=1, max_denominator=16), min_size=3, max_size=3),
                min_size=1, max_size=6))
def test_dominance_diagonal_form_always_holds(rows):
    assert length_dominance_holds(rows, diagonal=True)


def test_dominance_random_agrees_with_floats():
    rng = random.Random(17)
    for _ in range(100):
        n, d = rng.randint(2, 5), rng.randint(1, 3)
        rows = [[F(rng.randint(0, 8), 8) for _ in range(d)] for _ in range(n)]
        lhs = d * sum(sum(x * y for x, y in zip(rows[u], rows[v])) for u in range(n) for v in range(u + 1, n))
        norms = [math.sqrt(sum(float(x) ** 2 for x in r)) for r in rows]
        rhs = sum(norms[u] * norms[v] for u in range(n) for v in range(u + 1, n))
        if abs(float(lhs) - rhs) > 1e-9:
            assert length_dominance_holds(rows) == (float(lhs) > rhs)
