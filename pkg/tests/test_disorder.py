from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from potts_af.bounds import annealed_pressure
from potts_af.disorder import (
    balanced_count,
    conditional_moments_balanced,
    edges_to_couplings,
    quenched_pressure_exact,
    quenched_pressure_mc,
    restricted_partition_balanced,
    sample_couplings,
    sample_edges_given_k,
    sum_rule_deficit,
)
from potts_af.model import ModelParams, log_partition

from conftest import combined_error


def test_sample_couplings_zero_connectivity():
    J = sample_couplings(4, 0.0, seed=1)
    assert np.all(J == 0)


def test_sample_couplings_moments():
    n, c, draws = 4, 2.0, 4000
    totals = np.array([sample_couplings(n, c, seed=s).sum() for s in range(draws)])
    # total count is Poisson(c n / 2)
    mean, var = c * n / 2, c * n / 2
    assert abs(totals.mean() - mean) <= 4 * math.sqrt(var / draws)
    entries = np.array([sample_couplings(n, c, seed=s)[0, 0] for s in range(draws)])
    lam = c / (2 * n)
    assert abs(entries.mean() - lam) <= 4 * math.sqrt(lam / draws)
    assert abs(entries.var() - lam) <= 4 * lam * math.sqrt(2.0 / draws) + 0.05 * lam


def test_sample_couplings_reproducible():
    a = sample_couplings(5, 3.0, seed=42)
    b = sample_couplings(5, 3.0, seed=42)
    np.testing.assert_array_equal(a, b)


def test_sample_edges_given_k():
    assert sample_edges_given_k(3, 0, seed=0).shape == (0, 2)
    edges = sample_edges_given_k(3, 50_000, seed=5)
    freq = float(np.mean((edges[:, 0] == 0) & (edges[:, 1] == 0)))
    p = 1.0 / 9
    assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / 50_000)


def test_conditional_gibbs_factor_closed_form():
    # averaging e^{-beta H(Sigma_R, J)} over all n^{2K} unit-edge placements
    # must equal (n^-2 sum_ij e^{-beta sum_r d})^K
    n, q, beta = 2, 2, 1.3
    replicas = np.array([[0, 1], [0, 0]])  # R = 2 fixed bundle
    inner = 0.0
    for i in range(n):
        for j in range(n):
            expo = sum(float(r[i] == r[j]) for r in replicas)
            inner += math.exp(-beta * expo)
    inner /= n * n
    cells = [(i, j) for i in range(n) for j in range(n)]
    for k in (1, 2):
        acc = 0.0
        for placement in itertools.product(range(len(cells)), repeat=k):
            J = np.zeros((n, n))
            for p in placement:
                J[cells[p]] += 1
            h = sum(
                float(J[i, j]) * float(r[i] == r[j])
                for r in replicas for i in range(n) for j in range(n)
            )
            acc += math.exp(-beta * h)
        acc /= len(cells) ** k
        assert acc == pytest.approx(inner**k, rel=1e-12)


def test_quenched_exact_zero_connectivity():
    est = quenched_pressure_exact(ModelParams(q=3, beta=2.0, c=0.0), 3)
    assert est.value == math.log(3)
    assert est.tail_bound == 0.0 and est.stat_error == 0.0


def test_quenched_exact_single_site_law():
    # p_1(beta, c) = ln q - beta c / 2, certified to 1e-10
    for q, beta, c in [(2, 1.0, 1.0), (3, 0.5, 4.0), (4, 2.0, 2.0)]:
        est = quenched_pressure_exact(ModelParams(q=q, beta=beta, c=c), 1, eps=1e-10)
        assert est.stat_error == 0.0
        assert abs(est.value - (math.log(q) - beta * c / 2)) <= 1e-10 + est.tail_bound


def test_quenched_exact_matches_direct_poisson_average():
    # brute-force oracle: truncated expectation over iid Poisson entries
    q, beta, c, n = 2, 1.0, 1.0, 2
    lam = c / (2 * n)
    total, mass = 0.0, 0.0
    for entries in itertools.product(range(9), repeat=n * n):
        w = math.prod(math.exp(-lam) * lam**e / math.factorial(e) for e in entries)
        J = np.array(entries).reshape(n, n)
        total += w * log_partition(J, beta, q) / n
        mass += w
    est = quenched_pressure_exact(ModelParams(q=q, beta=beta, c=c), n, eps=1e-8)
    assert est.stat_error == 0.0  # fully exact at this size
    assert abs(total - est.value) <= est.tail_bound + (1 - mass) * 5 + 1e-12


def test_quenched_mc_trivial_cases():
    est = quenched_pressure_mc(ModelParams(q=2, beta=1.0, c=0.0), 3, samples=100, seed=0)
    assert est.value == pytest.approx(math.log(2), abs=1e-14)
    assert est.stat_error == 0.0
    est = quenched_pressure_mc(ModelParams(q=3, beta=0.0, c=2.0), 3, samples=100, seed=0)
    assert est.value == pytest.approx(math.log(3), abs=1e-13)


def test_quenched_mc_agrees_with_exact(pressure_cache):
    for q, beta, c, n in [(2, 1.0, 2.0, 3), (3, 0.5, 1.0, 4)]:
        exact = pressure_cache(q, beta, c, n)
        mc = quenched_pressure_mc(ModelParams(q=q, beta=beta, c=c), n,
                                  samples=6000, seed=77)
        assert abs(exact.value - mc.value) <= combined_error(exact, mc)


def test_quenched_mc_needs_two_samples():
    with pytest.raises(ValueError):
        quenched_pressure_mc(ModelParams(q=2, beta=1.0, c=1.0), 2, samples=1, seed=0)


def test_superadditivity_small_grid(pressure_cache):
    for q, beta, c in [(2, 1.0, 2.0), (3, 0.7, 1.5)]:
        ests = {n: pressure_cache(q, beta, c, n) for n in (1, 2, 3, 4)}
        for n1, n2 in [(1, 1), (1, 2), (2, 2), (1, 3)]:
            big, a, b = ests[n1 + n2], ests[n1], ests[n2]
            lhs = (n1 + n2) * big.value
            rhs = n1 * a.value + n2 * b.value
            slack = (n1 + n2) * combined_error(big) + n1 * combined_error(a) \
                + n2 * combined_error(b)
            assert lhs >= rhs - slack


def test_lipschitz_in_c(pressure_cache):
    for q, beta, (c1, c2), n in [(2, 1.0, (1.0, 2.0), 3), (3, 2.0, (2.0, 4.0), 3)]:
        e1, e2 = pressure_cache(q, beta, c1, n), pressure_cache(q, beta, c2, n)
        assert abs(e2.value - e1.value) <= beta * (c2 - c1) / 2 + combined_error(e1, e2)


def test_annealed_domination_small(pressure_cache):
    for q, beta, c, n in [(2, 2.0, 4.0, 4), (3, 1.0, 1.0, 3)]:
        est = pressure_cache(q, beta, c, n)
        assert est.value <= annealed_pressure(beta, c, q) + 1e-9 + combined_error(est)


def test_fekete_running_max(pressure_cache):
    # the running maximum of p_N is nondecreasing within errors, and stays
    # below the annealed limit
    q, beta, c = 2, 1.0, 2.0
    ests = [pressure_cache(q, beta, c, n) for n in (1, 2, 3, 4, 5)]
    running = -math.inf
    for est in ests:
        running = max(running, est.value)
        assert est.value <= annealed_pressure(beta, c, q) + combined_error(est)
    values = [e.value for e in ests]
    maxima = np.maximum.accumulate(values)
    for v, m, e in zip(values, maxima, ests):
        assert m >= v - combined_error(e)


def test_conditional_law_equivalence():
    # couplings built from Poisson-count uniform edges match direct Poisson
    # sampling on total-count statistics
    n, c, draws = 3, 2.0, 100_000
    rng = np.random.default_rng(123)
    lam = c * n / 2
    direct = np.array([sample_couplings(n, c, seed=int(s)).sum()
                       for s in rng.integers(0, 2**31, size=draws // 10)])
    ks = rng.poisson(lam, size=draws // 10)
    via_edges = np.array([
        edges_to_couplings(sample_edges_given_k(n, int(k), seed=int(s)), n).sum()
        for k, s in zip(ks, rng.integers(0, 2**31, size=draws // 10))
    ])
    hi = int(max(direct.max(), via_edges.max())) + 1
    bins = np.arange(0, hi + 1)
    h1, _ = np.histogram(direct, bins=bins)
    h2, _ = np.histogram(via_edges, bins=bins)
    keep = (h1 + h2) >= 10
    table = np.stack([h1[keep], h2[keep]])
    _, p_value, _, _ = chi2_contingency(table)
    assert p_value > 0.001


def test_sum_rule_trivial_cases():
    zero_beta = sum_rule_deficit(ModelParams(q=2, beta=0.0, c=2.0), 2, 5, 4)
    assert zero_beta.value == 0.0
    zero_c = sum_rule_deficit(ModelParams(q=2, beta=1.0, c=0.0), 2, 5, 4)
    assert zero_c.value == 0.0


def test_sum_rule_matches_direct_gap(pressure_cache):
    params = ModelParams(q=2, beta=1.0, c=1.0)
    deficit = sum_rule_deficit(params, 2, r_max=20, quad_points=16, seed=4)
    p2 = pressure_cache(2, 1.0, 1.0, 2, 1e-7)
    direct = annealed_pressure(1.0, 1.0, 2) - p2.value
    budget = deficit.tail_bound + 4 * deficit.stat_error + combined_error(p2)
    assert abs(deficit.value - direct) <= budget


def test_balanced_count():
    assert balanced_count(4, 2) == 6
    assert balanced_count(6, 3) == 90


def test_restricted_partition_counting():
    # beta = 0 / J = 0 reduce to pure counting of balanced configurations
    J = np.zeros((4, 4), dtype=int)
    expect = math.log(6)
    assert restricted_partition_balanced(J, 0.0, 2) == pytest.approx(expect, abs=1e-13)
    assert restricted_partition_balanced(J, 3.0, 2) == pytest.approx(expect, abs=1e-13)
    with pytest.raises(ValueError):
        restricted_partition_balanced(np.zeros((3, 3)), 1.0, 2)


def test_restricted_partition_zero_temperature():
    # N = q = 2 with a single bond: balanced proper colorings by brute force
    J = np.zeros((2, 2), dtype=int)
    J[0, 1] = 1
    brute = sum(
        1 for s in itertools.product(range(2), repeat=2)
        if s.count(0) == 1 and (J[0, 1] * (s[0] == s[1])) == 0
    )
    assert restricted_partition_balanced(J, math.inf, 2) == pytest.approx(math.log(brute))
    # no proper balanced coloring -> -inf
    J_all = np.ones((2, 2), dtype=int)
    assert restricted_partition_balanced(J_all, math.inf, 2) == -math.inf


def test_conditional_moments_k0_and_beta0():
    n, q = 4, 2
    first, second = conditional_moments_balanced(n, q, 1.7, 0)
    assert first == pytest.approx(balanced_count(n, q), abs=1e-12)
    brute_second = sum(
        1
        for s1 in itertools.product(range(q), repeat=n)
        for s2 in itertools.product(range(q), repeat=n)
        if s1.count(0) == 2 and s2.count(0) == 2
    )
    assert second == pytest.approx(brute_second, rel=1e-12)
    first_b0, _ = conditional_moments_balanced(n, q, 0.0, 7)
    assert first_b0 == pytest.approx(balanced_count(n, q), abs=1e-12)


def test_conditional_moments_vs_placement_brute_force():
    # exhaustive oracle over all n^{2K} edge placements
    n, q, k, beta = 4, 2, 2, 1.0
    cells = [(i, j) for i in range(n) for j in range(n)]
    balanced = [s for s in itertools.product(range(q), repeat=n) if s.count(0) == n // q]

    def z_tilde(J):
        total = 0.0
        for s in balanced:
            h = sum(J[i][j] * (s[i] == s[j]) for i in range(n) for j in range(n))
            total += math.exp(-beta * h)
        return total

    m1 = m2 = 0.0
    for placement in itertools.product(range(len(cells)), repeat=k):
        J = [[0] * n for _ in range(n)]
        for p in placement:
            i, j = cells[p]
            J[i][j] += 1
        z = z_tilde(J)
        m1 += z
        m2 += z * z
    m1 /= len(cells) ** k
    m2 /= len(cells) ** k
    first, second = conditional_moments_balanced(n, q, beta, k)
    assert first == pytest.approx(m1, abs=1e-12)
    assert second == pytest.approx(m2, abs=1e-12)
