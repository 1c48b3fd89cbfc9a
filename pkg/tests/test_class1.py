import math
from itertools import combinations

import numpy as np
import pytest
from scipy.stats import norm

from catsafe.class1 import class1_test, gene_permutation_test
from catsafe.globalstat import AvgDiff, FisherCount, PearsonDiffProp, WilcoxonRankSum
from catsafe.model import InputError, UpperTail


def fisher_vector(m, m_c, r):
    """Local statistics putting the first r genes in the rejection region and
    the first m_c genes in the category."""
    t = np.zeros(m)
    t[:r] = 2.0
    return t, np.arange(m_c)


def test_fisher_exact_worked_example():
    # m=10, m_c=4, R=5: category contains genes 0..3, rejected are 0..4
    t, cat = fisher_vector(10, 4, 5)
    res = class1_test(t, cat, FisherCount(UpperTail(1.0)))
    assert res.u_obs == 4
    assert res.p == pytest.approx(6 / 252, abs=1e-12)
    assert res.method == "FisherExact"


def test_fisher_exact_enumeration_oracle():
    # exhaustive enumeration over gene lists of size R
    m, m_c, r = 9, 3, 4
    t, cat = fisher_vector(m, m_c, r)
    res = class1_test(t, cat, FisherCount(UpperTail(1.0)))
    catset = set(range(m_c))
    hits = 0
    total = 0
    for genelist in combinations(range(m), r):
        total += 1
        if len(catset & set(genelist)) >= res.u_obs:
            hits += 1
    assert res.p == pytest.approx(hits / total, abs=1e-12)


def test_fisher_r_zero_gives_p_one_with_flag():
    res = class1_test(np.zeros(8), [0, 1, 2], FisherCount(UpperTail(1.0)))
    assert res.p == 1.0 and res.degenerate


def test_pearson_z_tail():
    t, cat = fisher_vector(40, 10, 8)
    res = class1_test(t, cat, PearsonDiffProp(UpperTail(1.0)))
    assert res.method == "PearsonZ"
    assert res.p == pytest.approx(float(norm.sf(res.u_obs)), abs=1e-14)


def test_avgdiff_t_tail_df_m_minus_2():
    from scipy.stats import t as t_dist

    rng = np.random.default_rng(0)
    t = rng.standard_normal(20)
    res = class1_test(t, np.arange(6), AvgDiff())
    assert res.p == pytest.approx(float(t_dist.sf(res.u_obs, df=18)), abs=1e-14)


def test_wilcoxon_normal_worked_example():
    # m=4, m_c=2, U_W=5 is the null mean -> z=0, p=0.5 (force normal path)
    t = np.array([0.5, 2.0, 1.0, 1.5])
    res = class1_test(t, [0, 1], WilcoxonRankSum(), exact_limit=2)
    assert res.u_obs == 5.0
    assert res.method == "WilcoxonNormal"
    assert res.p == pytest.approx(0.5, abs=1e-12)


def test_wilcoxon_exact_worked_example():
    t = np.array([0.5, 2.0, 1.0, 1.5])
    res = class1_test(t, [1, 3], WilcoxonRankSum())  # ranks 4 and 3 -> U_W = 7
    assert res.method == "WilcoxonExact"
    assert res.p == pytest.approx(1 / 6, abs=1e-12)


def test_wilcoxon_ties_fall_back_to_normal_with_correction():
    t = np.array([1.0, 1.0, 2.0, 3.0, 0.5])
    res = class1_test(t, [0, 2], WilcoxonRankSum())
    assert res.method == "WilcoxonNormal"
    assert 0 < res.p <= 1


def test_wilcoxon_normal_continuity_flag_raises_p():
    t = np.array([0.5, 2.0, 1.0, 1.5, 0.1, 3.0])
    plain = class1_test(t, [1, 5], WilcoxonRankSum(), exact_limit=2)
    corrected = class1_test(t, [1, 5], WilcoxonRankSum(), exact_limit=2, continuity=True)
    assert corrected.p > plain.p


def test_gene_permutation_exhaustive_equals_exact_wilcoxon():
    rng = np.random.default_rng(5)
    t = rng.standard_normal(8)
    for m_c in (2, 3, 4):
        cat = rng.choice(8, size=m_c, replace=False)
        exact = class1_test(t, cat, WilcoxonRankSum())
        perm = gene_permutation_test(t, cat, WilcoxonRankSum(), exhaustive=True)
        assert exact.method == "WilcoxonExact"
        assert perm.p == pytest.approx(exact.p, abs=1e-12)


def test_gene_permutation_exhaustive_equals_fisher_exact():
    t, cat = fisher_vector(9, 3, 4)
    kind = FisherCount(UpperTail(1.0))
    exact = class1_test(t, cat, kind)
    perm = gene_permutation_test(t, cat, kind, exhaustive=True)
    assert perm.p == pytest.approx(exact.p, abs=1e-12)


def test_gene_permutation_counting_rule():
    # u_obs is the top rank sum; a single resample below it gives p = 1/2
    t = np.array([1.0, 2.0, 5.0, 6.0])
    res = gene_permutation_test(t, [2, 3], WilcoxonRankSum(), B=1, seed=123)
    assert res.p in (0.5, 1.0)  # (1+0)/2 unless the draw reproduces the top subset
    res_many = gene_permutation_test(t, [2, 3], WilcoxonRankSum(), B=200, seed=1)
    assert res_many.p == pytest.approx(1 / 6, abs=0.08)


def test_gene_permutation_deterministic_per_seed():
    rng = np.random.default_rng(9)
    t = rng.standard_normal(30)
    cat = np.arange(6)
    a = gene_permutation_test(t, cat, WilcoxonRankSum(), B=99, seed=4, name="X")
    b = gene_permutation_test(t, cat, WilcoxonRankSum(), B=99, seed=4, name="X")
    c = gene_permutation_test(t, cat, WilcoxonRankSum(), B=99, seed=5, name="X")
    assert a.p == b.p
    assert a.p != c.p or a.u_obs == c.u_obs  # different seed, likely different p


def test_gene_permutation_enumeration_cap():
    t = np.zeros(40)
    with pytest.raises(InputError, match="cap"):
        gene_permutation_test(t, np.arange(20), AvgDiff(), exhaustive=True,
                              enumeration_cap=1000)


def test_class1_uniform_under_iid_normals():
    # pooled Class 1 Wilcoxon p-values under truly i.i.d. local statistics
    rng = np.random.default_rng(77)
    m, m_c, nrep = 60, 8, 4000
    hits_10 = 0
    hits_01 = 0
    cat = np.arange(m_c)
    for _ in range(nrep):
        t = rng.standard_normal(m)
        p = class1_test(t, cat, WilcoxonRankSum()).p
        hits_10 += p <= 0.10
        hits_01 += p <= 0.01
    for alpha, hits in ((0.10, hits_10), (0.01, hits_01)):
        se = math.sqrt(alpha * (1 - alpha) / nrep)
        # discreteness of the exact distribution makes realized size <= alpha
        assert hits / nrep <= alpha + 3 * se
        assert hits / nrep >= alpha - 3 * se - 2.0 / (m_c * (m - m_c))


def test_class1_anticonservative_under_block_correlation():
    # equicorrelated category inflates the rank-sum variance: realized size
    # must exceed alpha (direction check)
    rng = np.random.default_rng(123)
    m, m_c, rho, nrep, alpha = 40, 10, 0.5, 3000, 0.05
    corr = np.eye(m)
    corr[:m_c, :m_c] = rho
    np.fill_diagonal(corr, 1.0)
    L = np.linalg.cholesky(corr)
    cat = np.arange(m_c)
    hits = 0
    for _ in range(nrep):
        t = L @ rng.standard_normal(m)
        hits += class1_test(t, cat, WilcoxonRankSum()).p <= alpha
    realized = hits / nrep
    assert realized > 1.5 * alpha
