import numpy as np
import pytest

from catsafe.globalstat import (
    AvgDiff,
    FisherCount,
    PearsonDiffProp,
    WilcoxonRankSum,
    compute_global,
    tie_group_sizes,
    wilcoxon_iid_moments,
)
from catsafe.model import InputError, TopR, TwoSided, UpperTail


def test_fisher_count_worked_example():
    t = np.array([2.0, 1.0, 3.0, 0.5])
    r = compute_global(t, [0, 2], FisherCount(UpperTail(1.66)))
    assert r.value == 2.0
    assert r.aux["R"] == 2


def test_wilcoxon_rank_sum_worked_example():
    t = np.array([0.5, 2.0, 1.0, 1.5])
    r = compute_global(t, [0, 1], WilcoxonRankSum())
    assert r.value == 5.0  # ranks 1 and 4


def test_wilcoxon_midranks_on_ties():
    r = compute_global(np.array([1.0, 1.0, 2.0]), [0], WilcoxonRankSum())
    assert r.value == 1.5
    assert r.aux["ties"] == 1


def test_avgdiff_zero_when_means_equal():
    t = np.array([1.0, 2.0, 1.0, 2.0])
    r = compute_global(t, [0, 1], AvgDiff())
    assert r.value == 0.0
    assert not r.degenerate


def test_avgdiff_degenerate_when_all_equal():
    r = compute_global(np.full(5, 3.0), [0, 1], AvgDiff())
    assert r.value == 0.0
    assert r.degenerate


def test_pearson_zero_when_proportions_equal():
    t = np.array([2.0, 0.0, 2.0, 0.0])
    r = compute_global(t, [0, 1], PearsonDiffProp(UpperTail(1.0)))
    assert r.value == 0.0


def test_pearson_degenerate_when_r_zero_or_m():
    t = np.zeros(4)
    r = compute_global(t, [0, 1], PearsonDiffProp(UpperTail(1.0)))
    assert r.degenerate and r.value == 0.0
    t = np.full(4, 5.0)
    r = compute_global(t, [0, 1], PearsonDiffProp(UpperTail(1.0)))
    assert r.degenerate


def test_wilcoxon_monotone_transform_invariance():
    rng = np.random.default_rng(0)
    t = rng.standard_normal(30)
    cat = [2, 5, 11, 17]
    base = compute_global(t, cat, WilcoxonRankSum()).value
    for f in (np.exp, np.tanh, lambda v: v**3 + 2 * v):
        assert compute_global(f(t), cat, WilcoxonRankSum()).value == base


def test_wilcoxon_complement_identity():
    rng = np.random.default_rng(1)
    t = rng.standard_normal(17)
    cat = np.array([0, 3, 9])
    comp = np.setdiff1d(np.arange(17), cat)
    uw_c = compute_global(t, cat, WilcoxonRankSum()).value
    uw_cb = compute_global(t, comp, WilcoxonRankSum()).value
    assert uw_c + uw_cb == pytest.approx(17 * 18 / 2)


def test_fisher_complement_identity_and_bounds():
    rng = np.random.default_rng(2)
    t = rng.standard_normal(25)
    region = UpperTail(0.4)
    cat = np.arange(8)
    comp = np.arange(8, 25)
    rc = compute_global(t, cat, FisherCount(region))
    rb = compute_global(t, comp, FisherCount(region))
    assert rc.value + rb.value == rc.aux["R"]
    assert 0 <= rc.value <= min(8, rc.aux["R"])


def test_swap_negates_avgdiff_and_pearson():
    rng = np.random.default_rng(3)
    t = rng.standard_normal(12)
    cat = np.array([1, 4, 6, 7])
    comp = np.setdiff1d(np.arange(12), cat)
    d1 = compute_global(t, cat, AvgDiff()).value
    d2 = compute_global(t, comp, AvgDiff()).value
    assert d1 == pytest.approx(-d2, abs=1e-12)
    kind = PearsonDiffProp(UpperTail(0.0))
    p1 = compute_global(t, cat, kind).value
    p2 = compute_global(t, comp, kind).value
    assert p1 == pytest.approx(-p2, abs=1e-12)


def test_two_sided_and_top_r_regions():
    t = np.array([-3.0, 0.1, 2.0, -0.2])
    r = compute_global(t, [0, 1], FisherCount(TwoSided(1.5)))
    assert r.value == 1.0 and r.aux["R"] == 2
    r = compute_global(t, [0, 1], FisherCount(TopR(2)))
    assert r.aux["R"] == 2
    assert r.warnings  # data-dependent region carries a caveat


def test_absolute_wilcoxon_option():
    t = np.array([-5.0, 1.0, 2.0, 0.5])
    plain = compute_global(t, [0], WilcoxonRankSum()).value
    absr = compute_global(t, [0], WilcoxonRankSum(absolute=True)).value
    assert plain == 1.0 and absr == 4.0


def test_category_validation():
    t = np.zeros(4)
    with pytest.raises(InputError):
        compute_global(t, [], AvgDiff())
    with pytest.raises(InputError):
        compute_global(t, [0, 1, 2, 3], AvgDiff())
    with pytest.raises(InputError):
        compute_global(t, [7], AvgDiff())


def test_pearson_unpooled_se_flag():
    t = np.array([2.0, 2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0])
    cat = [0, 1, 2]
    pooled = compute_global(t, cat, PearsonDiffProp(UpperTail(1.0)))
    unpooled = compute_global(t, cat, PearsonDiffProp(UpperTail(1.0), pooled_se=False))
    # same proportions, different standard errors
    assert pooled.aux["pi_c"] == unpooled.aux["pi_c"]
    assert pooled.aux["se"] != unpooled.aux["se"]
    pi_c, pi_cb = 2 / 3, 1 / 5
    se = np.sqrt(pi_c * (1 - pi_c) / 3 + pi_cb * (1 - pi_cb) / 5)
    assert unpooled.value == pytest.approx((pi_c - pi_cb) / se, abs=1e-12)


def test_iid_moments_and_tie_correction():
    mean, var = wilcoxon_iid_moments(4, 2)
    assert mean == 5.0 and var == pytest.approx(5.0 / 3.0)
    # fully tied vector has zero variance
    sizes = tie_group_sizes(np.ones(6))
    _, var = wilcoxon_iid_moments(6, 2, sizes)
    assert var == pytest.approx(0.0)
