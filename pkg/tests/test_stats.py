import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special
from scipy import stats as sps

from migrid.stats import (
    AnovaTable,
    betainc_regularized,
    bonferroni_alpha,
    f_tail,
    marginal_contrast,
    pairwise_rm_f,
    rm_anova_one_way,
    rm_anova_two_way,
)


def test_f_tail_examples():
    assert f_tail(0.0, 3, 7) == 1.0
    t = math.sqrt(12)
    assert f_tail(12.0, 1, 2) == pytest.approx(1 - t / math.sqrt(t * t + 2), abs=1e-12)
    assert f_tail(12.0, 1, 2) == pytest.approx(0.07418, abs=1e-4)
    assert f_tail(1.0, 1, 1) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(
    F=st.floats(0, 500, allow_nan=False),
    df1=st.integers(1, 150),
    df2=st.integers(1, 500),
)
def test_f_tail_matches_reference(F, df1, df2):
    assert f_tail(F, df1, df2) == pytest.approx(sps.f.sf(F, df1, df2), abs=1e-10)


@settings(max_examples=300, deadline=None)
@given(
    a=st.floats(0.05, 300),
    b=st.floats(0.05, 300),
    x=st.floats(0, 1),
)
def test_incomplete_beta_matches_reference(a, b, x):
    assert betainc_regularized(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)


@pytest.mark.parametrize("df1, df2", [(1, 1), (1, 108), (4, 20), (22, 2376), (88, 9504)])
def test_f_tail_decreasing(df1, df2):
    grid = np.linspace(0, 20, 400)
    tails = [f_tail(F, df1, df2) for F in grid]
    assert all(x >= y for x, y in zip(tails, tails[1:]))
    # strict wherever the tail is representably away from 0 and 1
    assert all(x > y for x, y in zip(tails, tails[1:]) if 1e-300 < y and x < 1 - 1e-15)


def test_f_tail_rejects_invalid_input():
    with pytest.raises(ValueError):
        f_tail(1.0, 0, 3)
    with pytest.raises(ValueError):
        f_tail(-1.0, 1, 3)
    with pytest.raises(ValueError):
        betainc_regularized(1.0, 1.0, 1.5)


def test_bonferroni_examples():
    assert bonferroni_alpha(0.05, 115) == 0.05 / 115
    assert f"{bonferroni_alpha(0.05, 115):.6f}" == "0.000435"
    assert bonferroni_alpha(0.05, 1) == 0.05
    assert bonferroni_alpha(0.04, 4) == pytest.approx(0.01, abs=1e-18)
    with pytest.raises(ValueError):
        bonferroni_alpha(1.5, 2)
    with pytest.raises(ValueError):
        bonferroni_alpha(0.05, 0)


def _hand_two_way(y):
    """Sum-of-squares partition written with scalar loops."""
    n, a, b = y.shape
    g = sum(y[s, i, j] for s in range(n) for i in range(a) for j in range(b)) / (n * a * b)

    def mean(s=None, i=None, j=None):
        cells = [
            y[ss, ii, jj]
            for ss in range(n)
            for ii in range(a)
            for jj in range(b)
            if (s is None or ss == s) and (i is None or ii == i) and (j is None or jj == j)
        ]
        return sum(cells) / len(cells)

    ss_total = sum((y[s, i, j] - g) ** 2 for s in range(n) for i in range(a) for j in range(b))
    ss_subj = a * b * sum((mean(s=s) - g) ** 2 for s in range(n))
    ss_a = n * b * sum((mean(i=i) - g) ** 2 for i in range(a))
    ss_b = n * a * sum((mean(j=j) - g) ** 2 for j in range(b))
    ss_ab_cells = n * sum((mean(i=i, j=j) - g) ** 2 for i in range(a) for j in range(b))
    ss_ab = ss_ab_cells - ss_a - ss_b
    ss_sa = b * sum((mean(s=s, i=i) - g) ** 2 for s in range(n) for i in range(a)) - ss_subj - ss_a
    ss_sb = a * sum((mean(s=s, j=j) - g) ** 2 for s in range(n) for j in range(b)) - ss_subj - ss_b
    ss_sab = ss_total - ss_subj - ss_a - ss_b - ss_ab - ss_sa - ss_sb
    dfa, dfb, dfn = a - 1, b - 1, n - 1
    return {
        "band": (ss_a / dfa) / (ss_sa / (dfa * dfn)),
        "window": (ss_b / dfb) / (ss_sb / (dfb * dfn)),
        "interaction": (ss_ab / (dfa * dfb)) / (ss_sab / (dfa * dfb * dfn)),
    }


WORKED_CUBE = np.array(
    [
        [[3.0, 5.0], [4.0, 8.0]],
        [[2.0, 6.0], [5.0, 6.0]],
        [[4.0, 4.0], [6.0, 9.0]],
    ]
)


def test_two_way_matches_hand_partition():
    table = rm_anova_two_way(WORKED_CUBE)
    expected = _hand_two_way(WORKED_CUBE)
    for name, F in expected.items():
        assert table[name].F == pytest.approx(F, abs=1e-9)
    assert table["band"].df_effect == 1 and table["band"].df_error == 2
    assert table["interaction"].df_error == 2


@settings(max_examples=15, deadline=None)
@given(
    n=st.integers(2, 6),
    a=st.integers(2, 4),
    b=st.integers(2, 4),
    seed=st.integers(0, 2**31),
)
def test_two_way_matches_reference_package(n, a, b, seed):
    pd = pytest.importorskip("pandas")
    AnovaRM = pytest.importorskip("statsmodels.stats.anova").AnovaRM
    cube = np.random.default_rng(seed).random((n, a, b))
    rows = [
        {"subject": s, "band": i, "window": j, "acc": cube[s, i, j]}
        for s, i, j in itertools.product(range(n), range(a), range(b))
    ]
    ref = AnovaRM(pd.DataFrame(rows), "acc", "subject", within=["band", "window"]).fit().anova_table
    ours = rm_anova_two_way(cube)
    for name, key in (("band", "band"), ("window", "window"), ("interaction", "band:window")):
        assert ours[name].F == pytest.approx(ref.loc[key, "F Value"], rel=1e-9)
        assert ours[name].df_effect == ref.loc[key, "Num DF"]
        assert ours[name].df_error == ref.loc[key, "Den DF"]
        assert ours[name].p == pytest.approx(ref.loc[key, "Pr > F"], abs=1e-10)


def test_constant_cube_has_no_effects():
    rng = np.random.default_rng(0)
    # subjects differ, but nothing varies across bands or windows
    cube = np.broadcast_to(rng.random(5)[:, None, None], (5, 4, 3)).copy()
    table = rm_anova_two_way(cube)
    assert isinstance(table, AnovaTable)
    for effect in table:
        assert effect.F == 0.0
        assert effect.p == 1.0


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 2**31))
def test_two_way_scale_invariance(scale, seed):
    cube = np.random.default_rng(seed).random((6, 4, 3))
    base = rm_anova_two_way(cube)
    scaled = rm_anova_two_way(cube * scale)
    for x, y in zip(base, scaled):
        assert y.F == pytest.approx(x.F, rel=1e-9)


def test_anova_input_errors():
    cube = np.random.default_rng(1).random((3, 2, 2))
    cube[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="missing"):
        rm_anova_two_way(cube)
    with pytest.raises(ValueError, match="2 subjects"):
        rm_anova_two_way(np.ones((1, 2, 2)))
    with pytest.raises(ValueError):
        rm_anova_two_way(np.ones((3, 2)))


@settings(max_examples=100, deadline=None)
@given(n=st.integers(3, 40), seed=st.integers(0, 2**31))
def test_two_level_anova_equals_paired_contrast(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.random(n)
    b = a + rng.normal(0.05, 0.1, n)
    one_way = rm_anova_one_way(np.c_[a, b])["condition"]
    pair = pairwise_rm_f(a, b)
    assert one_way.F == pytest.approx(pair.F, abs=1e-9, rel=1e-9)
    assert one_way.df_error == pair.df[1]
    t = sps.ttest_rel(a, b).statistic
    assert pair.F == pytest.approx(t * t, rel=1e-9)
    assert pair.p == pytest.approx(sps.ttest_rel(a, b).pvalue, abs=1e-10)


def test_paired_differences_one_two_three():
    res = pairwise_rm_f([1.0, 2.0, 3.0], [0.0, 0.0, 0.0], "x", "y")
    assert res.F == pytest.approx(12.0, abs=1e-12)
    assert res.df == (1, 2)
    assert res.p == pytest.approx(0.07418, abs=1e-4)
    assert (res.level_a, res.level_b) == ("x", "y")
    assert not res.degenerate
    assert res.mean_a == 2.0 and res.sd_a == 1.0


def test_degenerate_contrasts():
    same = pairwise_rm_f([0.5, 0.6, 0.7], [0.5, 0.6, 0.7])
    assert same.degenerate and same.p == 0.0 and math.isnan(same.F)
    shifted = pairwise_rm_f([0.5, 0.6, 0.7], [0.4, 0.5, 0.6])
    assert shifted.degenerate and shifted.p == 0.0 and shifted.F == math.inf


def test_pairwise_input_errors():
    with pytest.raises(ValueError):
        pairwise_rm_f([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        pairwise_rm_f([1.0], [2.0])


def test_marginal_contrast_averages_other_factor():
    cube = np.random.default_rng(2).random((8, 5, 4))
    res = marginal_contrast(cube, axis=2, i=1, j=3, levels=["w0", "w1", "w2", "w3"])
    direct = pairwise_rm_f(cube[:, :, 1].mean(axis=1), cube[:, :, 3].mean(axis=1))
    assert res.F == direct.F
    assert (res.level_a, res.level_b) == ("w1", "w3")
    band = marginal_contrast(cube, axis=1, i=0, j=4)
    assert band.F == pairwise_rm_f(cube[:, 0].mean(axis=1), cube[:, 4].mean(axis=1)).F
    with pytest.raises(ValueError):
        marginal_contrast(cube, axis=0, i=0, j=1)
