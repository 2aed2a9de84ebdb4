import itertools

import numpy as np
import pytest
from scipy import stats

from vqapython import (
    DegenerateInput, DimensionError, srocc, pearson_lcc, rmse, logistic, fit_logistic,
    evaluate, wilcoxon_rank_sum, significance_matrix,
)


def midranks(values):
    values = list(values)
    ranks = []
    for v in values:
        below = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        ranks.append(below + (equal + 1) / 2.)
    return ranks

def brute_pearson(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    dx, dy = x - x.mean(), y - y.mean()
    return float(np.sum(dx * dy) / np.sqrt(np.sum(dx * dx) * np.sum(dy * dy)))


def test_srocc_examples():
    assert srocc([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]) == pytest.approx(1.)
    assert srocc([1, 2, 3, 4, 5], [5, 4, 3, 2, 1]) == pytest.approx(-1.)
    assert srocc([1, 2, 3, 4, 5], [1, 2, 3, 5, 4]) == pytest.approx(.9)
    assert srocc([1, 2, 3], [10, 200, 3000]) == pytest.approx(1.)

    with pytest.raises(DegenerateInput):
        srocc([1, 1, 1], [1, 2, 3])
    with pytest.raises(DimensionError):
        srocc([1, 2, 3], [1, 2])

def test_srocc_ties(rng):
    for _ in range(50):
        n = int(rng.integers(3, 15))
        x = rng.integers(0, 4, size=n)
        y = rng.integers(0, 4, size=n)
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        expected = brute_pearson(midranks(x), midranks(y))
        assert srocc(x, y) == pytest.approx(expected, abs=1e-12)

@pytest.mark.slow
def test_srocc_brute_force(rng):
    for _ in range(1000):
        n = int(rng.integers(3, 51))
        levels = int(rng.integers(2, n + 2))
        x = rng.integers(0, levels, size=n).astype(np.float64)
        y = rng.integers(0, levels, size=n).astype(np.float64)
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        expected = brute_pearson(midranks(x), midranks(y))
        assert srocc(x, y) == pytest.approx(expected, abs=1e-12)

def test_lcc_brute_force(rng):
    for _ in range(200):
        n = int(rng.integers(3, 51))
        x = rng.normal(0., 10., size=n)
        y = .5 * x + rng.normal(0., 5., size=n)
        assert pearson_lcc(x, y) == pytest.approx(brute_pearson(x, y), abs=1e-12)
        assert pearson_lcc(x, y) == pytest.approx(stats.pearsonr(x, y)[0], abs=1e-12)

def test_lcc_rmse():
    assert pearson_lcc([1, 2, 3], [1, 2, 4]) == pytest.approx(.98198, abs=1e-5)
    assert rmse([0., 0.], [5., 0.]) == pytest.approx(3.53553, abs=1e-5)
    assert rmse([1., 2.], [1., 2.]) == 0.
    with pytest.raises(DegenerateInput):
        pearson_lcc([1, 2, 3], [4, 4, 4])

def test_logistic_recovery():
    x = np.linspace(0., 100., 50)
    y = logistic(x, 95., 5., 50., 10.)
    fit = fit_logistic(x, y)
    assert fit.converged
    assert fit.linear is None
    for got, want in zip((fit.beta1, fit.beta2, fit.beta3, fit.beta4), (95., 5., 50., 10.)):
        assert got == pytest.approx(want, rel=.01)
    assert np.allclose(fit.apply(x), y, atol=1e-4)

def test_logistic_identity():
    x = np.linspace(0., 100., 50)
    result = evaluate(x, x)
    assert result.srocc == pytest.approx(1.)
    assert result.lcc == pytest.approx(1., abs=1e-9)
    assert result.rmse <= 1e-6

    fit = fit_logistic(x, x)
    assert np.sqrt(np.mean((fit.apply(x) - x) ** 2)) <= 1e-6
    grid = np.linspace(0., 100., 1000)
    assert np.all(np.diff(fit.apply(grid)) >= 0.)

def test_logistic_properties(rng):
    for _ in range(20):
        x = rng.uniform(0., 1., size=40)
        y = 100. * x ** 3 + rng.normal(0., 8., size=40)
        fit = fit_logistic(x, y)
        grid = np.linspace(-.5, 1.5, 200)
        assert np.all(np.diff(fit.apply(grid)) >= -1e-9)
        assert pearson_lcc(fit.apply(x), y) >= pearson_lcc(x, y) - 1e-12

def test_logistic_errors():
    with pytest.raises(DimensionError):
        fit_logistic([1., 2., 3., 4.], [1., 2., 3., 4.])
    with pytest.raises(DegenerateInput):
        fit_logistic([2.] * 6, [1., 2., 3., 4., 5., 6.])

def test_evaluate():
    mos = [1., 2., 3., 4., 5.]
    result = evaluate([3.] * 5, mos)
    assert (result.srocc, result.lcc) == (0., 0.)
    assert result.rmse == pytest.approx(np.std(mos))

    small = evaluate([1., 2., 3.], [2., 4., 7.])
    assert small.srocc == pytest.approx(1.)
    assert small.lcc == pytest.approx(pearson_lcc([1., 2., 3.], [2., 4., 7.]))

    x = np.linspace(0., 1., 25)
    result = evaluate(x, 50. * x + 10.)
    assert result.as_dict()['srocc'] == pytest.approx(1.)
    assert result.lcc == pytest.approx(1., abs=1e-6)

def test_rank_sum_separated():
    res = wilcoxon_rank_sum([1, 2, 3, 4], [5, 6, 7, 8])
    assert res.exact
    assert res.u_statistic == 0.
    assert res.p_less == pytest.approx(1. / 70.)
    assert res.p_greater == 1.

    swapped = wilcoxon_rank_sum([5, 6, 7, 8], [1, 2, 3, 4])
    assert swapped.p_greater == res.p_less
    assert swapped.p_less == res.p_greater

    with pytest.raises(DimensionError):
        wilcoxon_rank_sum([], [1.])

def test_rank_sum_swap_symmetry(rng):
    for _ in range(20):
        a = rng.normal(size=int(rng.integers(2, 8)))
        b = rng.normal(.5, size=int(rng.integers(2, 8)))
        ab, ba = wilcoxon_rank_sum(a, b), wilcoxon_rank_sum(b, a)
        assert ab.p_greater == pytest.approx(ba.p_less)
        assert ab.p_less == pytest.approx(ba.p_greater)

def test_rank_sum_exact_matches_scipy(rng):
    for na, nb in [(3, 4), (5, 6), (8, 8), (2, 9)]:
        a = rng.normal(size=na)
        b = rng.normal(.3, size=nb)
        res = wilcoxon_rank_sum(a, b)
        assert res.exact
        less = stats.mannwhitneyu(a, b, alternative='less', method='exact')
        greater = stats.mannwhitneyu(a, b, alternative='greater', method='exact')
        assert res.u_statistic == pytest.approx(less.statistic)
        assert res.p_less == pytest.approx(less.pvalue)
        assert res.p_greater == pytest.approx(greater.pvalue)

def test_rank_sum_exact_ties():
    a, b = [1, 2, 2], [2, 3, 3]
    ranks = stats.rankdata(a + b)
    w = sum(ranks[:3])
    sums = [sum(ranks[list(c)]) for c in itertools.combinations(range(6), 3)]
    res = wilcoxon_rank_sum(a, b)
    assert res.p_less == pytest.approx(sum(1 for s in sums if s <= w) / len(sums))
    assert res.p_greater == pytest.approx(sum(1 for s in sums if s >= w) / len(sums))

def test_rank_sum_approximation(rng):
    for na in range(5, 8):
        for nb in range(5, 8):
            if na + nb > 12:
                continue
            for _ in range(10):
                a = rng.normal(size=na)
                b = rng.normal(size=nb)
                exact = wilcoxon_rank_sum(a, b, exact=True)
                approx = wilcoxon_rank_sum(a, b, exact=False)
                assert not approx.exact
                assert abs(exact.p_less - approx.p_less) <= .02
                assert abs(exact.p_greater - approx.p_greater) <= .02

def test_rank_sum_large_samples(rng):
    a = rng.normal(size=50)
    b = rng.normal(.4, size=50)
    res = wilcoxon_rank_sum(a, b)
    assert not res.exact
    ref = stats.mannwhitneyu(a, b, alternative='less', method='exact')
    assert res.p_less == pytest.approx(ref.pvalue, abs=.005)

def test_significance_matrix(rng):
    dists = {
        'low': rng.normal(.5, .02, size=20),
        'mid': rng.normal(.7, .02, size=20),
        'high': rng.normal(.9, .02, size=20),
        'same': rng.normal(.9, .02, size=20),
    }
    sm = significance_matrix(dists)
    assert sm.names == ('low', 'mid', 'high', 'same')
    assert np.all(np.diag(sm.matrix) == 0)
    assert np.array_equal(sm.matrix, -sm.matrix.T)
    assert sm.entry('high', 'low') == 1
    assert sm.entry('low', 'mid') == -1
    assert sm.entry('mid', 'same') == -1

    with pytest.raises(DimensionError):
        significance_matrix({'a': [1., 2., 3.], 'b': [1., 2.]})

def test_significance_alpha_inclusive():
    dists = {'a': [5., 6., 7., 8.], 'b': [1., 2., 3., 4.]}
    assert significance_matrix(dists, alpha=1. / 70.).entry('a', 'b') == 1
    assert significance_matrix(dists, alpha=.01).entry('a', 'b') == 0

def test_significance_csv(tmp_path):
    sm = significance_matrix({'a': [5., 6., 7., 8.], 'b': [1., 2., 3., 4.]}, metric='lcc')
    filename = tmp_path / 'sig.csv'
    sm.write_csv(filename)
    assert filename.read_text().splitlines() == ['lcc,a,b', 'a,0,1', 'b,-1,0']
