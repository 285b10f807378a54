import math

import numpy as np
import pytest

from fluxct.complexity.stats import (
    binned_correlation,
    digitize_scott,
    generative_complexity,
    lowess,
    nonconstructability,
    pearson,
    scott_bins,
    scott_histogram,
    spearman,
)
from fluxct.errors import DataError, NumericError
from fluxct.recon import ImageGrid, Semantics


def standardised(x, sd=1.0):
    x = np.asarray(x, dtype=float)
    return (x - x.mean()) / x.std(ddof=1) * sd


def test_scott_unit_sigma_n1000(rng):
    s = standardised(rng.normal(size=1000))
    h, k = scott_bins(s)
    assert h == pytest.approx(0.35, rel=1e-12)
    assert k == math.ceil(np.ptp(s) / 0.35)


def test_scott_sigma2_n8():
    s = standardised(np.arange(8.0), sd=2.0)
    h, _ = scott_bins(s)
    assert h == pytest.approx(3.5, rel=1e-12)


def test_scott_formula_oracle(rng):
    s = rng.random(10**4)
    h, k = scott_bins(s)
    sigma = math.sqrt(sum((v - s.mean()) ** 2 for v in s) / (s.size - 1))
    assert h == pytest.approx(3.5 * sigma / s.size ** (1 / 3), abs=1e-12)
    assert k == math.ceil((s.max() - s.min()) / h)


def test_scott_constant_rejected():
    with pytest.raises(NumericError):
        scott_bins(np.ones(10))


def test_scott_histogram_totals(rng):
    s = rng.normal(size=5000)
    hist = scott_histogram(s)
    assert hist.counts.sum() == s.size
    assert np.all(np.diff(hist.edges) > 0)
    idx = digitize_scott(s)
    assert np.array_equal(np.bincount(idx, minlength=hist.counts.size), hist.counts)


def test_pearson_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert pearson(x, x) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    # hand: deviations (-1,0,1) and (-7/3,-1/3,8/3); r = 5 / sqrt(2 * 114/9)
    assert pearson([1, 2, 3], [2, 4, 7]) == pytest.approx(5 / math.sqrt(2 * 114 / 9), rel=1e-12)
    with pytest.raises(NumericError):
        pearson([1, 1, 1], [1, 2, 3])


def test_spearman_examples():
    x = np.arange(10.0)
    assert spearman(x, x**3) == pytest.approx(1.0)
    assert spearman(x, -np.exp(x)) == pytest.approx(-1.0)
    # midranks x -> (1, 2.5, 2.5, 4); r = 4.5 / sqrt(4.5 * 5)
    assert spearman([1, 2, 2, 3], [1, 3, 2, 4]) == pytest.approx(4.5 / math.sqrt(22.5), rel=1e-12)


def test_affine_and_monotone_invariance(rng):
    x, y = rng.normal(size=200), rng.normal(size=200)
    base = pearson(x, y)
    assert pearson(3 * x + 2, 0.5 * y - 7) == pytest.approx(base, abs=1e-12)
    assert spearman(np.exp(x), y**3) == pytest.approx(spearman(x, y), abs=1e-12)


def _img(a, sem=Semantics.HOUNSFIELD):
    return ImageGrid(np.asarray(a, dtype=float), 0.1, sem)


def test_d_and_g(rng):
    cct = _img(rng.normal(size=(16, 16)))
    assert nonconstructability(cct, cct) == pytest.approx(1.0)
    hu = _img(cct.data * 1.3 - 20 + rng.normal(scale=0.3, size=(16, 16)))
    d = nonconstructability(hu, cct)
    for q in (1.0, 0.37, 1e-6):
        g = generative_complexity(_img(q * hu.data, Semantics.WEIGHTED_HOUNSFIELD), cct)
        assert g == pytest.approx(d, abs=1e-9)
    with pytest.raises(DataError):
        nonconstructability(_img(np.ones((2, 3))), cct)


def test_binned_correlation_shapes(rng):
    a = rng.normal(size=(32, 32))
    b = a + rng.normal(scale=0.5, size=a.shape)
    centres, values = binned_correlation(a, b)
    assert centres.size == values.size > 0
    assert np.all(np.abs(values) <= 1)


def test_lowess_reproduces_line():
    x = np.linspace(0, 10, 40)
    y = 3 * x - 2
    assert np.allclose(lowess(x, y, 0.3), y, atol=1e-9)


def test_lowess_symmetry():
    x = np.linspace(-5, 5, 21)
    y = x**2
    fit = lowess(x, y, 1.0)
    assert np.allclose(fit, fit[::-1], atol=1e-9)


def test_lowess_denoises(rng):
    x = np.sort(rng.uniform(0, 2 * np.pi, 300))
    clean = np.sin(x)
    noisy = clean + rng.normal(scale=0.3, size=x.size)
    fit = lowess(x, noisy, 0.2)
    assert np.sqrt(np.mean((fit - clean) ** 2)) < np.sqrt(np.mean((noisy - clean) ** 2))


def test_lowess_preconditions():
    with pytest.raises(DataError):
        lowess([1, 2], [1, 2])
    with pytest.raises(DataError):
        lowess([1, 2, 3], [1, 2, 3], frac=0)
