import numpy as np
import pytest
from scipy.ndimage import binary_erosion

from fluxct.enhance import EnhancedStack, enhance_pipeline, hounsfield, weight_hu, weighted_sum
from fluxct.errors import DataError
from fluxct.physics import Material, linear_attenuation
from fluxct.recon import ImageGrid, Semantics
from fluxct.spectrum_quant import EnergyInterval, IntervalSet


def pam_of(values):
    return ImageGrid(np.asarray(values, dtype=float), 0.05)


def test_hounsfield_anchors():
    mu_w = 0.1937
    hu = hounsfield(pam_of([[mu_w, 0.0, 2 * mu_w]]), mu_w)
    assert hu.semantics is Semantics.HOUNSFIELD
    assert hu.data.tolist() == [[0.0, -1000.0, 1000.0]]


def test_hounsfield_errors():
    with pytest.raises(DataError):
        hounsfield(pam_of([[0.1]]), 0.0)
    hu = hounsfield(pam_of([[0.1]]), 0.2)
    with pytest.raises(DataError):
        hounsfield(hu, 0.2)


def test_weight_hu_examples():
    hu = hounsfield(pam_of([[0.04, 0.3]]), 0.2)
    assert np.array_equal(weight_hu(hu, 1.0).data, hu.data)
    assert np.all(weight_hu(hu, 0.0).data == 0)
    assert weight_hu(hu, 0.25).data[0, 0] == pytest.approx(-200.0)
    assert weight_hu(hu, 0.25).semantics is Semantics.WEIGHTED_HOUNSFIELD
    with pytest.raises(DataError):
        weight_hu(hu, 1.5)


def test_single_interval_at_70_equals_conventional(water, rng):
    pam = pam_of(rng.uniform(0, 0.4, (8, 8)))
    ivs = IntervalSet((EnergyInterval(60, 80, 70.0, weight_q=1.0),))
    st = enhance_pipeline(pam, ivs, water)
    assert np.array_equal(st.per_interval_weighted[0].data, st.conventional.data)


def test_pipeline_requires_energies_and_weights(water):
    pam = pam_of(np.ones((4, 4)) * 0.2)
    with pytest.raises(DataError):
        enhance_pipeline(pam, IntervalSet((EnergyInterval(60, 80, weight_q=1.0),)), water)


def test_stack_invariants(poly_stack_128, water):
    _, _, pam, st = poly_stack_128
    assert isinstance(st, EnhancedStack)
    assert len(st.per_interval_hu) == len(st.intervals) == 11
    for iv, hu, whu in zip(st.intervals, st.per_interval_hu, st.per_interval_weighted):
        assert np.array_equal(whu.data, iv.weight_q * hu.data)
        assert iv.mu_w == float(linear_attenuation(water, iv.effective_energy))


def test_water_region_near_zero_at_70(poly_stack_128):
    phantom, _, _, st = poly_stack_128
    water = binary_erosion(phantom.mask(Material.WATER), iterations=4)
    i70 = st.intervals.effective_energies.index(70.0)
    assert abs(st.per_interval_hu[i70].data[water].mean()) < 80


def test_mean_hu_increases_with_energy(poly_stack_128):
    _, _, pam, st = poly_stack_128
    means = [hu.data.mean() for hu in st.per_interval_hu]
    assert all(b > a for a, b in zip(means, means[1:]))
    # per-pixel recomputation of the means
    for iv, m in zip(st.intervals, means):
        assert m == pytest.approx(((pam.data - iv.mu_w) / iv.mu_w * 1000).mean(), rel=1e-12)


def test_affine_relation_between_intervals(poly_stack_128):
    _, _, _, st = poly_stack_128
    ivs = st.intervals
    for i, j in [(0, 10), (3, 6), (6, 7)]:
        a = ivs[i].mu_w / ivs[j].mu_w
        b = 1000 * (a - 1)
        hu_i, hu_j = st.per_interval_hu[i].data, st.per_interval_hu[j].data
        assert np.allclose(hu_j, a * hu_i + b, rtol=1e-9, atol=1e-9 * np.abs(hu_j).max())


def test_water_anchoring():
    mu = 0.2059
    pam = pam_of([[mu, mu * 1.5], [mu, 0.1]])
    hu = hounsfield(pam, mu)
    assert hu.data[0, 0] == 0.0 and hu.data[1, 0] == 0.0


def test_weighted_sum_decomposition(poly_stack_128, rng):
    _, _, pam, st = poly_stack_128
    total = weighted_sum(st)
    rows = rng.integers(0, pam.shape[0], 100)
    cols = rng.integers(0, pam.shape[1], 100)
    for r, c in zip(rows, cols):
        mu = pam.data[r, c]
        expected = 1000 * sum(iv.weight_q * (mu / iv.mu_w - 1) for iv in st.intervals)
        assert total[r, c] == pytest.approx(expected, rel=1e-9, abs=1e-9)
