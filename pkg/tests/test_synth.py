import numpy as np
import pytest

from tmcda.synth import generate_synthetic_network, label_coefficients


def test_same_seed_bit_identical():
    a = generate_synthetic_network(7, 5, 1.0, 16)
    b = generate_synthetic_network(7, 5, 1.0, 16)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.labels, b.labels)
    assert list(a.intersection_ids) == list(b.intersection_ids)


def test_different_seed_differs():
    a = generate_synthetic_network(7, 5, 1.0, 16)
    b = generate_synthetic_network(8, 5, 1.0, 16)
    assert not np.array_equal(a.labels, b.labels)


def test_zero_shift_identical_coefficients():
    coef = label_coefficients(seed=3, n_intersections=6, shift_strength=0.0)
    for k in range(1, 6):
        assert np.array_equal(coef.weights[k], coef.weights[0])
        assert np.array_equal(coef.intercepts[k], coef.intercepts[0])
        assert np.array_equal(coef.interactions[k], coef.interactions[0])
    assert np.all(coef.log_busy == 0.0)


def test_coefficient_drift_linear_in_shift():
    c1 = label_coefficients(seed=9, n_intersections=4, shift_strength=0.5)
    c2 = label_coefficients(seed=9, n_intersections=4, shift_strength=1.5)
    base = label_coefficients(seed=9, n_intersections=4, shift_strength=0.0)
    drift1 = c1.weights / base.weights - 1.0
    drift2 = c2.weights / base.weights - 1.0
    assert np.allclose(drift2, 3.0 * drift1, rtol=1e-12)
    assert np.allclose(c2.log_busy, 3.0 * c1.log_busy, rtol=1e-12)
    assert np.allclose(c2.intercepts - base.intercepts,
                       3.0 * (c1.intercepts - base.intercepts), rtol=1e-12)


def test_zero_shift_label_means_agree_within_sampling_noise():
    # Counts are a Poisson mixture; per-intersection means concentrate at a
    # common value as n grows, tolerance from the pooled count variance.
    data = generate_synthetic_network(seed=1, n_intersections=4, shift_strength=0.0,
                                      n_intervals=1600)
    labels = data.labels.astype(float)
    overall = labels.mean(axis=0)
    pooled_sd = labels.std(axis=0)
    n_per = 1600
    for inter in data.intersections():
        mask = np.array([str(s) == inter for s in data.intersection_ids])
        gap = np.abs(labels[mask].mean(axis=0) - overall)
        assert np.all(gap < 6.0 * pooled_sd / np.sqrt(n_per)), (inter, gap)


def test_acceptance_scale_dataset_well_formed():
    data = generate_synthetic_network(seed=7, n_intersections=5, shift_strength=1.0,
                                      n_intervals=64)
    assert data.n == 5 * 64
    assert len(data.intersections()) == 5
    assert data.labels.min() >= 0
    for inst_idx in (0, data.n - 1):
        data.instance(inst_idx).validate(data.schema)


def test_preconditions():
    with pytest.raises(ValueError):
        generate_synthetic_network(0, 1, 1.0, 8)
    with pytest.raises(ValueError):
        generate_synthetic_network(0, 3, -0.5, 8)
    with pytest.raises(ValueError):
        generate_synthetic_network(0, 3, 1.0, 0)
