import numpy as np
import pytest

from secure_inference.measurement import (
    MeasurementSpec, Parameter, measure, measure_all, sample_parameter, sector_selector_spec, snr_db,
)
from secure_inference.rng import NoiseStream
from secure_inference.topology import is_globally_observable


def test_sample_parameter_default_bounds():
    p = sample_parameter(9, 0.0, 160.0, 3)
    assert ((p.theta >= 0) & (p.theta <= 160)).all()
    assert p.eta == pytest.approx(480.0)


def test_sample_parameter_degenerate_and_deterministic():
    np.testing.assert_array_equal(sample_parameter(4, 7.0, 7.0, 0).theta, np.full(4, 7.0))
    np.testing.assert_array_equal(sample_parameter(9, 0, 160, 5).theta, sample_parameter(9, 0, 160, 5).theta)


def test_parameter_energy_bound_enforced():
    with pytest.raises(ValueError):
        Parameter(np.array([3.0, 4.0]), 4.9)


def test_sector_selector_rows():
    spec = sector_selector_spec(9, [4, 0])
    np.testing.assert_array_equal(spec.h_list[0], np.eye(9)[[4]])


def test_sector_coverage_and_observability():
    spec = sector_selector_spec(9, [0] * 5)
    assert not is_globally_observable(spec.h_list)
    spec = sector_selector_spec(9, list(range(9)) + [3, 3])
    assert is_globally_observable(spec.h_list)


def test_noiseless_measurement_is_exact():
    spec = sector_selector_spec(9, [2, 5], noise_var=0.0)
    theta = Parameter(np.arange(9.0), 100.0)
    assert measure(spec, theta, 1, 7, NoiseStream(1)).value == pytest.approx([5.0])


def test_noise_statistics_match_configured_variance():
    # 3 sigma / sqrt(1e5) ~ 0.03 on the mean; chi-square(1e5) keeps the variance within +-0.5
    spec = sector_selector_spec(1, [0], noise_var=10.0)
    theta = Parameter(np.array([80.0]), 80.0)
    stream = NoiseStream(2024)
    y = np.array([measure(spec, theta, 0, t, stream).value[0] for t in range(100_000)])
    assert abs(y.mean() - 80.0) < 0.1
    assert 9.5 <= y.var() <= 10.5


def test_noise_determined_by_seed_node_time():
    spec = MeasurementSpec([np.eye(2), np.eye(2)], [np.eye(2), 2 * np.eye(2)])
    theta = Parameter(np.zeros(2), 1.0)
    a = measure(spec, theta, 1, 42, NoiseStream(9)).value
    b = measure(spec, theta, 1, 42, NoiseStream(9)).value
    np.testing.assert_array_equal(a, b)
    stacked = measure_all(spec, theta.theta, 42, NoiseStream(9))
    np.testing.assert_array_equal(stacked[2:4], a)


def test_correlated_covariance_sampled():
    cov = np.array([[2.0, 1.2], [1.2, 1.0]])
    spec = MeasurementSpec([np.eye(2)], [cov])
    stream = NoiseStream(5)
    y = np.array([measure(spec, Parameter(np.zeros(2), 0.0), 0, t, stream).value for t in range(40_000)])
    np.testing.assert_allclose(np.cov(y.T), cov, atol=0.06)


def test_covariance_validation():
    with pytest.raises(ValueError):
        MeasurementSpec([np.eye(2)], [np.array([[1.0, 2.0], [2.0, 1.0]])])
    with pytest.raises(ValueError):
        MeasurementSpec([np.eye(2)], [np.array([[1.0, 0.0], [0.5, 1.0]])])


def test_snr_conventions():
    spec = sector_selector_spec(1, [0], noise_var=10.0)
    theta = np.array([80.0])
    assert snr_db(spec, theta, "power")[0] == pytest.approx(10 * np.log10(640))
    assert snr_db(spec, theta, "amplitude")[0] == pytest.approx(10 * np.log10(80 / np.sqrt(10)))


def test_network_snr_averages_ratios():
    from secure_inference.measurement import network_snr_db

    spec = sector_selector_spec(2, [0, 1], noise_var=10.0)
    theta = np.array([10.0, 40.0]) * np.sqrt(10.0)
    assert network_snr_db(spec, theta) == pytest.approx(10 * np.log10(25.0))
