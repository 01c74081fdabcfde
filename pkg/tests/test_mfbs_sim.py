import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from core.errors import ConfigError, DomainError, FactorizationFailed
from core.field_model import DesignLaw
from core.mfbs_sim import (
    SimConfig, _cholesky_with_jitter, b_function, build_covariance_factor, c_norm, covariance_matrix,
    d_factor, extend_sample, generate_dataset, leading_theta, mfbs_covariance, resolve_threads,
    sample_sheets, sheet_stream, true_holder_constants, true_theta, true_variance,
)
from core.parametric import ConstantHurst, LinearHurst, power_deformation

unit_open = st.floats(0.01, 0.99)


def test_c_norm_known_values():
    assert c_norm(0.5) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-12)
    expected = math.sqrt(2 * math.pi / (gamma(1.5) * math.sin(math.pi / 4)))
    assert c_norm(0.25) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("x", [0.0, 1.0, -0.2, float("nan")])
def test_c_norm_rejects_values_outside_open_unit_interval(x):
    with pytest.raises(DomainError):
        c_norm(x)


def test_d_factor_diagonal_and_off_diagonal():
    assert d_factor(0.3, 0.3) == 0.5
    assert d_factor(0.3, 0.7) < 0.5


@given(unit_open, unit_open)
def test_d_factor_symmetric_and_at_most_half(x, y):
    assert d_factor(x, y) == d_factor(y, x)
    assert d_factor(x, y) <= 0.5 + 1e-12


@given(st.tuples(st.floats(0.5, 3.0), st.floats(0.5, 3.0)), st.tuples(st.floats(0.5, 3.0), st.floats(0.5, 3.0)))
def test_covariance_symmetric_exactly(u, v):
    eta1, eta2 = LinearHurst(0.2, 0.1, 0.0), ConstantHurst(0.6)
    assert mfbs_covariance(u, v, eta1, eta2) == mfbs_covariance(v, u, eta1, eta2)


def test_covariance_variance_at_unit_point():
    half = ConstantHurst(0.5)
    assert mfbs_covariance((1.0, 1.0), (1.0, 1.0), half, half) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        mfbs_covariance((0.0, 1.0), (1.0, 1.0), half, half)


def test_covariance_matrix_is_symmetric_psd(domain):
    pts = domain.grid(5, 5)
    sigma = covariance_matrix(pts, LinearHurst(0.3, 0.1), ConstantHurst(0.7))
    np.testing.assert_array_equal(sigma, sigma.T)
    assert np.linalg.eigvalsh(sigma).min() > -1e-10


def test_factor_reproduces_covariance(domain):
    pts = domain.grid(6, 6)
    eta1, eta2 = ConstantHurst(0.3), ConstantHurst(0.7)
    factor = build_covariance_factor(pts, eta1, eta2)
    sigma = covariance_matrix(pts, eta1, eta2)
    rebuilt = factor.lower_factor @ factor.lower_factor.T
    np.testing.assert_allclose(rebuilt, sigma, atol=1e-8 + factor.jitter_used)
    assert not factor.lower_factor.flags.writeable


def test_factorization_fails_after_jitter_ladder():
    with pytest.raises(FactorizationFailed):
        _cholesky_with_jitter(np.array([[-1.0]]), 1e-10)
    with pytest.raises(FactorizationFailed):
        _cholesky_with_jitter(np.array([[np.nan]]), 1e-10)


def test_sample_sheets_moments():
    pts = [(1.0, 1.0), (1.2, 1.5), (1.5, 1.2), (1.8, 1.8), (2.0, 1.1)]
    half = ConstantHurst(0.5)
    factor = build_covariance_factor(pts, half, half)
    draws = sample_sheets(factor, 5000, np.random.default_rng(7))
    sigma = covariance_matrix(pts, half, half)
    emp = np.cov(draws, rowvar=False)
    ok = (np.abs(emp - sigma) <= 0.1 * np.abs(sigma)) | (np.abs(emp - sigma) <= 0.02)
    assert ok.all()
    assert np.all(np.abs(draws.mean(axis=0)) <= 4 * np.sqrt(np.diag(sigma) / 5000))
    with pytest.raises(ConfigError):
        sample_sheets(factor, 0, np.random.default_rng(0))


def test_extend_sample_reproduces_observed_point():
    half = ConstantHurst(0.5)
    pts = np.array([(1.0, 1.0), (1.5, 1.5), (2.0, 1.2)])
    factor = build_covariance_factor(pts, half, half)
    values = np.array([0.3, -1.2, 0.8])
    out = extend_sample(factor, values, [(1.5, 1.5)], half, half, np.random.default_rng(1))
    assert out[0] == pytest.approx(-1.2, abs=1e-3)
    assert extend_sample(factor, values, np.zeros((0, 2)), half, half, np.random.default_rng(1)).size == 0


def test_sheet_stream_is_reproducible():
    a = sheet_stream(42, 3).standard_normal(4)
    b = sheet_stream(42, 3).standard_normal(4)
    c = sheet_stream(42, 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_resolve_threads():
    assert resolve_threads(0) >= 1
    assert resolve_threads(None) >= 1
    assert resolve_threads(3) == 3


def test_generate_dataset_common_design_shares_points(domain, make_field):
    ds = generate_dataset(SimConfig(make_field(), domain, n_sheets=4, seed=1))
    assert ds.n_sheets == 4
    assert all(s.points is ds.sheets[0].points for s in ds.sheets)
    assert ds.sheets[0].size == 100


def test_generate_dataset_is_reproducible_and_thread_independent(domain, make_field):
    field = make_field(sigma=0.1, design=DesignLaw("independent-uniform"), m=30)
    one = generate_dataset(SimConfig(field, domain, n_sheets=6, seed=9, threads=1))
    many = generate_dataset(SimConfig(field, domain, n_sheets=6, seed=9, threads=3))
    other = generate_dataset(SimConfig(field, domain, n_sheets=6, seed=10, threads=1))
    for a, b in zip(one.sheets, many.sheets):
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(one.sheets[0].values, other.sheets[0].values)
    assert all(domain.contains(s.points).all() for s in one.sheets)


def test_generate_dataset_rejects_invalid_field(domain, make_field):
    with pytest.raises(ConfigError, match="eta2"):
        generate_dataset(SimConfig(make_field(h2=1.0), domain, n_sheets=2))
    with pytest.raises(ConfigError):
        SimConfig(make_field(), domain, n_sheets=0)


def test_variance_at_unit_point(domain, make_field):
    field = make_field(design=DesignLaw("common-grid", fixed_points=[(1.0, 1.0), (1.5, 1.5)]))
    ds = generate_dataset(SimConfig(field, domain, n_sheets=20000, seed=3))
    values = ds.value_matrix()[:, 0]
    assert values.var() == pytest.approx(1.0, rel=0.1)


@pytest.mark.slow
def test_poisson_design_mean_sheet_size(domain, make_field):
    field = make_field(design=DesignLaw("independent-poisson"), m=50)
    ds = generate_dataset(SimConfig(field, domain, n_sheets=1000, seed=5, threads=0))
    assert ds.mean_points == pytest.approx(50, rel=0.1)


def test_theta_closed_form_for_identity(make_field):
    field = make_field()
    assert true_theta(field, (1.5, 1.5), (1.6, 1.5)) == pytest.approx(0.15, rel=1e-9)
    assert true_theta(field, (1.5, 1.5), (1.6, 1.5)) == pytest.approx(
        leading_theta(field, (1.5, 1.5), (1.6, 1.5)), rel=1e-9)


def test_holder_constants_of_power_deformation(make_field):
    field = make_field(h1=0.3, h2=0.7, deformation=power_deformation(power=(2.0, 1.0)))
    truth = true_holder_constants(field, (1.5, 1.2))
    assert truth.l1_1 == pytest.approx(1.2 ** 1.4 * 3.0 ** 0.6)
    assert truth.l2_2 == pytest.approx(2.25 ** 0.6)
    assert truth.l1_2 == 0.0 and truth.l2_1 == 0.0
    assert truth.variance == pytest.approx(2.25 ** 0.6 * 1.2 ** 1.4)


def test_true_variance_matches_covariance_diagonal(make_field):
    field = make_field(h1=0.3, h2=0.7, deformation=power_deformation(power=(2.0, 1.0)))
    points = np.array([[1.5, 1.2], [1.1, 1.9]])
    u = field.deformation.apply(points)
    expected = [mfbs_covariance(p, p, field.eta1, field.eta2) for p in u]
    assert true_variance(field, points) == pytest.approx(expected, rel=1e-9)


def test_b_function_on_diagonal(make_field):
    field = make_field(h1=0.3, h2=0.7)
    assert b_function(field, (1.4, 1.4), (1.4, 1.4)) == pytest.approx(0.5)
