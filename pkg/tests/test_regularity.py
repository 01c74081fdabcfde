import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from core.errors import BoundaryViolation, ConfigError
from core.field_model import DesignLaw
from core.mfbs_sim import SimConfig, generate_dataset, true_holder_constants
from core.regularity import (
    RegParams, RegularityEstimator, alpha_hat, axis_exponent_hat, d_hat_and_detect, default_delta,
    default_tau, estimate_regularity, estimate_regularity_grid, estimation_stencil, gamma_hat, gap_moments,
    h_low_hat, l1_hat, l2_hat, theta_hat, v_hat,
)


def two_term(delta, l1=2.0, h1=0.3, l2=3.0, h2=0.7):
    return l1 * delta ** (2 * h1) + l2 * delta ** (2 * h2)


# --- Scalar estimating equations ---

def test_h_low_recovers_pure_power_law():
    h, degenerate = h_low_hat(2 * 0.01 ** 0.7, 2 * 0.02 ** 0.7)
    assert not degenerate
    assert h == pytest.approx(0.35, abs=1e-12)


@given(st.floats(0.06, 0.99), st.floats(0.1, 10.0), st.floats(1e-3, 0.2))
def test_h_low_is_scale_free(h, k, delta):
    est, _ = h_low_hat(k * delta ** (2 * h), k * (2 * delta) ** (2 * h))
    assert est == pytest.approx(h, abs=1e-9)


def test_h_low_two_term_bias_is_upward():
    delta = 0.01
    h, _ = h_low_hat(delta ** 0.6 + delta ** 1.4, (2 * delta) ** 0.6 + (2 * delta) ** 1.4)
    expected = (math.log((2 * delta) ** 0.6 + (2 * delta) ** 1.4) - math.log(delta ** 0.6 + delta ** 1.4)) / math.log(4)
    assert h == pytest.approx(expected, abs=1e-12)
    assert 0.3 < h < 0.3 + 0.05


@pytest.mark.parametrize("gammas", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0), (float("nan"), 1.0)])
def test_h_low_nonpositive_inputs_flag_degenerate(gammas):
    assert h_low_hat(*gammas) == (1.0, True)


def test_h_low_is_clamped():
    assert h_low_hat(1.0, 0.5, beta_low=0.05) == (0.05, False)
    assert h_low_hat(1.0, 100.0) == (1.0, False)
    assert axis_exponent_hat(1.0, 4.0) == pytest.approx(1.0)


def test_alpha_two_term_oracle():
    delta = 0.01
    gamma = lambda d: d ** 0.6 + d ** 1.4
    alpha, tie = alpha_hat(gamma(delta), gamma(2 * delta), 0.3, delta)
    assert not tie
    assert alpha == pytest.approx(delta ** 0.8 * (2 ** 0.8 - 1), rel=1e-10)


def test_alpha_tie_is_degenerate():
    delta = 0.05
    assert alpha_hat(delta ** 0.8, (2 * delta) ** 0.8, 0.4, delta) == (1.0, True)
    with pytest.raises(ConfigError):
        alpha_hat(1.0, 1.0, 0.5, 0.0)


def test_d_hat_exact_power_law():
    c = 1.7
    d, aniso = d_hat_and_detect((c * 0.01 ** 0.8, False), (c * 0.02 ** 0.8, False), 0.1)
    assert d == pytest.approx(0.4, abs=1e-12)
    assert aniso


@pytest.mark.parametrize("alphas, expected", [
    (((1.0, True), (2.0, False)), (0.0, False)),
    (((2.0, False), (1.0, False)), (0.0, False)),
    (((0.0, False), (1.0, False)), (0.0, False)),
])
def test_d_hat_degenerate_paths(alphas, expected):
    assert d_hat_and_detect(*alphas, tau=0.1) == expected


def test_d_hat_below_threshold_is_not_anisotropic():
    d, aniso = d_hat_and_detect((0.01 ** 0.1, False), (0.02 ** 0.1, False), 0.1)
    assert d == pytest.approx(0.05, abs=1e-12)
    assert not aniso


def test_two_term_oracle_recovers_constants_and_gap():
    delta, l1, l2 = 0.01, 2.0, 3.0
    theta = {k: two_term(k * delta, l1=l1, l2=l2) for k in (1, 2, 4)}
    a_d = alpha_hat(theta[1], theta[2], 0.3, delta)
    a_2d = alpha_hat(theta[2], theta[4], 0.3, 2 * delta)
    d, aniso = d_hat_and_detect(a_d, a_2d, 0.1)
    assert d == pytest.approx(0.4, abs=1e-10)
    assert aniso
    big_l2 = l2_hat(theta[1], theta[2], 0.3, d, delta)
    assert big_l2 == pytest.approx(l2, rel=1e-10)
    big_l1 = l1_hat(theta[1], 0.3, delta, beta_high_L=1e6)
    assert big_l1 - big_l2 * delta ** (2 * d) == pytest.approx(l1, rel=1e-10)


def test_l_estimates_truncation_and_zero_gap():
    assert l1_hat(1.0, 0.5, 0.01, beta_high_L=100.0) == 100.0
    assert l1_hat(-1.0, 0.5, 0.01, beta_high_L=100.0) == 0.0
    assert l2_hat(1.0, 2.0, 0.5, 0.0, 0.01) == 0.0


# --- Helpers ---

def test_estimation_stencil_covers_every_offset():
    stencil = estimation_stencil([(1.5, 1.5)], 0.1)
    assert stencil.shape == (13, 2)
    rows = {tuple(np.round(p, 9)) for p in stencil}
    for point in [(1.5, 1.5), (1.3, 1.5), (1.7, 1.5), (1.5, 1.45), (1.5, 1.55), (1.6, 1.5)]:
        assert point in rows


def test_default_tau():
    assert default_tau(0.01) == pytest.approx(0.1)
    assert default_tau(1e-4) == 0.05


def test_default_delta_on_grid(domain, make_dataset):
    ds = make_dataset(domain.grid(20, 20), [np.zeros(400)])
    assert default_delta(ds) == pytest.approx(2.0 / 19.0, rel=1e-9)
    sparse = make_dataset([(1.5, 1.5)], [[0.0]])
    assert default_delta(sparse) == pytest.approx(1.0 / 50.0)


@pytest.mark.parametrize("kwargs", [
    dict(delta=0.0, tau=0.1),
    dict(delta=0.1, tau=1.0),
    dict(delta=0.1, tau=0.0),
    dict(delta=0.1, tau=0.1, beta_low=1.0),
    dict(delta=0.1, tau=0.1, beta_high_L=0.0),
    dict(delta=0.1, tau=0.1, v_floor=0.0),
])
def test_reg_params_validation(kwargs):
    with pytest.raises(ConfigError):
        RegParams(**kwargs)


# --- Estimators on data ---

def gradient_dataset(make_dataset, t, delta, slopes):
    """Sheets X_j(t) = c_j * t1 observed exactly on the estimation stencil"""
    pts = estimation_stencil([t], delta)
    return make_dataset(pts, [c * pts[:, 0] for c in slopes])


def test_linear_sheets_have_unit_exponent(make_dataset):
    t, delta = (1.5, 1.5), 0.05
    ds = gradient_dataset(make_dataset, t, delta, [1.0, -2.0, 0.5])
    est = estimate_regularity(ds, t, RegParams(delta=delta, tau=0.1))
    assert est.h_low == pytest.approx(1.0, abs=1e-6)
    assert est.l1[1] == 0.0
    assert est.theta_values[1] == (0.0, 0.0)
    assert est.low_axis == 1
    mean_sq = np.mean(np.array([1.0, -2.0, 0.5]) ** 2)
    assert est.theta_values[0][0] == pytest.approx(mean_sq * delta ** 2, rel=1e-8)
    assert est.v_hat == pytest.approx(mean_sq * 1.5 ** 2)


def test_estimate_is_consistent_with_scalar_equations(domain, make_field):
    t, delta = (1.5, 1.5), 0.05
    field = make_field(h1=0.4, h2=0.6, design=DesignLaw("common-grid", fixed_points=estimation_stencil([t], delta)))
    ds = generate_dataset(SimConfig(field, domain, n_sheets=50, seed=2))
    params = RegParams(delta=delta, tau=0.2)
    est = estimate_regularity(ds, t, params)

    assert est.gamma_values[0] == pytest.approx(gamma_hat(ds, t, delta))
    assert est.theta_values[0][1] == pytest.approx(theta_hat(ds, t, 2 * delta, 1))
    assert est.gamma_values[0] == pytest.approx(est.theta_values[0][0] + est.theta_values[1][0])
    assert est.h_high >= est.h_low
    assert est.anisotropic == (est.gap_statistic >= params.tau and est.gap_statistic > 0)
    if est.anisotropic:
        assert est.h_low == min(est.axis_h)
        assert est.h_high == pytest.approx(max(est.axis_h))
    else:
        assert est.h_low == h_low_hat(*est.gamma_values)[0]
        assert est.h_high == est.h_low
        assert est.l2 == (0.0, 0.0)
    assert {est.h1_hat, est.h2_hat} == {est.h_low, est.h_high}
    assert est.v_hat == pytest.approx(v_hat(ds, t, params.policy, params.v_floor))
    record = est.to_dict()
    assert record["t1"] == 1.5 and isinstance(record["degenerate_flags"], list)


def test_boundary_points_are_rejected(domain, make_dataset):
    ds = make_dataset(domain.grid(10, 10), [np.zeros(100)])
    with pytest.raises(BoundaryViolation, match="BoundaryViolation"):
        estimate_regularity(ds, (1.05, 1.5), RegParams(delta=0.05, tau=0.1))
    with pytest.raises(BoundaryViolation):
        theta_hat(ds, (1.5, 1.95), 0.05, 2)


def test_zero_sheets_flag_degenerate_paths(domain, make_dataset):
    ds = make_dataset(domain.grid(11, 11), [np.zeros(121), np.zeros(121)])
    est = estimate_regularity(ds, (1.5, 1.5), RegParams(delta=0.1, tau=0.1))
    assert "gamma_nonpositive" in est.degenerate_flags
    assert "dhat_zero" in est.degenerate_flags
    assert est.h_low == 1.0 and not est.anisotropic
    assert est.v_hat == 1e-6


def test_axis_rejected(make_dataset, domain):
    ds = make_dataset(domain.grid(5, 5), [np.zeros(25)])
    with pytest.raises(ConfigError):
        RegularityEstimator(ds).theta((1.5, 1.5), 0.1, 3)


def test_grid_estimates_keep_input_order(domain, make_field):
    delta = 0.05
    points = domain.interior_lattice(3, 3 * delta)
    field = make_field(design=DesignLaw("common-grid", fixed_points=estimation_stencil(points, delta)))
    ds = generate_dataset(SimConfig(field, domain, n_sheets=20, seed=4))
    params = RegParams(delta=delta, tau=0.2)
    serial = estimate_regularity_grid(ds, points, params, threads=1)
    parallel = estimate_regularity_grid(ds, points, params, threads=4)
    assert [e.t for e in serial] == [tuple(p) for p in points]
    assert [e.h_low for e in serial] == [e.h_low for e in parallel]


def test_theta_matches_closed_form(domain, make_field):
    t, delta = (1.5, 1.5), 0.1
    field = make_field(design=DesignLaw("common-grid", fixed_points=estimation_stencil([t], delta)))
    ds = generate_dataset(SimConfig(field, domain, n_sheets=20000, seed=11))
    assert theta_hat(ds, t, delta, 1) == pytest.approx(1.5 * 0.1, rel=0.05)
    assert gamma_hat(ds, t, delta) == pytest.approx(2 * 1.5 * 0.1, rel=0.05)


@pytest.mark.slow
def test_isotropic_exponent_concentrates(domain, make_field):
    delta = 0.05
    points = domain.interior_lattice(7, 3 * delta)
    field = make_field(design=DesignLaw("common-grid", fixed_points=estimation_stencil(points, delta)))
    ds = generate_dataset(SimConfig(field, domain, n_sheets=500, seed=21))
    estimates = estimate_regularity_grid(ds, points, RegParams(delta=delta, tau=0.1), threads=0)
    assert np.mean([e.h_low for e in estimates]) == pytest.approx(0.5, abs=0.05)


# --- Gap statistic ---

def test_gap_moments_read_the_axis_excess():
    delta = 0.02
    (m1, deg1), (m2, deg2) = gap_moments(3.0 * delta ** 1.4, 3.0 * (2 * delta) ** 1.4, 0.3, delta)
    assert not deg1 and not deg2
    assert m1 == pytest.approx(3.0 * delta ** 0.8)
    d, aniso = d_hat_and_detect((m1, deg1), (m2, deg2), 0.1)
    assert d == pytest.approx(0.4, abs=1e-12)
    assert aniso
    assert gap_moments(0.0, 1.0, 0.5, delta)[0] == (0.0, True)
    with pytest.raises(ConfigError):
        gap_moments(1.0, 1.0, 0.5, 0.0)


def cusp_dataset(make_dataset, t, delta, h1, h2):
    """Sheets +/-(|t1-t01|^h1 sign + |t2-t02|^h2 sign): exact power-law increments per axis"""
    pts = estimation_stencil([t], delta)
    d1, d2 = pts[:, 0] - t[0], pts[:, 1] - t[1]
    shape = np.sign(d1) * np.abs(d1) ** h1 + np.sign(d2) * np.abs(d2) ** h2
    return make_dataset(pts, [shape, -shape])


def test_exact_anisotropic_increments_are_detected(make_dataset):
    t, delta = (1.5, 1.5), 0.05
    est = estimate_regularity(cusp_dataset(make_dataset, t, delta, 0.3, 0.7), t, RegParams(delta=delta, tau=0.1))
    assert est.anisotropic
    assert est.low_axis == 1
    assert est.h_low == pytest.approx(0.3, abs=1e-9)
    assert est.h_high == pytest.approx(0.7, abs=1e-9)
    assert (est.h1_hat, est.h2_hat) == (est.h_low, est.h_high)
    assert est.d_hat == pytest.approx(0.4, abs=1e-9)
    assert est.gap_statistic == pytest.approx(0.7 - h_low_hat(*est.gamma_values)[0], abs=1e-9)
    assert est.l1[0] == pytest.approx(4.0 * 2.0 ** -0.6, rel=1e-9)
    assert est.l2[1] == pytest.approx(4.0 * 2.0 ** -1.4, rel=1e-9)
    assert est.l1[1] == pytest.approx(0.0, abs=1e-9)
    assert est.l2[0] == pytest.approx(0.0, abs=1e-9)
    assert est.to_dict()["gap_statistic"] == est.gap_statistic


def test_exact_anisotropic_increments_on_the_second_axis(make_dataset):
    t, delta = (1.5, 1.5), 0.05
    est = estimate_regularity(cusp_dataset(make_dataset, t, delta, 0.7, 0.3), t, RegParams(delta=delta, tau=0.1))
    assert est.anisotropic and est.low_axis == 2
    assert (est.h1_hat, est.h2_hat) == (pytest.approx(0.7, abs=1e-9), pytest.approx(0.3, abs=1e-9))


def test_exact_isotropic_increments_are_not_flagged(make_dataset):
    t, delta = (1.5, 1.5), 0.05
    est = estimate_regularity(cusp_dataset(make_dataset, t, delta, 0.5, 0.5), t, RegParams(delta=delta, tau=0.1))
    assert not est.anisotropic
    assert est.gap_statistic == pytest.approx(0.0, abs=1e-9)
    assert est.h_low == est.h_high == pytest.approx(0.5, abs=1e-9)
    assert est.l2 == (0.0, 0.0)


def lattice_estimates(domain, make_field, h1, h2, n_sheets, seed, n=5, delta=0.05, tau=0.1):
    points = domain.interior_lattice(n, 3 * delta)
    field = make_field(h1=h1, h2=h2, design=DesignLaw("common-grid", fixed_points=estimation_stencil(points, delta)))
    ds = generate_dataset(SimConfig(field, domain, n_sheets=n_sheets, seed=seed))
    return field, estimate_regularity_grid(ds, points, RegParams(delta=delta, tau=tau), threads=0)


@pytest.mark.slow
def test_anisotropy_is_detected_and_high_exponent_recovered(domain, make_field):
    _, estimates = lattice_estimates(domain, make_field, 0.3, 0.7, n_sheets=500, seed=31)
    assert np.mean([e.anisotropic for e in estimates]) >= 0.9
    assert np.mean([e.h_high for e in estimates]) == pytest.approx(0.7, abs=0.15)
    assert np.mean([e.h_low for e in estimates]) == pytest.approx(0.3, abs=0.1)


@pytest.mark.slow
def test_isotropic_false_alarm_rate(domain, make_field):
    _, estimates = lattice_estimates(domain, make_field, 0.5, 0.5, n_sheets=500, seed=32, n=7)
    assert np.mean([e.anisotropic for e in estimates]) <= 0.1


@pytest.mark.slow
def test_rough_axis_constant_within_twenty_percent(domain, make_field):
    field, estimates = lattice_estimates(domain, make_field, 0.3, 0.7, n_sheets=2000, seed=33)
    ratios = [e.l1[0] / true_holder_constants(field, e.t).l1_1
              for e in estimates if e.anisotropic and e.low_axis == 1]
    assert len(ratios) >= 20
    assert np.median(ratios) == pytest.approx(1.0, abs=0.2)
