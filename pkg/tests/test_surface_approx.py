import numpy as np
import pytest

from core.errors import ConfigError, EmptyDataset, EmptySheet
from core.field_model import Sheet, SurfaceDataset
from core.surface_approx import ApproxPolicy, SurfaceApproximator, approx_value, default_pilot_bandwidth

NEAREST = ApproxPolicy()


def test_observed_point_returns_its_value():
    sheet = Sheet(0, [(1.1, 1.1), (1.5, 1.5), (1.9, 1.2)], [4.0, -2.0, 7.5])
    assert approx_value(sheet, (1.5, 1.5), NEAREST) == -2.0
    assert approx_value(sheet, (1.85, 1.25), NEAREST) == 7.5


def test_equidistant_points_resolve_to_lowest_index():
    first = Sheet(0, [(1.0, 1.0), (2.0, 1.0)], [10.0, 20.0])
    swapped = Sheet(0, [(2.0, 1.0), (1.0, 1.0)], [20.0, 10.0])
    assert approx_value(first, (1.5, 1.0), NEAREST) == 10.0
    assert approx_value(swapped, (1.5, 1.0), NEAREST) == 20.0


def test_pilot_average_over_window():
    sheet = Sheet(0, [(1.5, 1.5), (1.52, 1.48), (1.49, 1.53), (1.9, 1.9)], [1.0, 2.0, 3.0, 100.0])
    policy = ApproxPolicy("pilot-local-average", pilot_bandwidth=0.05)
    assert approx_value(sheet, (1.5, 1.5), policy) == pytest.approx(2.0)


def test_pilot_falls_back_to_nearest_on_empty_window():
    sheet = Sheet(0, [(1.1, 1.1), (1.9, 1.9)], [1.0, 2.0])
    policy = ApproxPolicy("pilot-local-average", pilot_bandwidth=0.01)
    assert approx_value(sheet, (1.8, 1.8), policy) == 2.0


def test_pilot_default_bandwidth_needs_domain(domain):
    sheet = Sheet(0, [(1.5, 1.5)], [3.0])
    policy = ApproxPolicy("pilot-local-average")
    with pytest.raises(ConfigError):
        approx_value(sheet, (1.5, 1.5), policy)
    assert approx_value(sheet, (1.5, 1.5), policy, domain) == 3.0


def test_default_pilot_bandwidth(domain):
    assert default_pilot_bandwidth(domain, 1000) == pytest.approx(0.1)
    assert default_pilot_bandwidth(domain, 0) == 1.0


def test_policy_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        ApproxPolicy("kriging")
    with pytest.raises(ConfigError):
        ApproxPolicy("pilot-local-average", pilot_bandwidth=0.0)


@pytest.mark.parametrize("policy", [NEAREST, ApproxPolicy("pilot-local-average", 0.15)])
def test_approximator_matches_single_sheet_rule(domain, policy):
    rng = np.random.default_rng(0)
    shared = domain.grid(8, 8)
    shared.flags.writeable = False
    common = SurfaceDataset(tuple(Sheet(j, shared, rng.standard_normal(64)) for j in range(3)), domain)
    scattered = SurfaceDataset(tuple(
        Sheet(j, rng.uniform(1, 2, (40, 2)), rng.standard_normal(40)) for j in range(3)), domain)
    for ds in (common, scattered):
        approx = SurfaceApproximator(ds, policy)
        for t in [(1.3, 1.7), (1.5, 1.5), (1.01, 1.99)]:
            expected = [approx_value(s, t, policy, domain) for s in ds.sheets]
            np.testing.assert_allclose(approx.values_at(t), expected)


def test_approximator_rejects_empty_input(domain):
    with pytest.raises(EmptyDataset):
        SurfaceApproximator(SurfaceDataset((), domain), NEAREST)
    with pytest.raises(EmptySheet):
        SurfaceApproximator(SurfaceDataset((Sheet(0, np.zeros((0, 2)), []),), domain), NEAREST)
    with pytest.raises(EmptySheet):
        approx_value(Sheet(0, np.zeros((0, 2)), []), (1.5, 1.5), NEAREST)
