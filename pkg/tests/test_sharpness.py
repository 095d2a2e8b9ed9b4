import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiolab.field import Grid, SampledField, forward_ft
from fiolab.sharpness import (RadialProfile, SharpnessError, build_counterexample, evaluate_T,
                              g_profiles, h3_closed_form, h3_numeric, h_profiles,
                              leading_coefficient, lp_truncated_growth, radial_ft, tail_fit)


@pytest.fixture(scope="module")
def spectrum():
    return build_counterexample(1)


def test_counterexample_spectrum(spectrum):
    g0, fhat0 = spectrum
    assert fhat0 == 1.0
    assert g0(3.0) == 0.0 and g0(0.4) == 1.0


def test_counterexample_spectrum_is_smooth(spectrum):
    g0, _ = spectrum
    h = 1e-2
    s = np.arange(0.0, 2.5, h)
    v = g0(s)
    for order in range(1, 5):
        v = np.diff(v) / h
        assert np.all(np.isfinite(v)) and np.max(np.abs(v)) < 10.0 ** (order + 1)


def test_without_phase_the_tail_is_tiny(spectrum):
    g0, _ = spectrum
    v = evaluate_T(1, g0, np.array([50.0]), phase=False)
    assert abs(v[0]) <= 1e-6


def test_modulus_is_radial():
    g0, _ = build_counterexample(2)
    ang = np.linspace(0, 2 * np.pi, 7)
    pts = 60.0 * np.stack([np.cos(ang), np.sin(ang)], -1)
    v = evaluate_T(2, g0, pts, method="polar")
    assert np.max(np.abs(np.abs(v) - np.abs(v[0]))) <= 1e-10 * abs(v[0])


def test_polar_and_radial_methods_agree():
    g0, _ = build_counterexample(2)
    x = np.array([5.0, 20.0, 60.0])
    a = evaluate_T(2, g0, x, method="polar")
    b = evaluate_T(2, g0, x, method="radial")
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(b))


def test_quadrature_refinement_is_stable(spectrum):
    g0, _ = spectrum
    x = np.geomspace(1, 400, 40)
    a, b = evaluate_T(1, g0, x), evaluate_T(1, g0, x, refine=2)
    assert np.max(np.abs(a - b)) <= 1e-8


def test_evaluate_errors(spectrum):
    g0, _ = spectrum
    with pytest.raises(SharpnessError):
        evaluate_T(1, RadialProfile(lambda r: np.exp(-r)), np.array([1.0]))
    with pytest.raises(SharpnessError):
        evaluate_T(2, g0, np.array([1.0]), method="direct")
    with pytest.raises(SharpnessError):
        evaluate_T(1, g0, np.array([1.0]), method="nope")


def test_one_dimensional_tail(spectrum):
    g0, fhat0 = spectrum
    x = np.geomspace(50, 400, 60)
    fit = tail_fit(1, x, evaluate_T(1, g0, x), fhat0)
    target = fhat0 / (np.pi * 1j)
    assert leading_coefficient(1, fhat0) == pytest.approx(target)
    assert np.max(np.abs(x ** 2 * evaluate_T(1, g0, x) - target)) / abs(target) <= 0.05
    assert fit["max_rel_dev"] <= 0.05


def test_two_dimensional_tail():
    g0, fhat0 = build_counterexample(2)
    x = np.geomspace(50, 400, 40)
    fit = tail_fit(2, x, evaluate_T(2, g0, x), fhat0)
    assert abs(fit["exponent"] + 3) <= 0.1
    assert fit["coef_rel_err"] <= 0.10


def test_tail_fit_rejects_short_range(spectrum):
    with pytest.raises(SharpnessError):
        tail_fit(1, np.array([10.0, 60.0]), np.array([1.0, 1.0]))
    with pytest.raises(SharpnessError):
        tail_fit(1, np.array([60.0, 70.0]), np.array([0.0, 1.0]))


@pytest.mark.parametrize("n", [1, 2])
def test_derivative_identity_for_the_radial_transform(n):
    g0, _ = build_counterexample(n)
    r = np.geomspace(5, 100, 25)
    lhs = radial_ft(g_profiles(g0)["g4"], n, r).values
    rhs = -radial_ft(h_profiles(n)["h0"], n + 2, r).values / (2 * np.pi)
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) <= 1e-4


@pytest.mark.parametrize("n", [1, 2])
def test_inverse_power_transform(n):
    r = np.geomspace(10, 100, 15)
    num = h3_numeric(n, r)
    assert np.max(np.abs(num - h3_closed_form(n, r)) / np.abs(h3_closed_form(n, r))) <= 0.01


def test_radial_gaussian_matches_the_grid_transform():
    grid = Grid(2, 128, 24.0)
    f = SampledField.from_function(grid, lambda x, y: np.exp(-(x * x + y * y) / 2))
    fh = forward_ft(f)
    r = grid.dual_norm()
    sel = (r > 0) & (r < 4)
    prof = RadialProfile(lambda s: np.exp(-s * s / 2), support=14.0)
    vals = radial_ft(prof, 2, r[sel]).values
    assert np.max(np.abs(vals - fh.values[sel]) / np.abs(fh.values[sel])) <= 1e-6
    assert np.max(np.abs(vals - 2 * np.pi * np.exp(-r[sel] ** 2 / 2))) <= 1e-6


def test_g_decomposition_is_consistent():
    g0, _ = build_counterexample(1)
    gp = g_profiles(g0)
    r = np.geomspace(1, 400, 30)
    for n in (1, 2):
        v = {k: radial_ft(p, n, r).values for k, p in gp.items()}
        assert np.max(np.abs(v["g1"] - v["g2"] - v["g3"] - v["g4"])) <= 1e-8 * np.max(np.abs(v["g1"]))


def test_smooth_compact_part_decays_fast():
    g0, _ = build_counterexample(1)
    g3 = g_profiles(g0)["g3"]
    for n in (1, 2):
        r = np.geomspace(10, 400, 30)
        w = np.abs(radial_ft(g3, n, r).values) * r ** 6
        assert np.max(w[r >= 200]) <= 1e-2 * np.max(w)


def test_second_part_has_the_log_profile():
    g0, _ = build_counterexample(1)
    g2 = g_profiles(g0)["g2"]
    r = np.geomspace(50, 400, 20)
    for n in (1, 2):
        w = np.abs(radial_ft(g2, n, r).values) * r ** (n + 3) / (1 + np.log(r))
        assert np.max(w) <= 300


def test_growth_classes_in_one_dimension():
    R = [100, 200, 400, 800, 1600, 3200]
    crit = lp_truncated_growth(1, 0.5, R)
    assert crit["classification"] == "log-linear" and crit["corr_logR"] >= 0.999
    above = lp_truncated_growth(1, 0.6, R)
    assert above["classification"] == "convergent"
    assert all(b < a for a, b in zip(above["increments"], above["increments"][1:]))
    one = lp_truncated_growth(1, 1.0, R)
    inc = np.array(one["increments"])
    # increments over doubling R halve, so the total stays below I(R_max) + last increment
    assert np.all(inc[1:] / inc[:-1] <= 0.55)


@settings(max_examples=20, deadline=None)
@given(c=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False), n=st.integers(1, 3))
def test_leading_coefficient_is_linear_in_the_mean(c, n):
    assert leading_coefficient(n, c) == pytest.approx(c * leading_coefficient(n, 1.0), rel=1e-12)
