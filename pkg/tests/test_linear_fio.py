import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiolab.cutoffs import sss_directions
from fiolab.field import Grid, Rep, SampledField, forward_ft, translate
from fiolab.linear_fio import (FIOError, LinearAmplitude, apply_fio, check_homogeneity, delta_region,
                               half_wave, linear_phase, low_freq_kernel, oscillation_guard, rk_apply,
                               rk_multiplier, rs_H, seminorms, split_low_high, sss_full_kernel,
                               sss_kernel, zero_phase)
from fiolab.spaces import bmo_global, calibrate_constant, lp_norm, truncated_log


def smooth(grid, seed):
    rng = np.random.default_rng(seed)
    spec = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    spec *= np.exp(-grid.dual_norm() ** 2 / 8)
    return SampledField(grid, Rep.SPACE, np.fft.ifftn(np.fft.ifftshift(spec)) * grid.M)


# --- phases ----------------------------------------------------------------------

def test_standard_phases_are_homogeneous():
    assert check_homogeneity(half_wave(), 2) <= 1e-12
    assert check_homogeneity(linear_phase([1.0, -2.0]), 2) <= 1e-12
    assert check_homogeneity(zero_phase(), 3) == 0


def test_phase_vanishes_at_origin():
    assert half_wave()(np.zeros((1, 2)))[0] == 0.0
    neg = half_wave().negated()
    assert neg(np.array([[3.0, 4.0]]))[0] == -5.0


def test_seminorms_are_finite():
    rep = seminorms(LinearAmplitude.japanese(-0.5), half_wave(), 2)
    assert np.isfinite(rep.M_sum) and np.isfinite(rep.N_sum)
    assert rep.to_dict()["orders"] == [0, 1, 2]


# --- application -------------------------------------------------------------------

def test_identity_operator():
    grid = Grid(2, 32, 8.0)
    f = smooth(grid, 0)
    g = apply_fio(LinearAmplitude.constant(), zero_phase(), f)
    assert np.max(np.abs(g.values - f.values)) <= 1e-12 * np.max(np.abs(f.values))


def test_linear_phase_translates():
    grid = Grid(1, 64, 8.0)
    f = smooth(grid, 1)
    e = 5 * grid.spacing
    g = apply_fio(LinearAmplitude.constant(), linear_phase([e]), f)
    assert np.max(np.abs(g.values - translate(f, -e).values)) <= 1e-12 * np.max(np.abs(f.values))


@pytest.mark.parametrize("n", [1, 2])
def test_multiplier_and_direct_paths_agree(n):
    grid = Grid(n, 32 if n == 1 else 16, 8.0)
    f = smooth(grid, 2)
    a = LinearAmplitude.japanese(-0.5)
    g1 = apply_fio(a, half_wave(), f, method="multiplier")
    g2 = apply_fio(a, half_wave(), f, method="direct")
    assert np.max(np.abs(g1.values - g2.values)) <= 1e-10 * np.max(np.abs(g1.values))


def test_x_dependent_amplitude_at_points():
    grid = Grid(1, 64, 16.0)
    f = smooth(grid, 3)
    a = LinearAmplitude(lambda x, xi: (1 + 0.1 * np.cos(x[..., 0])) * np.ones(xi.shape[:-1]), 0.0,
                        x_independent=False)
    x = np.array([[0.0], [1.0], [-2.0]])
    out = apply_fio(a, zero_phase(), f, x_points=x)
    base = apply_fio(LinearAmplitude.constant(), zero_phase(), f, x_points=x)
    assert np.allclose(out, (1 + 0.1 * np.cos(x[:, 0])) * base, atol=1e-12)
    with pytest.raises(FIOError):
        apply_fio(a, zero_phase(), f, method="multiplier")


def test_oscillation_guard():
    grid = Grid(1, 64, 8.0)
    assert oscillation_guard(np.array([[0.5]]), grid) < np.pi / 4
    with pytest.raises(FIOError):
        oscillation_guard(np.array([[100.0]]), grid)
    assert oscillation_guard(np.array([[100.0]]), grid, override=True) > np.pi / 4


def test_nan_amplitude_is_rejected():
    grid = Grid(1, 16, 4.0)
    bad = LinearAmplitude(lambda xi: np.full(xi.shape[:-1], np.nan), 0.0)
    with pytest.raises(FIOError):
        apply_fio(bad, zero_phase(), smooth(grid, 0))
    with pytest.raises(FIOError):
        apply_fio(LinearAmplitude.constant(), zero_phase(), forward_ft(smooth(grid, 0)))


def test_adjoint_symmetry():
    grid = Grid(2, 32, 8.0)
    f, g = smooth(grid, 4), smooth(grid, 5)
    a = LinearAmplitude(lambda xi: (1 + np.sum(xi * xi, -1)) ** -0.25 * (1 + 0.3j), -0.5)
    abar = LinearAmplitude(lambda xi: np.conj(a.func(xi)), -0.5)
    lhs = np.vdot(g.values, apply_fio(a, half_wave(), f).values)
    rhs = np.vdot(apply_fio(abar, half_wave().negated(), g).values, f.values)
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_unimodular_operator_does_not_grow_l2():
    grid = Grid(2, 32, 16.0)
    for s in range(5):
        f = smooth(grid, s)
        g = apply_fio(LinearAmplitude.japanese(0.0), half_wave(), f)
        assert lp_norm(g, 2) <= lp_norm(f, 2) * (1 + 1e-12)


# --- low/high split and kernels -------------------------------------------------

def test_split_reconstructs_and_has_the_right_supports():
    a = LinearAmplitude.japanese(-1.0)
    low, high = split_low_high(a)
    xi = np.random.default_rng(0).standard_normal((10 ** 4, 2)) * 2
    assert np.max(np.abs(low(None, xi) + high(None, xi) - a(None, xi))) <= 1e-15
    assert low(None, np.array([[2.0, 0.0]]))[0] == 0
    assert high(None, np.array([[0.25, 0.0]]))[0] == 0
    assert low.support == 1.0


def test_low_frequency_kernel_decay_in_two_dimensions():
    low, _ = split_low_high(LinearAmplitude.japanese(-0.5))
    rep = low_freq_kernel(low, half_wave(), 2, eps=0.9)
    assert np.isfinite(rep["weighted_sup"]) and rep["weighted_sup"] <= 200


def test_low_frequency_kernel_slope_in_one_dimension():
    low, _ = split_low_high(LinearAmplitude.japanese(-0.5))
    rep = low_freq_kernel(low, half_wave(), 1, eps=0.9)
    assert rep["slope"] <= -(1 + 0.9)


def test_low_frequency_kernel_without_phase_is_rapidly_decaying():
    low, _ = split_low_high(LinearAmplitude.japanese(-0.5))
    rep = low_freq_kernel(low, zero_phase(), 1, x_range=(0.0, 200.0), eps=4.0)
    assert rep["slope"] <= -5


def test_low_frequency_kernel_needs_compact_support():
    with pytest.raises(FIOError):
        low_freq_kernel(LinearAmplitude.japanese(-0.5), half_wave(), 2)


def test_angular_pieces_sum_to_the_localized_kernel():
    j = 4
    atlas = sss_directions(j, 2)
    a = LinearAmplitude.japanese(-0.5)
    z = np.random.default_rng(0).uniform(-2, 2, (20, 2))
    total = sum(sss_kernel(j, v, atlas, a, half_wave(), z) for v in range(len(atlas)))
    full = sss_full_kernel(j, a, half_wave(), z, n_theta=2048)
    assert np.max(np.abs(total - full)) <= 1e-8 * np.max(np.abs(full))


def test_angular_pieces_need_large_enough_scale():
    with pytest.raises(FIOError):
        sss_kernel(1, 0, sss_directions(1, 2), LinearAmplitude.japanese(-0.5), half_wave(), [0, 0])


# --- the distance function H ------------------------------------------------------

def test_H_for_half_wave():
    z = np.random.default_rng(1).uniform(-3, 3, (200, 2))
    H = rs_H(half_wave(), z)
    assert np.max(np.abs(H - np.abs(np.linalg.norm(z, axis=-1) - 1))) <= 1e-6


@pytest.mark.parametrize("r", [1.0, 2.0])
def test_complement_of_delta_region_is_bounded(r):
    z = np.random.default_rng(2).uniform(-4 * r, 4 * r, (1000, 2))
    inside = delta_region(half_wave(), 2 * r, z, mesh=1024, candidates=1)
    norms = np.linalg.norm(z, axis=-1)
    assert np.all(norms[~inside] < (2 + 1) * r)


def test_H_halves_at_most_under_short_shifts():
    rng = np.random.default_rng(3)
    r = 1.0
    x = rng.uniform(-6, 6, (400, 2))
    x = x[rs_H(half_wave(), x, mesh=1024, candidates=1) >= 2 * r][:100]
    y = rng.standard_normal(x.shape)
    y *= (r * rng.uniform(0, 1, (len(x), 1))) / np.linalg.norm(y, axis=-1, keepdims=True)
    assert np.all(rs_H(half_wave(), x) <= 2 * rs_H(half_wave(), x - y) + 1e-9)


# --- smoothing operators ------------------------------------------------------------

def test_rk_kernel_has_zero_mean_and_kills_constants():
    grid = Grid(2, 64, 16.0)
    for k in (1, 4, 7):
        assert abs(rk_multiplier(k, -0.5, np.zeros(1))[0]) <= 1e-8
        out = rk_apply(k, -0.5, SampledField(grid, Rep.SPACE, np.full(grid.shape, 3.0)))
        assert np.max(np.abs(out.values)) <= 1e-12
    with pytest.raises(FIOError):
        rk_multiplier(2, 0.0, 1.0)


def test_rk_bounded_from_bmo_to_sup_uniformly_in_k():
    grid = Grid(2, 128, 16.0)
    f = truncated_log(grid)
    b = bmo_global(f)
    ratios = [float(np.max(np.abs(rk_apply(k, -0.5, f).values))) / b for k in range(1, 11)]
    assert max(ratios[5:]) <= calibrate_constant(ratios[:5])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), c=st.complex_numbers(max_magnitude=10, allow_nan=False))
def test_apply_fio_is_linear(seed, c):
    grid = Grid(1, 32, 8.0)
    f, g = smooth(grid, seed), smooth(grid, seed + 1)
    a = LinearAmplitude.japanese(-0.5)
    lhs = apply_fio(a, half_wave(), f.scale(c) + g).values
    rhs = c * apply_fio(a, half_wave(), f).values + apply_fio(a, half_wave(), g).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * (1 + np.max(np.abs(rhs)))
