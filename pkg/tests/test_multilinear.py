import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiolab.cutoffs import ConeConstants, nu, squared_family_radial
from fiolab.field import Grid, Rep, SampledField
from fiolab.linear_fio import half_wave
from fiolab.multilinear import (MultiAmplitude, MultilinearError, PhaseSystem, apply_direct,
                                apply_fast, apply_sigma0_fast, apply_sigma_j_fast,
                                apply_sigma_jk_fast, build_u_quadrature, decompose, duhamel_evolve,
                                plan_fast, plan_sigma0, sigma0_decay, tau_table, telescoped_ball)


def smooth(grid, seed, width=50.0):
    rng = np.random.default_rng(seed)
    spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    spec *= np.exp(-grid.dual_norm() ** 2 / width)
    return SampledField(grid, Rep.SPACE, np.fft.ifftn(np.fft.ifftshift(spec)) * grid.M)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture(scope="module")
def setup():
    grid = Grid(1, 64, 8.0)
    sigma = MultiAmplitude.japanese(1, 2, -0.5)
    return grid, sigma, PhaseSystem.uniform(2), decompose(sigma), [smooth(grid, 1), smooth(grid, 2)]


# --- brute-force oracle ----------------------------------------------------------

def test_constant_amplitude_without_phase_is_the_product():
    grid = Grid(1, 32, 8.0)
    f, g = smooth(grid, 3), smooth(grid, 4)
    out = apply_direct(MultiAmplitude.constant(1, 2), PhaseSystem.zero(2), [f, g])
    assert np.max(np.abs(out.values - f.values * g.values)) <= 1e-10 * np.max(np.abs(out.values))


def test_direct_is_linear_in_each_slot():
    grid = Grid(1, 32, 8.0)
    sigma, Phi = MultiAmplitude.japanese(1, 2, -0.5), PhaseSystem.uniform(2)
    f, g, h = smooth(grid, 5), smooth(grid, 6), smooth(grid, 7)
    c = 0.3 - 1.2j
    for slot in range(2):
        args = [f, g]
        a = apply_direct(sigma, Phi, args).values
        args_h = list(args)
        args_h[slot] = h
        b = apply_direct(sigma, Phi, args_h).values
        args_sum = list(args)
        args_sum[slot] = args[slot].scale(c) + h
        s = apply_direct(sigma, Phi, args_sum).values
        assert np.max(np.abs(s - (c * a + b))) <= 1e-12 * np.max(np.abs(s))


def test_swapping_inputs_and_slots_is_symmetric():
    grid = Grid(1, 32, 8.0)
    sigma = MultiAmplitude(1, 2, -0.5, lambda Xi: (1 + Xi[..., 0, 0] ** 2) ** -0.25 * np.exp(0.1j * Xi[..., 1, 0]))
    Phi = PhaseSystem.uniform(2)
    f, g = smooth(grid, 8), smooth(grid, 9)
    a = apply_direct(sigma, Phi, [f, g]).values
    b = apply_direct(sigma.permuted([1, 0]), Phi, [g, f]).values
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_direct_budget_and_input_checks():
    grid = Grid(1, 32, 8.0)
    sigma, Phi = MultiAmplitude.japanese(1, 2, 0.0), PhaseSystem.uniform(2)
    fs = [smooth(grid, 0), smooth(grid, 1)]
    with pytest.raises(MultilinearError):
        apply_direct(sigma, Phi, fs, budget=100)
    with pytest.raises(MultilinearError):
        apply_direct(sigma, Phi, fs[:1])
    with pytest.raises(MultilinearError):
        apply_direct(sigma, PhaseSystem.uniform(3), fs)
    with pytest.raises(MultilinearError):
        apply_direct(sigma, Phi, [fs[0], smooth(Grid(1, 16, 8.0), 0)])


# --- decomposition ---------------------------------------------------------------

@pytest.mark.parametrize("N", [2, 3])
def test_decomposition_reconstructs(N):
    sigma = MultiAmplitude.japanese(2, N, -0.5)
    dec = decompose(sigma)
    Xi = np.random.default_rng(N).standard_normal((10 ** 4, N, 2)) * np.exp(
        np.random.default_rng(N + 1).uniform(-3, 4, (10 ** 4, 1, 1)))
    assert np.max(np.abs(dec.total(None, Xi) - sigma(None, Xi))) <= 1e-12


def test_dominant_piece_vanishes_off_its_cone():
    sigma = MultiAmplitude.japanese(1, 2, 0.0)
    dec = decompose(sigma)
    c = dec.consts
    rng = np.random.default_rng(0)
    Xi = rng.standard_normal((5000, 2, 1)) * 3
    radius = np.sqrt(np.sum(Xi ** 2, axis=(1, 2)))
    off = (np.abs(Xi[:, 0, 0]) <= 32 * np.abs(Xi[:, 1, 0])) & (radius >= 0.25)
    assert np.all(dec.sigma_j[0](None, Xi[off]) == 0)
    assert np.all(nu(Xi[off], c)[:, 0] == 0)


def test_compact_piece_vanishes_outside_quarter_ball():
    dec = decompose(MultiAmplitude.japanese(2, 2, -0.5))
    Xi = np.random.default_rng(1).standard_normal((1000, 2, 2))
    Xi *= 0.3 / np.sqrt(np.sum(Xi ** 2, axis=(1, 2)))[:, None, None]
    assert np.all(dec.sigma0(None, Xi) == 0)


def test_decomposition_manifest_and_errors():
    dec = decompose(MultiAmplitude.japanese(1, 3, -1.0))
    man = dec.manifest()
    assert man["pieces"][0] == "sigma0" and len(man["pieces"]) == 1 + 3 + 6
    with pytest.raises(MultilinearError):
        decompose(MultiAmplitude.japanese(1, 2, 0.0), ConeConstants(3))


# --- U expansion -------------------------------------------------------------------

def test_zero_amplitude_gives_an_empty_expansion(setup):
    grid = setup[0]
    dec = decompose(MultiAmplitude.constant(1, 2, 0.0))
    uq = build_u_quadrature(dec.sigma_j[0], grid)
    assert uq.empty


def test_truncated_series_reconstructs_the_factor(setup):
    grid, _, _, dec, _ = setup
    rng = np.random.default_rng(0)
    tau = 1e-6
    for piece in (dec.sigma_j[0], dec.sigma_jk[0]):
        uq = build_u_quadrature(piece, grid, tau_U=tau, keep_tables=True)
        errs = []
        for _ in range(1000):
            k = uq.ks[int(rng.integers(len(uq.ks)))]
            A = uq.tables[k]
            idx = tuple(int(rng.integers(s)) for s in A.shape)
            errs.append(abs(uq.reconstruct(k)[idx] - A[idx]) / np.max(np.abs(A)))
        assert max(errs) <= 10 * tau


def test_expansion_tail_decays_fast_when_resolved():
    # The cone cutoff turns over within about 2^-6 |xi_1|, so the lattice must
    # be far finer than that before the tail of the expansion is visible.
    grid = Grid(1, 8192, 4096.0)
    dec = decompose(MultiAmplitude.japanese(1, 2, -0.5))
    uq = build_u_quadrature(dec.sigma_j[0], grid, tau_U=1e-14, ks=[0])
    fit = uq.decay_fit(0, level=1e-4, shells=200)
    assert fit["points"] >= 3 and fit["slope"] <= -8


def test_compact_piece_coefficients_decay_fast(setup):
    dec = setup[3]
    assert sigma0_decay(dec.sigma0)["slope"] <= -8


def test_tau_table_is_three_periodic(setup):
    grid, _, _, dec, _ = setup
    uq = build_u_quadrature(dec.sigma_j[0], grid)
    eta = np.linspace(0.1, 30, 50)[:, None]
    for U in [(0, 0), (1, 2), (3, 1)]:
        a = tau_table(uq, 0, U, eta)
        assert np.array_equal(a, tau_table(uq, 3, U, eta))
        assert np.array_equal(a, tau_table(uq, -3, U, eta))


def test_telescoped_ball_is_exact():
    r = np.geomspace(1e-3, 1e3, 2000)
    for k0, k in [(-2, 3), (0, 0), (1, 7)]:
        diff = telescoped_ball(k, k0, r) - squared_family_radial("theta", k, r)
        assert np.max(np.abs(diff)) <= 1e-15


def test_expansion_rejects_bad_splits(setup):
    grid, _, _, dec, _ = setup
    with pytest.raises(MultilinearError):
        build_u_quadrature(dec.sigma_j[0], grid, m_split=[0.0, 0.0, 0.0])


# --- fast paths -------------------------------------------------------------------

def test_dominant_pieces_match_the_oracle(setup):
    grid, _, Phi, dec, fs = setup
    for p in dec.sigma_j:
        ref = apply_direct(p.as_amplitude(), Phi, fs).values
        assert rel(apply_sigma_j_fast(p, Phi, fs).values, ref) <= 1e-3


def test_comparable_pieces_match_the_oracle(setup):
    grid, _, Phi, dec, fs = setup
    for p in dec.sigma_jk:
        ref = apply_direct(p.as_amplitude(), Phi, fs).values
        assert rel(apply_sigma_jk_fast(p, Phi, fs).values, ref) <= 1e-3


def test_compact_piece_matches_the_oracle(setup):
    grid, _, Phi, dec, fs = setup
    ref = apply_direct(dec.sigma0.as_amplitude(), Phi, fs).values
    assert rel(apply_sigma0_fast(dec.sigma0, Phi, fs, K_max=8).values, ref) <= 1e-4


def test_compact_piece_of_zero_is_zero(setup):
    grid, _, Phi, _, fs = setup
    dec = decompose(MultiAmplitude.constant(1, 2, 0.0))
    terms, info = plan_sigma0(dec.sigma0, Phi, grid)
    assert terms == [] and info["rank"] == 0
    assert np.all(apply_sigma0_fast(dec.sigma0, Phi, fs).values == 0)


def test_zero_inputs_give_zero(setup):
    grid, _, Phi, dec, _ = setup
    zero = [SampledField.zeros(grid), SampledField.zeros(grid)]
    assert np.all(apply_sigma_j_fast(dec.sigma_j[0], Phi, zero).values == 0)


def test_comparable_piece_ignores_separated_scales(setup):
    Phi, dec = setup[2], setup[3]
    grid = Grid(1, 256, 64.0)
    xi = grid.dual_axis()

    def band(lo, hi, seed):
        rng = np.random.default_rng(seed)
        spec = np.where((np.abs(xi) >= lo) & (np.abs(xi) <= hi), rng.standard_normal(grid.M), 0.0)
        return SampledField(grid, Rep.SPACE, np.fft.ifft(np.fft.ifftshift(spec)) * grid.M)

    lo, _ = dec.consts.bracket
    f1, f2 = band(0.05, 0.1, 0), band(11.5, 13.0, 1)
    assert 0.1 / 11.5 < lo
    for p in dec.sigma_jk:
        out = apply_direct(p.as_amplitude(), Phi, [f1, f2]).values
        # only round-off leakage from the band-limited inputs survives
        assert np.max(np.abs(out)) <= 1e-13 * np.max(np.abs(f1.values)) * np.max(np.abs(f2.values))


def test_full_fast_evaluation_matches_the_oracle(setup):
    grid, sigma, Phi, _, fs = setup
    ref = apply_direct(sigma, Phi, fs).values
    assert rel(apply_fast(sigma, Phi, fs).values, ref) <= 3e-3


def test_three_inputs_match_the_oracle():
    grid = Grid(1, 32, 8.0)
    sigma, Phi = MultiAmplitude.japanese(1, 3, -0.5), PhaseSystem.uniform(3)
    fs = [smooth(grid, s) for s in range(3)]
    ref = apply_direct(sigma, Phi, fs).values
    assert rel(apply_fast(sigma, Phi, fs).values, ref) <= 1e-2


def test_separable_x_dependence(setup):
    grid, _, Phi, _, fs = setup
    terms = [(lambda x: 1 + 0.2 * np.cos(x), lambda Xi: (1 + np.sum(Xi ** 2, axis=(-1, -2))) ** -0.25)]
    sigma = MultiAmplitude.separable_x(1, 2, -0.5, terms)
    ref = apply_direct(sigma, Phi, fs).values
    assert rel(apply_fast(sigma, Phi, fs).values, ref) <= 3e-3
    with pytest.raises(MultilinearError):
        plan_fast(sigma, Phi, grid)


def test_plan_is_tied_to_its_grid(setup):
    grid, sigma, Phi, _, fs = setup
    plan = plan_fast(sigma, Phi, grid)
    other = Grid(1, 64, 16.0)
    with pytest.raises(MultilinearError):
        apply_fast(sigma, Phi, [smooth(other, 0), smooth(other, 1)], plan=plan)


# --- Duhamel integral ---------------------------------------------------------------

def _bilinear_symbol(Xi):
    return (1 + np.sum(Xi ** 2, axis=(-1, -2))) ** -0.5


def test_duhamel_trivial_cases():
    grid = Grid(1, 32, 8.0)
    fs = [smooth(grid, 0), smooth(grid, 1)]
    assert np.all(duhamel_evolve(_bilinear_symbol, fs, 0.0, 4).values == 0)
    zero = lambda Xi: np.zeros(Xi.shape[:-2])
    assert np.all(duhamel_evolve(zero, fs, 1.0, 4).values == 0)
    with pytest.raises(MultilinearError):
        duhamel_evolve(_bilinear_symbol, fs, 1.0, 1)


def test_duhamel_is_second_order():
    grid = Grid(1, 32, 8.0)
    fs = [smooth(grid, 2, width=8.0), smooth(grid, 3, width=8.0)]
    ref = duhamel_evolve(_bilinear_symbol, fs, 1.0, 512).values
    e = [np.linalg.norm(duhamel_evolve(_bilinear_symbol, fs, 1.0, s).values - ref) for s in (8, 16, 32)]
    for a, b in zip(e, e[1:]):
        assert 3.0 <= a / b <= 5.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10 ** 6), c=st.complex_numbers(max_magnitude=5, allow_nan=False))
def test_fast_path_is_linear(seed, c):
    grid = Grid(1, 32, 8.0)
    sigma, Phi = MultiAmplitude.japanese(1, 2, -0.5), PhaseSystem.uniform(2)
    plan = _plan_cache(grid, sigma, Phi)
    f, g, h = smooth(grid, seed), smooth(grid, seed + 1), smooth(grid, seed + 2)
    lhs = apply_fast(sigma, Phi, [f.scale(c) + h, g], plan=plan).values
    rhs = c * apply_fast(sigma, Phi, [f, g], plan=plan).values + apply_fast(sigma, Phi, [h, g], plan=plan).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * (1 + np.max(np.abs(rhs)))


_PLANS = {}


def _plan_cache(grid, sigma, Phi):
    key = (grid, sigma.name)
    if key not in _PLANS:
        _PLANS[key] = plan_fast(sigma, Phi, grid)
    return _PLANS[key]
