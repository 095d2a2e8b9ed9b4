import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiolab.field import (FieldError, Grid, Rep, SampledField, check_periodization, conj,
                          forward_ft, inverse_ft, modulate, pointwise_mul, read_fiof,
                          read_fiof_records, translate, write_fiof, write_fiof_records)


def gaussian(grid):
    return SampledField.from_function(grid, lambda *c: np.exp(-sum(x * x for x in c) / 2))


def random_field(grid, seed=0, rep=Rep.SPACE):
    rng = np.random.default_rng(seed)
    return SampledField(grid, rep, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


# --- oracles -------------------------------------------------------------------

def test_gaussian_transform_matches_closed_form():
    grid = Grid(1, 2 ** 12, 64.0)
    fh = forward_ft(gaussian(grid))
    xi = grid.dual_axis()
    exact = np.sqrt(2 * np.pi) * np.exp(-xi ** 2 / 2)
    sel = exact > 1e-6
    assert np.max(np.abs(fh.values[sel] - exact[sel]) / exact[sel]) <= 1e-8


def test_inverse_of_gaussian_spectrum_matches_closed_form():
    grid = Grid(1, 2 ** 12, 64.0)
    spec = SampledField.from_function(grid, lambda xi: np.sqrt(2 * np.pi) * np.exp(-xi ** 2 / 2),
                                      Rep.FREQUENCY)
    f = inverse_ft(spec)
    x = grid.axis()
    exact = np.exp(-x ** 2 / 2)
    sel = exact > 1e-6
    assert np.max(np.abs(f.values[sel] - exact[sel]) / exact[sel]) <= 1e-8


def test_constant_transforms_to_the_zero_bin():
    grid = Grid(2, 16, 8.0)
    fh = forward_ft(SampledField(grid, Rep.SPACE, np.ones(grid.shape)))
    zero = (grid.M // 2,) * 2
    assert fh.values[zero] == pytest.approx(grid.L ** 2)
    rest = fh.values.copy()
    rest[zero] = 0
    assert np.max(np.abs(rest)) < 1e-12


def test_zero_bin_inverts_to_a_constant():
    grid = Grid(1, 32, 4.0)
    g = np.zeros(grid.shape, dtype=complex)
    g[grid.M // 2] = grid.L
    f = inverse_ft(SampledField(grid, Rep.FREQUENCY, g))
    assert np.allclose(f.values, 1.0, atol=1e-14)


def test_shift_theorem_on_lattice():
    grid = Grid(1, 64, 8.0)
    f = random_field(grid)
    h = 3 * grid.spacing
    mod = forward_ft(f).values * np.exp(1j * h * grid.dual_axis())
    back = inverse_ft(SampledField(grid, Rep.FREQUENCY, mod))
    assert np.max(np.abs(back.values - translate(f, -h).values)) <= 1e-12


def test_parseval():
    grid = Grid(2, 32, 8.0)
    f = random_field(grid, 3)
    lhs = np.sum(np.abs(f.values) ** 2) * grid.spacing ** 2
    rhs = np.sum(np.abs(forward_ft(f).values) ** 2) * grid.dual_spacing ** 2 / (2 * np.pi) ** 2
    assert abs(lhs - rhs) / lhs <= 1e-10


def test_real_input_has_hermitian_spectrum():
    grid = Grid(1, 64, 8.0)
    f = SampledField(grid, Rep.SPACE, np.random.default_rng(2).standard_normal(64))
    g = forward_ft(f).values
    # xi_k and -xi_k: index M/2 + k and M/2 - k
    k = np.arange(1, grid.M // 2)
    assert np.max(np.abs(g[grid.M // 2 + k] - np.conj(g[grid.M // 2 - k]))) <= 1e-12


def test_grid_invariants():
    g = Grid(2, 64, 10.0)
    assert g.spacing * g.dual_spacing == pytest.approx(2 * np.pi / g.M)
    ax = g.dual_axis()
    assert ax[0] == pytest.approx(-ax[-1] - g.dual_spacing)
    with pytest.raises(FieldError):
        Grid(1, 48, 1.0)
    with pytest.raises(FieldError):
        Grid(1, 16, -1.0)


def test_rejects_non_finite_and_wrong_length():
    grid = Grid(1, 8, 1.0)
    with pytest.raises(FieldError):
        SampledField(grid, Rep.SPACE, np.full(8, np.nan))
    with pytest.raises(FieldError):
        SampledField(grid, Rep.SPACE, np.zeros(7))
    with pytest.raises(FieldError):
        forward_ft(SampledField(grid, Rep.FREQUENCY, np.zeros(8)))


def test_translate_modulate_and_products():
    grid = Grid(1, 64, 8.0)
    f = random_field(grid, 5)
    assert np.array_equal(translate(f, 0.0).values, f.values)
    h = 0.3 * grid.spacing
    assert np.max(np.abs(translate(translate(f, h), -h).values - f.values)) <= 1e-12
    p = pointwise_mul(f, conj(f)).values
    assert np.max(np.abs(p.imag)) <= 1e-15 * np.max(np.abs(p)) and np.min(p.real) >= 0
    eta = 2 * grid.dual_spacing
    assert np.max(np.abs(modulate(modulate(f, eta), -eta).values - f.values)) <= 1e-12
    with pytest.raises(FieldError):
        pointwise_mul(f, random_field(Grid(1, 32, 8.0)))


def test_periodization_flag():
    grid = Grid(1, 256, 32.0)
    assert check_periodization(gaussian(grid))["ok"]
    wide = SampledField.from_function(grid, lambda x: np.exp(-x ** 2 / 200))
    assert not check_periodization(wide)["ok"]


def test_fiof_round_trip_and_layout(tmp_path):
    grid = Grid(2, 8, 3.5)
    f = random_field(grid, 7)
    path = tmp_path / "f.fiof"
    write_fiof(path, f)
    raw = path.read_bytes()
    assert raw[:4] == b"FIOF"
    assert len(raw) == 4 + 4 + 4 + 4 + 8 + 1 + 16 * grid.size
    g = read_fiof(path)
    assert g.grid == grid and g.rep == f.rep and np.array_equal(g.values, f.values)
    write_fiof_records(tmp_path / "r.fiof", [f, forward_ft(f)])
    recs = read_fiof_records(tmp_path / "r.fiof")
    assert [r.rep for r in recs] == [Rep.SPACE, Rep.FREQUENCY]
    with pytest.raises(FieldError):
        read_fiof(tmp_path / "r.fiof")
    (tmp_path / "bad.fiof").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FieldError):
        read_fiof(tmp_path / "bad.fiof")


# --- properties ------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 2), logM=st.integers(2, 5), L=st.floats(0.5, 50.0), seed=st.integers(0, 10 ** 6))
def test_round_trip_identity(n, logM, L, seed):
    grid = Grid(n, 2 ** logM, L)
    f = random_field(grid, seed)
    back = inverse_ft(forward_ft(f))
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * max(1.0, np.max(np.abs(f.values)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), a=st.complex_numbers(max_magnitude=10, allow_nan=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False))
def test_transform_is_linear(seed, a, b):
    grid = Grid(1, 32, 6.0)
    f, g = random_field(grid, seed), random_field(grid, seed + 1)
    lhs = forward_ft(f.scale(a) + g.scale(b)).values
    rhs = a * forward_ft(f).values + b * forward_ft(g).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(rhs)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), steps=st.integers(-40, 40))
def test_lattice_translation_is_an_exact_roll(seed, steps):
    grid = Grid(1, 64, 8.0)
    f = random_field(grid, seed)
    g = translate(f, steps * grid.spacing)
    assert np.array_equal(g.values, np.roll(f.values, steps))
