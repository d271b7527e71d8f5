import numpy as np
import pytest

from uppe_green.models.errors import ContractError, GridError
from uppe_green.models.spectral_core import (
    PHYSICAL, SPECTRAL, BranchPolicy, Field, ZModes, build_beta_z, forward_slice,
    forward_transform, inner_product, inverse_slice, inverse_transform, make_grid,
    mollifier_spectrum, to_rep,
)
from uppe_green.utils.general import relative_l2


def unit_lattice_grid():
    # d_x = 2 pi / 8 and d_t = 2 pi / 32 put k = 1 and omega = 1 on the lattice
    return make_grid((8, 8, 8, 32), (2 * np.pi / 8,) * 3 + (2 * np.pi / 32,))


@pytest.mark.parametrize("counts", [(15, 16, 16, 32), (16, 16, 0, 32), (16, 16, 16, 2.5)])
def test_make_grid_rejects_bad_counts(counts):
    with pytest.raises(GridError, match="even"):
        make_grid(counts, (1, 1, 1, 1))


def test_make_grid_rejects_non_positive_steps_and_speed():
    with pytest.raises(GridError):
        make_grid((4, 4, 4, 4), (1, 0, 1, 1))
    with pytest.raises(GridError):
        make_grid((4, 4, 4, 4), (1, 1, 1, 1), c=-1.0)


def test_smallest_grid_is_accepted():
    grid = make_grid((2, 2, 2, 2), (1, 1, 1, 1))
    assert grid.size == 16


def test_grid_is_centered(small_grid):
    x = small_grid.coords("x")
    assert x[small_grid.origin_index("x")] == 0.0
    assert x[0] == -4.0
    assert small_grid.dk("x") == pytest.approx(2 * np.pi / 8)
    assert small_grid.d_omega == pytest.approx(2 * np.pi / (16 * 0.5))
    assert small_grid.freqs("t")[0] == pytest.approx(-np.pi / 0.5)


def test_refined_grid_keeps_the_box(small_grid):
    fine = small_grid.refined(2)
    assert fine.counts == (16, 16, 16, 32)
    assert fine.n_x * fine.d_x == small_grid.n_x * small_grid.d_x


def test_round_trip(small_grid, random_field):
    u = random_field(small_grid)
    for axes in ("xyzt", "xyt", "z", "t"):
        back = inverse_transform(forward_transform(u, axes), axes)
        assert back.rep == u.rep
        assert relative_l2(back.data, u.data) <= 1e-12


def test_delta_transforms_to_constant(small_grid):
    data = np.zeros(small_grid.shape)
    data[tuple(small_grid.origin_index(a) for a in "xyzt")] = 1.0 / small_grid.measure()
    spectrum = forward_transform(Field.physical(small_grid, data))
    assert np.allclose(spectrum.data, 1.0, atol=1e-12)


def test_constant_spectrum_is_a_delta(small_grid):
    back = inverse_transform(Field.spectral(small_grid, np.ones(small_grid.shape)))
    origin = tuple(small_grid.origin_index(a) for a in "xyzt")
    assert back.data[origin] == pytest.approx(1.0 / small_grid.measure())
    back.data[origin] = 0.0
    assert np.max(np.abs(back.data)) < 1e-12


def test_space_and_time_use_opposite_signs():
    grid = make_grid((8, 8, 8, 8), (1, 1, 1, 1))
    k0 = grid.freqs("x")[5]
    omega0 = grid.freqs("t")[5]
    x = grid.coords("x").reshape(-1, 1, 1, 1)
    t = grid.coords("t").reshape(1, 1, 1, -1)

    space = forward_transform(Field.physical(grid, np.exp(1j * k0 * x) * np.ones(grid.shape)), "x")
    profile = np.abs(space.data[:, 0, 0, 0])
    assert np.argmax(profile) == 5
    assert profile[5] == pytest.approx(8.0)

    time = forward_transform(Field.physical(grid, np.exp(1j * omega0 * t) * np.ones(grid.shape)), "t")
    profile = np.abs(time.data[0, 0, 0, :])
    # exp(+i omega0 t) lands on -omega0
    assert np.argmax(profile) == 3
    assert profile[3] == pytest.approx(8.0)


def test_plancherel(tiny_grid, rng):
    for _ in range(100):
        u, v = (Field.physical(tiny_grid, rng.standard_normal(tiny_grid.shape)
                               + 1j * rng.standard_normal(tiny_grid.shape)) for _ in range(2))
        lhs = inner_product(u, v)
        rhs = inner_product(forward_transform(u), forward_transform(v))
        assert abs(lhs - rhs) <= 1e-10 * abs(lhs) + 1e-12


def test_transform_contract_errors(small_grid, random_field):
    u = random_field(small_grid)
    spectral = forward_transform(u, "t")
    with pytest.raises(ContractError):
        forward_transform(spectral, "t")
    with pytest.raises(ContractError):
        inverse_transform(u, "x")
    with pytest.raises(ContractError):
        inner_product(u, spectral)
    with pytest.raises(ContractError):
        Field.physical(small_grid, np.zeros((2, 2, 2, 2)))


def test_to_rep_reaches_target(small_grid, random_field):
    u = random_field(small_grid)
    mixed = to_rep(u, (SPECTRAL, SPECTRAL, PHYSICAL, SPECTRAL))
    assert mixed.rep == (SPECTRAL, SPECTRAL, PHYSICAL, SPECTRAL)
    back = to_rep(mixed, (PHYSICAL,) * 4)
    assert relative_l2(back.data, u.data) <= 1e-12


def test_slice_transforms_match_full_transform(small_grid, random_field):
    u = random_field(small_grid)
    full = forward_transform(u, "xyt").data
    j = 3
    assert relative_l2(forward_slice(u.data[:, :, j, :], small_grid), full[:, :, j, :]) <= 1e-13
    assert relative_l2(inverse_slice(full[:, :, j, :], small_grid), u.data[:, :, j, :]) <= 1e-12
    with pytest.raises(ContractError):
        forward_slice(np.zeros((8, 8, 8)), small_grid)


def test_mollifier_is_unit_mass(small_grid):
    m = mollifier_spectrum(small_grid, {"x": 2.0, "t": 1.0})
    assert m.shape == (8, 1, 1, 16)
    assert m[4, 0, 0, 8] == 1.0
    assert np.all(m <= 1.0)


def test_beta_on_axis_equals_omega_over_c():
    grid = unit_lattice_grid()
    table = build_beta_z(grid)
    # k_x = k_y = 0, omega = 1
    assert table.values[4, 4, 17] == pytest.approx(1.0, rel=1e-14)
    assert table.propagating[4, 4, 17]


def test_beta_is_imaginary_beyond_the_light_cone():
    grid = unit_lattice_grid()
    table = build_beta_z(grid, "evanescent_decay")
    # k_x = k_y = 1, omega = 1: k_perp^2 = 2 omega^2
    assert table.values[5, 5, 17] == pytest.approx(1j, rel=1e-14)
    assert table.evanescent[5, 5, 17]
    assert np.all(table.values.imag >= 0)
    assert np.all(table.values.real >= 0)


def test_light_line_bins_are_singular():
    grid = unit_lattice_grid()
    for epsilon in (0.0, 1e-3):
        table = build_beta_z(grid, epsilon=epsilon)
        assert table.singular[5, 4, 17]
        assert not table.valid[5, 4, 17]
        assert table.inverse()[5, 4, 17] == 0.0
        assert np.all(np.isfinite(table.inverse()))


def test_evanescent_zero_policy_drops_bins(small_grid):
    table = build_beta_z(small_grid, BranchPolicy.EVANESCENT_ZERO)
    assert np.all(table.values[table.evanescent] == 0)
    assert not np.any(table.valid & table.evanescent)
    assert np.all(table.phase(1.5)[table.evanescent] == 0)
    decay = build_beta_z(small_grid, BranchPolicy.EVANESCENT_DECAY)
    assert np.all(np.abs(decay.phase(1.5)) <= 1.0 + 1e-15)
    assert np.allclose(np.abs(decay.phase(1.5)[decay.propagating]), 1.0)


def test_negative_epsilon_is_rejected(small_grid):
    with pytest.raises(GridError):
        build_beta_z(small_grid, epsilon=-1.0)


def test_excluded_fraction(small_grid):
    table = build_beta_z(small_grid, "evanescent_zero")
    expected = np.sum(~table.valid) / table.valid.size
    assert table.excluded_fraction(np.ones(table.values.shape)) == pytest.approx(expected)
    assert table.excluded_fraction(np.zeros(table.values.shape)) == 0.0


def test_z_modes_synthesize_plane_waves(small_grid):
    table = build_beta_z(small_grid)
    up = np.ones(table.values.shape, dtype=complex)
    modes = ZModes(up, np.zeros_like(up), table)
    field = modes.synthesize()
    assert field.rep == (SPECTRAL, SPECTRAL, PHYSICAL, SPECTRAL)
    for j, z in enumerate(small_grid.coords("z")):
        assert np.allclose(field.data[:, :, j, :], table.phase(z))
    both = (modes + modes.scaled(2.0) - modes).synthesize()
    assert relative_l2(both.data, 2.0 * field.data) <= 1e-15
