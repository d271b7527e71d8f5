import math

import numpy as np
import pytest

from uppe_green.models import verification
from uppe_green.models.errors import ContractError, SizeGuardError
from uppe_green.models.green import make_green_spec
from uppe_green.models.spectral_core import Field, forward_transform, make_grid
from uppe_green.models.verification import (
    OracleReport, box_inverse_distance_mean, brute_force_dft, retarded_quadrature, run_all_checks,
    scaling_diagnostic,
)
from uppe_green.utils.general import relative_l2


def test_brute_force_dft_matches_fft(tiny_grid, random_field):
    f = random_field(tiny_grid)
    assert relative_l2(brute_force_dft(f).data, forward_transform(f).data) <= 1e-12
    partial = brute_force_dft(f, "zt")
    assert partial.rep == forward_transform(f, "zt").rep
    assert relative_l2(partial.data, forward_transform(f, "zt").data) <= 1e-12


def test_brute_force_dft_size_guard(small_grid, random_field):
    f = random_field(small_grid)
    with pytest.raises(SizeGuardError):
        brute_force_dft(f)
    # a single axis stays within the limit
    assert relative_l2(brute_force_dft(f, "t").data, forward_transform(f, "t").data) <= 1e-12


def test_box_inverse_distance_mean():
    expected = 3.0 * math.log(2.0 + math.sqrt(3.0)) - math.pi / 2.0
    assert box_inverse_distance_mean(1.0, 1.0, 1.0) == pytest.approx(expected, rel=1e-12)
    # 1/r scaling
    assert box_inverse_distance_mean(2.0, 2.0, 2.0) == pytest.approx(expected / 2.0, rel=1e-12)
    assert box_inverse_distance_mean(1.0, 2.0, 0.5) == pytest.approx(box_inverse_distance_mean(0.5, 1.0, 2.0))


def test_retarded_quadrature_static_source(rng):
    grid = make_grid((4, 4, 4, 4), (1.0, 1.0, 1.0, 1.0))
    space = rng.standard_normal(grid.shape[:3])
    q = Field.physical(grid, np.repeat(space[..., None], 4, axis=3))
    out = retarded_quadrature(q).data

    points = np.stack(np.meshgrid(*(grid.coords(a) for a in "xyz"), indexing="ij"), axis=-1).reshape(-1, 3)
    values = space.ravel()
    self_weight = box_inverse_distance_mean(1.0, 1.0, 1.0)
    expected = np.empty(len(points))
    for n, p in enumerate(points):
        rho = np.linalg.norm(points - p, axis=1)
        weights = np.where(rho > 0, 1.0 / np.where(rho > 0, rho, 1.0), self_weight)
        expected[n] = -np.sum(weights * values) / (4.0 * np.pi)
    for j in range(4):
        assert np.allclose(out[..., j].ravel(), expected, rtol=1e-12, atol=1e-14)


def test_retarded_quadrature_delays_by_distance_over_c():
    grid = make_grid((8, 8, 8, 16), (1.0, 1.0, 1.0, 1.0))
    o = grid.origin_index("x")
    pulse = np.exp(-0.5 * (grid.coords("t") / 2.0) ** 2)
    data = np.zeros(grid.shape)
    data[o, o, o, :] = pulse
    out = retarded_quadrature(Field.physical(grid, data)).data
    received = out[o + 3, o, o, 3:]
    assert np.allclose(received, -pulse[:-3] / (4.0 * np.pi * 3.0), rtol=1e-12)


def test_retarded_quadrature_size_guard():
    grid = make_grid((32, 32, 32, 4), (1.0, 1.0, 1.0, 1.0))
    with pytest.raises(SizeGuardError):
        retarded_quadrature(Field.zeros(grid))


def test_oracle_report_passed_and_serialization():
    report = OracleReport("demo", 1e-9, 1e-8, {"x": np.float64(2.0), "bad": float("nan")}, runtime=3.0)
    assert report.passed
    data = report.to_dict()
    assert "runtime" not in data
    assert data["details"] == {"x": 2.0, "bad": "nan"}
    failing = OracleReport("demo", math.inf, 0.0)
    assert not failing.passed
    assert failing.to_dict()["residual"] == "inf"


def test_scaling_ratio_never_exceeds_one(desk_spec):
    diagnostic = scaling_diagnostic(desk_spec)
    assert 0.0 < diagnostic["ratio"] <= 1.0 + 1e-12
    assert diagnostic["full_dt"] > 0


def test_run_all_checks_subset_is_deterministic(small_grid):
    spec = make_green_spec(small_grid)
    names = ("plancherel", "brute_force_dft", "projector_algebra", "paraxial_scaling")
    first = run_all_checks(spec, seed=7, names=names)
    second = run_all_checks(spec, seed=7, names=names)
    assert [r.name for r in first] == ["projector_algebra", "brute_force_dft", "plancherel", "paraxial_scaling"]
    assert all(r.passed for r in first)
    assert [r.to_dict() for r in first] == [r.to_dict() for r in second]


def test_fundamental_identity_check_passes(small_grid):
    spec = make_green_spec(small_grid)
    (report,) = run_all_checks(spec, names=("theorem1",))
    assert report.passed
    assert report.details["residual_without_projector"] > 0.5


def test_failing_check_is_reported_not_raised(small_grid, monkeypatch):
    def broken(spec, rng):
        raise RuntimeError("boom")

    monkeypatch.setitem(verification.CHECKS, "plancherel", broken)
    (report,) = run_all_checks(make_green_spec(small_grid), names=("plancherel",))
    assert not report.passed
    assert report.residual == math.inf
    assert "boom" in report.details["error"]


def test_delayed_samples_wrap_around_the_window():
    data = np.arange(4.0)
    assert np.array_equal(verification._delayed(data, 1.0), [3.0, 0.0, 1.0, 2.0])
    assert np.allclose(verification._delayed(data, 0.5), [1.5, 0.5, 1.5, 2.5])
    assert np.array_equal(verification._delayed(np.arange(8.0), 2.0, stride=2), [6.0, 0.0, 2.0, 4.0])


def test_retarded_quadrature_interpolates_on_a_refined_time_axis():
    grid = make_grid((4, 4, 4, 16), (1.0, 1.0, 1.0, 1.0))
    o = grid.origin_index("x")
    t = grid.coords("t")
    data = np.zeros(grid.shape, dtype=np.complex128)
    data[o, o, o, :] = np.cos(2.0 * np.pi * 3 * t / 16.0)
    out = retarded_quadrature(Field.physical(grid, data)).data
    # a diagonal neighbour sits sqrt(2) steps away, between time samples
    received = out[o + 1, o + 1, o, :]
    expected = -np.cos(2.0 * np.pi * 3 * (t - math.sqrt(2.0)) / 16.0) / (4.0 * np.pi * math.sqrt(2.0))
    assert relative_l2(received, expected) <= 0.01


def test_retarded_quadrature_rejects_bad_upsampling(tiny_grid):
    with pytest.raises(ContractError):
        retarded_quadrature(Field.zeros(tiny_grid), upsample=0)


def test_quadrature_agrees_with_convolution_beyond_a_forward_pulse(desk_spec):
    (report,) = run_all_checks(desk_spec, names=("retarded_quadrature",))
    assert report.passed, report.details
    assert report.residual <= 0.05


def test_march_agreement_check_passes(desk_spec):
    (report,) = run_all_checks(desk_spec, names=("march_agreement",))
    assert report.passed
    assert report.details["error_dz_4"] <= 0.01


@pytest.mark.parametrize("policy", ["evanescent_zero", "evanescent_decay"])
def test_weyl_solutions_carry_backward_mass_in_every_frequency_shell(desk_grid, policy):
    (report,) = run_all_checks(make_green_spec(desk_grid, branch_policy=policy), names=("wave_green_both_directions",))
    assert report.passed
    assert report.details["min_backward_fraction"] >= 0.5


def test_physical_paraxial_route_check_passes(desk_spec):
    (report,) = run_all_checks(desk_spec, names=("theorem2_physical",))
    assert report.passed
