from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laguerre_gridshell.cyclide import SurfaceSample, fd_frame, parameter_grid
from laguerre_gridshell.laguerre import identity, make_euclidean, make_offset, rotation_matrix
from laguerre_gridshell.membrane import (
    ConditionDegenerateError, MembraneField, SingularFieldError, build_field, check_label_convention,
    compatibility_residual, equilibrium_residuals, frame_at, isothermic_sample, membrane_forces,
    normal_residual, point_cloud_frame, solve_I0, tangential_residuals, third_fundamental_form,
    transform_field, with_I0)

Z = -0.0005


def point_sample(k1, k2, A1, A2):
    a = np.asarray
    return SurfaceSample(a(0.0), a(0.0), np.zeros(3), np.array([0, 0, 1.0]), a(k1), a(k2), a(A1), a(A2),
                         a(np.log(abs(k1 * A1)) if k1 * A1 else 0.0))


@pytest.fixture(scope="module")
def base(default_setup):
    params, center = default_setup
    return build_field(params, 14, 16, Z, center=center)


@pytest.fixture(scope="module")
def moved(base, default_map):
    return transform_field(base, default_map)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e-3, -1e-5), st.floats(1e-5, 1e-3), st.floats(10, 1e4), st.floats(-1e-2, 1e-2),
       st.floats(-1e5, 1e5))
def test_normal_equilibrium_identity(k1, ratio, A1, z, I0):
    # isothermic sample: kappa2 A2 = kappa1 A1
    k2 = -ratio
    A2 = k1 * A1 / k2
    s = point_sample(k1, k2, A1, A2)
    T1, T2 = membrane_forces(s, z, I0)
    scale = abs(k1 * T1) + abs(k2 * T2) + abs(z)
    assert abs(k1 * T1 + k2 * T2 + z) <= 1e-13 * scale


def test_unloaded_unstressed():
    T1, T2 = membrane_forces(point_sample(-1e-4, -2e-4, 300.0, 150.0), 0.0, 0.0)
    assert T1 == 0.0 and T2 == 0.0


def test_I0_sensitivity_of_T1():
    s = point_sample(-1e-4, -2e-4, 300.0, 150.0)
    d = membrane_forces(s, Z, 1.0)[0] - membrane_forces(s, Z, 0.0)[0]
    assert d == pytest.approx(-1.0 / (-2e-4 * 150.0 ** 2), rel=1e-12)


def test_flat_point_rejected():
    with pytest.raises(SingularFieldError):
        membrane_forces(point_sample(0.0, -2e-4, 300.0, 150.0), Z, 0.0)


def test_hyperbolic_sample_rejected():
    with pytest.raises(SingularFieldError):
        isothermic_sample(point_sample(1e-4, -2e-4, 300.0, 150.0))


def test_I0_anchor(base):
    assert base.I0 == pytest.approx(-76850.0, rel=0.02)
    T1, T2 = membrane_forces(base.center, Z, base.I0)
    assert abs(T1 * base.center.A2 - T2 * base.center.A1) <= 1e-10 * abs(T1 * base.center.A2)


def test_I0_linear_in_Z(default_setup):
    params, center = default_setup
    c = frame_at(params, *center)
    assert solve_I0(c, 2 * Z) == pytest.approx(2 * solve_I0(c, Z), rel=1e-12)


def test_umbilic_center_gives_zero_I0():
    # equal speeds and curvatures: the condition reduces to -2 I0 / (kappa A) = 0
    assert solve_I0(point_sample(-1e-4, -1e-4, 200.0, 200.0), Z) == pytest.approx(0.0, abs=1e-9)


def test_degenerate_center_condition():
    # the I0 coefficient vanishes when kappa1 A1 = -kappa2 A2
    with pytest.raises(ConditionDegenerateError):
        solve_I0(point_sample(-1e-4, 2e-4, 200.0, 100.0), Z)


def test_field_shape_and_center(base):
    assert base.shape == (15, 17)
    assert base.sample.p.shape == (15, 17, 3)


def test_normal_residual_before_after(base, moved):
    assert normal_residual(base) <= 1e-12
    assert normal_residual(moved) <= 1e-12


def test_tangential_residual_decay(default_setup, default_map):
    params, center = default_setup
    grids = [(7, 8), (14, 16), (28, 32)]
    for lmap in (None, default_map):
        res = np.array([equilibrium_residuals(build_field(params, *g, Z, center=center, lmap=lmap))[:2]
                        for g in grids])
        assert np.all(res[:-1] / res[1:] >= 3.0), res


def test_tangential_residual_fine_grid(default_setup):
    params, center = default_setup
    r = equilibrium_residuals(build_field(params, 56, 64, Z, center=center))
    assert r[0] <= 1e-3 and r[1] <= 1e-3 and r[2] <= 1e-12


def test_compatibility_decay_and_level(default_setup):
    params, center = default_setup
    res = [compatibility_residual(build_field(params, *g, Z, center=center)) for g in [(7, 8), (14, 16), (28, 32)]]
    assert res[0] / res[1] >= 3.0 and res[1] / res[2] >= 3.0
    assert res[2] <= 1e-3


def test_compatibility_independent_of_I0(base):
    r = compatibility_residual(base)
    for I0 in (0.0, 1e5, -3e6):
        assert compatibility_residual(with_I0(base, I0)) == pytest.approx(r, rel=1e-9)


def sphere_field(T=3.0, R=2500.0):
    def sphere(u, v):
        return R * np.stack([np.cos(u) / np.cosh(v), np.sin(u) / np.cosh(v), np.tanh(v)], axis=-1)

    xi, eta = np.linspace(-0.5, 0.5, 11), np.linspace(0.1, 0.7, 13)
    X, E = np.meshgrid(xi, eta, indexing="ij")
    p, n, k1, k2, A1, A2 = fd_frame(sphere, X, E)
    s = isothermic_sample(SurfaceSample(X, E, p, n, k1, k2, A1, A2, np.log(np.abs(k1 * A1))))
    z = float(-2.0 * T / R * np.sign(np.mean(k1)))
    return MembraneField(xi, eta, s, z, 0.0, np.full(X.shape, T), np.full(X.shape, T))


def test_sphere_uniform_stress():
    fld = sphere_field()
    a, b, c = equilibrium_residuals(fld)
    assert a == 0.0 and b == 0.0
    assert c <= 1e-6
    assert compatibility_residual(fld, relative=False) <= 1e-4 * abs(fld.Z)


def test_label_self_test(base, moved):
    for f in (base, moved):
        rep = check_label_convention(f)
        assert max(rep["direct"]) < max(rep["swapped"])


def test_label_self_test_catches_swap(base):
    swapped = replace(base, T1=base.T2, T2=base.T1)
    with pytest.raises(AssertionError):
        check_label_convention(swapped)
    assert tangential_residuals(swapped) == tangential_residuals(base, swap=True)


def test_transform_identity_returns_same_field(base):
    out = transform_field(base, identity())
    assert out is base
    assert out.I0 == base.I0


def test_transform_euclidean_invariance(base):
    out = transform_field(base, make_euclidean(rotation_matrix([1, 2, 3], 0.7), [100.0, 200.0, 300.0]))
    for k in ("kappa1", "kappa2", "A1", "A2", "theta"):
        a, b = getattr(out.sample, k), getattr(base.sample, k)
        assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(b))
    assert np.max(np.abs(out.T1 - base.T1)) <= 1e-10 * np.max(np.abs(base.T1))
    assert np.max(np.abs(out.T2 - base.T2)) <= 1e-10 * np.max(np.abs(base.T2))
    assert out.I0 == pytest.approx(base.I0, rel=1e-10)


def test_transformed_I0_resolved(moved):
    c = moved.center
    T1, T2 = membrane_forces(c, Z, moved.I0)
    assert abs(T1 * c.A2 - T2 * c.A1) <= 1e-10 * abs(T1 * c.A2)
    assert moved.I0 != pytest.approx(-76864.8, rel=0.05)


def test_transformed_field_isothermic_against_point_cloud(default_setup, default_map, moved):
    # oracle: curvatures and speeds differenced from the mapped points alone
    params, _ = default_setup
    X, E = np.meshgrid(moved.xi, moved.eta, indexing="ij")
    p, n, k1, k2, A1, A2 = point_cloud_frame(params, default_map, X, E)
    assert np.max(np.abs(k1 * A1 - k2 * A2) / np.abs(k1 * A1)) <= 1e-4
    s = moved.sample
    np.testing.assert_allclose(s.p, p, rtol=0, atol=1e-6 * np.abs(p).max())
    np.testing.assert_allclose(s.kappa1, k1, rtol=1e-4)
    np.testing.assert_allclose(s.kappa2, k2, rtol=1e-4)
    np.testing.assert_allclose(s.A1, A1, rtol=1e-4)
    np.testing.assert_allclose(s.A2, A2, rtol=1e-4)


def test_transformed_theta_matches_third_form(default_setup, default_map, moved):
    params, _ = default_setup
    X, E = np.meshgrid(moved.xi, moved.eta, indexing="ij")
    g11, g12, g22 = third_fundamental_form(params, default_map, X, E)
    e = np.exp(2 * moved.sample.theta)
    assert np.max(np.abs(g11 / e - 1)) <= 1e-3
    assert np.max(np.abs(g22 / e - 1)) <= 1e-3
    assert np.max(np.abs(g12) / e) <= 1e-3


def test_offset_transform_keeps_theta_and_solves(base):
    d = 300.0
    out = transform_field(base, make_offset(d))
    np.testing.assert_allclose(out.sample.theta, base.sample.theta, atol=1e-14)
    np.testing.assert_allclose(out.sample.kappa1, base.sample.kappa1 / (1 - d * base.sample.kappa1), rtol=1e-12)
    assert normal_residual(out) <= 1e-12


def test_off_grid_evaluation_matches_grid(base):
    s, T1, T2 = base.at(base.xi[3], base.eta[5])
    assert T1 == pytest.approx(base.T1[3, 5], rel=1e-12)
    assert T2 == pytest.approx(base.T2[3, 5], rel=1e-12)


def test_grid_uniformity_required(base):
    bad = replace(base, xi=np.r_[base.xi[:-1], base.xi[-1] + 0.1])
    with pytest.raises(ValueError):
        tangential_residuals(bad)


def test_parameter_grid_matches_field(default_setup, base):
    xi, eta = parameter_grid(default_setup[0], 14, 16)
    np.testing.assert_array_equal(xi, base.xi)
    np.testing.assert_array_equal(eta, base.eta)
