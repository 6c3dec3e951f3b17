from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laguerre_gridshell.cyclide import (
    CyclideParams, FrameInconsistencyError, SingularParametrizationError, angle_to_conformal,
    conformal_to_angle, d_dxi, eval_frame, eval_point, fd_frame, parameter_grid, sample_grid)
from laguerre_gridshell.membrane import third_fundamental_form


def test_c0_relation():
    p = CyclideParams(2.144)
    assert abs(p.a0 ** 2 - p.c0 ** 2 - 1.0) <= 1e-12


def test_params_validation():
    with pytest.raises(ValueError):
        CyclideParams(1.0)
    with pytest.raises(ValueError):
        CyclideParams(2.0, xi_range=(0.1, -0.1))
    with pytest.raises(ValueError):
        CyclideParams(2.0, scale=0.0)


def test_origin_point_hand_value():
    # at (0, 0) the x-coordinate reduces to 1/(2(a0 - c0)) - a0/4 = a0/4 + c0/2
    a0 = 2.144
    c0 = np.sqrt(a0 * a0 - 1.0)
    p = eval_point(CyclideParams(a0), 0.0, 0.0)
    np.testing.assert_allclose(p, [a0 / 4 + c0 / 2, 0.0, 0.0], atol=1e-14)
    assert abs(p[0] - 1.4843) < 5e-5


def test_scale_multiplies_points():
    p1 = eval_point(CyclideParams(2.144), 0.2, 0.3)
    p2 = eval_point(CyclideParams(2.144, scale=10000.0), 0.2, 0.3)
    np.testing.assert_allclose(p2, 10000.0 * p1, rtol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.4, 0.4), st.floats(0.0, 0.6))
def test_symmetry_in_xi(xi, eta):
    p = CyclideParams(2.144)
    a, b = eval_point(p, xi, eta), eval_point(p, -xi, eta)
    assert abs(a[1] + b[1]) <= 1e-14
    assert abs(a[0] - b[0]) <= 1e-14 and abs(a[2] - b[2]) <= 1e-14


def test_z_vanishes_on_eta_zero():
    xi = np.linspace(-0.3, 0.3, 7)
    assert np.all(eval_point(CyclideParams(2.144), xi, 0.0)[:, 2] == 0.0)


def test_singular_denominator():
    with pytest.raises(SingularParametrizationError):
        eval_point(CyclideParams(1e13), 0.0, 0.0)


def test_conformal_angle_round_trip():
    phi = np.linspace(0, 0.45 * np.pi, 9)
    np.testing.assert_allclose(conformal_to_angle(angle_to_conformal(phi)), phi, atol=1e-14)


def test_center_isothermic(default_setup):
    params, center = default_setup
    s = eval_frame(params, *center)
    assert abs(s.kappa1 * s.A1 / (s.kappa2 * s.A2) - 1.0) <= 1e-4
    assert abs(np.linalg.norm(s.n) - 1.0) <= 1e-10


def test_whole_patch_isothermic(default_setup):
    params, _ = default_setup
    s = sample_grid(params, 14, 16)
    assert np.max(s.isothermic_mismatch()) <= 1e-4
    assert np.max(np.abs(np.linalg.norm(s.n, axis=-1) - 1.0)) <= 1e-10


def test_sphere_harness():
    # conformal curvature-line (Mercator) parametrization of a sphere of radius R
    R = 2.5

    def sphere(u, v):
        return R * np.stack([np.cos(u) / np.cosh(v), np.sin(u) / np.cosh(v), np.tanh(v)], axis=-1)

    u, v = np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-0.8, 0.8, 5))
    _, n, k1, k2, A1, A2 = fd_frame(sphere, u, v)
    np.testing.assert_allclose(np.abs(k1), 1 / R, rtol=1e-6)
    np.testing.assert_allclose(np.abs(k2), 1 / R, rtol=1e-6)
    assert np.all(np.sign(k1) == np.sign(k2))
    np.testing.assert_allclose(A1, A2, rtol=1e-7)


def test_analytic_speed_matches_difference_quotient(unit_params):
    h = 1e-5
    xi, eta = np.meshgrid(np.linspace(-0.3, 0.3, 5), np.linspace(0.0, 0.5, 5))
    fd = (eval_point(unit_params, xi + h, eta) - eval_point(unit_params, xi - h, eta)) / (2 * h)
    an = d_dxi(unit_params, xi, eta)
    np.testing.assert_allclose(an, fd, atol=1e-9)
    s = eval_frame(unit_params, xi, eta)
    np.testing.assert_allclose(s.A1, np.linalg.norm(fd, axis=-1), rtol=1e-9)


def test_curvature_lines_orthogonal(unit_params):
    h = 1e-5
    X, E = np.meshgrid(*parameter_grid(unit_params, 14, 16), indexing="ij")
    rx = (eval_point(unit_params, X + h, E) - eval_point(unit_params, X - h, E)) / (2 * h)
    re = (eval_point(unit_params, X, E + h) - eval_point(unit_params, X, E - h)) / (2 * h)
    dot = np.abs(np.einsum("...i,...i", rx, re))
    assert np.all(dot <= 1e-6 * np.linalg.norm(rx, axis=-1) * np.linalg.norm(re, axis=-1))


def test_third_form_conformal(default_setup):
    params, _ = default_setup
    X, E = np.meshgrid(*parameter_grid(params, 14, 16), indexing="ij")
    s = eval_frame(params, X, E)
    g11, g12, g22 = third_fundamental_form(params, None, X, E)
    e = np.exp(2 * s.theta)
    assert np.max(np.abs(g12) / e) <= 1e-3
    assert np.max(np.abs(g11 - g22) / e) <= 1e-3
    assert np.max(np.abs(g11 / e - 1.0)) <= 1e-3


def test_fd_convergence(unit_params):
    xi, eta = np.array([-0.2, 0.0, 0.25]), np.array([0.1, 0.3, 0.45])
    hs = [4e-2, 2e-2, 1e-2]
    k = [eval_frame(unit_params, xi, eta, h, check=False) for h in hs]
    for attr in ("kappa1", "kappa2"):
        d1 = np.abs(getattr(k[0], attr) - getattr(k[1], attr))
        d2 = np.abs(getattr(k[1], attr) - getattr(k[2], attr))
        assert np.all(d1 / d2 >= 3.0)


def test_frame_inconsistency_detected(unit_params):
    with pytest.raises(FrameInconsistencyError):
        eval_frame(unit_params, 0.2, 0.4, h=0.2)


def test_sample_grid_counts_and_spacing(default_setup):
    params, _ = default_setup
    s = sample_grid(params, 14, 16)
    assert s.shape == (15, 17) and s.kappa1.size == 255
    xi, _ = parameter_grid(params, 14, 16)
    np.testing.assert_allclose(np.diff(xi), 0.2 * np.pi / 14, rtol=1e-12)
    with pytest.raises(ValueError):
        sample_grid(params, 1, 16)


def test_sample_grid_mirror_pairs(unit_params):
    s = sample_grid(unit_params, 2, 4)
    np.testing.assert_allclose(s.p[0, :, 1], -s.p[2, :, 1], atol=1e-15)
    np.testing.assert_allclose(s.p[1, :, 1], 0.0, atol=1e-15)
