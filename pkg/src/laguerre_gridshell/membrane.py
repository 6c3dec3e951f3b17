"""Closed-form membrane forces of the cyclide under uniform normal pressure.

Index 1 refers to the xi curvature lines and index 2 to the eta lines, for
curvatures, speeds and forces alike.  ``T1`` is the normal force per unit
length acting along the xi lines, ``T2`` the one along the eta lines; the
pressure ``Z`` acts along the surface normal ``n``.

Inside a :class:`MembraneField` the speeds are stored in L-isothermic form,
``A_i = exp(theta) / |kappa_i|``, so that ``kappa1 A1 == kappa2 A2`` holds to
round-off and normal equilibrium is an exact identity.  For the untransformed
cyclide this differs from the finite-difference speed by ~1e-8 relative;
after a Laguerre map it is the only available definition.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .cyclide import FD_STEP, CyclideParams, SurfaceSample, eval_frame, fd_frame, parameter_grid
from .laguerre import ContactElement, LaguerreMap, transform_curvatures, transform_points

logger = logging.getLogger(__name__)


class SingularFieldError(ValueError):
    """Flat point or otherwise unusable frame."""


class ConditionDegenerateError(ValueError):
    """The center condition does not determine I0."""


def membrane_forces(s: SurfaceSample, Z: float, I0: float):
    """``(T1, T2)`` in N/mm for pressure ``Z`` (N/mm^2) and self-stress parameter ``I0`` (N)."""
    k1, k2, A1, A2 = (np.asarray(v, dtype=float) for v in (s.kappa1, s.kappa2, s.A1, s.A2))
    if np.any(k1 == 0) or np.any(k2 == 0) or np.any(A1 == 0) or np.any(A2 == 0):
        raise SingularFieldError("zero curvature or speed: flat or degenerate point")
    T1 = -Z / (2.0 * k2) - I0 / (k2 * A2 ** 2)
    T2 = -Z / (2.0 * k1) * (1.0 - (A1 - A2) ** 2 / A1 ** 2) + I0 / (k1 * A1 ** 2)
    return T1, T2


def solve_I0(center: SurfaceSample, Z: float) -> float:
    """I0 such that ``T1 A2 == T2 A1`` at ``center``.

    The condition is affine in I0; its slope ``-(1/(kappa2 A2) + 1/(kappa1 A1))``
    vanishes when ``kappa1 A1 == -kappa2 A2``.
    """
    T1a, T2a = membrane_forces(center, Z, 0.0)
    A1, A2 = float(center.A1), float(center.A2)
    k1, k2 = float(center.kappa1), float(center.kappa2)
    g0 = float(T1a * A2 - T2a * A1)
    slope = -1.0 / (k2 * A2) - 1.0 / (k1 * A1)
    ref = 1.0 / abs(k1 * A1) + 1.0 / abs(k2 * A2)
    if abs(slope) <= 1e-10 * ref:
        raise ConditionDegenerateError("center condition T1*A2 = T2*A1 is independent of I0")
    return -g0 / slope


def isothermic_sample(s: SurfaceSample) -> SurfaceSample:
    """Replace the speeds by ``exp(theta) / |kappa_i|``."""
    k1 = np.asarray(s.kappa1)
    k2 = np.asarray(s.kappa2)
    if np.any(k1 * k2 <= 0):
        raise SingularFieldError("membrane formulas need an elliptic frame (kappa1 kappa2 > 0)")
    e = np.exp(s.theta)
    return replace(s, A1=e / np.abs(k1), A2=e / np.abs(k2))


def transform_sample(s: SurfaceSample, lmap: LaguerreMap) -> SurfaceSample:
    """Frame after a Laguerre map, from contact elements and curvature spheres."""
    p, n, norm = transform_points(lmap, s.p, s.n)
    k1, k2, _ = transform_curvatures(lmap, ContactElement(s.p, s.n), s.kappa1, s.kappa2)
    theta = np.asarray(s.theta) - np.log(norm)
    if np.any(k1 * k2 <= 0):
        raise SingularFieldError("transformed frame is not elliptic")
    e = np.exp(theta)
    return SurfaceSample(xi=s.xi, eta=s.eta, p=p, n=n, kappa1=k1, kappa2=k2,
                         A1=e / np.abs(k1), A2=e / np.abs(k2), theta=theta)


@dataclass(frozen=True)
class MembraneField:
    """Membrane forces on a parameter grid (xi index first).

    ``params``/``lmap``/``h`` record how the samples were produced so that the
    same field can be evaluated off-grid with :meth:`at`.
    """

    xi: np.ndarray
    eta: np.ndarray
    sample: SurfaceSample
    Z: float
    I0: float
    T1: np.ndarray
    T2: np.ndarray
    center: SurfaceSample | None = None
    params: CyclideParams | None = None
    lmap: LaguerreMap | None = None
    h: float = FD_STEP

    @property
    def shape(self):
        return self.T1.shape

    def at(self, xi, eta):
        """``(sample, T1, T2)`` at arbitrary parameters, with this field's I0."""
        if self.params is None:
            raise ValueError("field has no surface provenance; cannot evaluate off-grid")
        s = frame_at(self.params, xi, eta, self.lmap, self.h)
        T1, T2 = membrane_forces(s, self.Z, self.I0)
        return s, T1, T2


def frame_at(params: CyclideParams, xi, eta, lmap: LaguerreMap | None = None, h: float = FD_STEP):
    s = isothermic_sample(eval_frame(params, xi, eta, h))
    if lmap is not None and not lmap.is_identity:
        s = transform_sample(s, lmap)
    return s


def _mapped_surface(params: CyclideParams, lmap: LaguerreMap | None, h: float):
    def fun(xi, eta):
        s = eval_frame(params, xi, eta, h, check=False)
        if lmap is None or lmap.is_identity:
            return s.p, s.n
        p, n, _ = transform_points(lmap, s.p, s.n)
        return p, n
    return fun


def point_cloud_frame(params: CyclideParams, lmap: LaguerreMap | None, xi, eta,
                      H: float = 1e-3, h: float = FD_STEP):
    """Frame of the mapped surface by differencing mapped points only.

    Independent of the curvature-sphere route; ``H`` must be well above the
    inner step ``h`` because the mapped points inherit FD normals.
    Returns ``(p, n, kappa1, kappa2, A1, A2)``.
    """
    fun = _mapped_surface(params, lmap, h)
    return fd_frame(lambda a, b: fun(a, b)[0], xi, eta, H)


def third_fundamental_form(params: CyclideParams, lmap: LaguerreMap | None, xi, eta,
                           H: float = 1e-3, h: float = FD_STEP):
    """``(n_xi.n_xi, n_xi.n_eta, n_eta.n_eta)`` from central differences of mapped normals."""
    fun = _mapped_surface(params, lmap, h)
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    nx = (fun(xi + H, eta)[1] - fun(xi - H, eta)[1]) / (2 * H)
    ne = (fun(xi, eta + H)[1] - fun(xi, eta - H)[1]) / (2 * H)
    dot = lambda a, b: np.einsum("...i,...i", a, b)  # noqa: E731
    return dot(nx, nx), dot(nx, ne), dot(ne, ne)


def build_field(params: CyclideParams, n_xi: int, n_eta: int, Z: float,
                center: tuple[float, float] | None = None, h: float = FD_STEP,
                lmap: LaguerreMap | None = None) -> MembraneField:
    """Field on the ``(n_xi + 1) x (n_eta + 1)`` grid with I0 fixed at ``center``.

    ``center`` defaults to the middle of the patch.  With ``lmap`` the field is
    that of the transformed surface, I0 re-solved on the transformed center.
    """
    xi, eta = parameter_grid(params, n_xi, n_eta)
    if center is None:
        center = (0.5 * sum(params.xi_range), 0.5 * sum(params.eta_range))
    X, E = np.meshgrid(xi, eta, indexing="ij")
    s = frame_at(params, X, E, lmap, h)
    c = frame_at(params, center[0], center[1], lmap, h)
    I0 = solve_I0(c, Z)
    T1, T2 = membrane_forces(s, Z, I0)
    return MembraneField(xi, eta, s, float(Z), I0, T1, T2, c, params, lmap, h)


def with_I0(field: MembraneField, I0: float) -> MembraneField:
    """Same geometry and load, forces recomputed for a prescribed I0."""
    T1, T2 = membrane_forces(field.sample, field.Z, I0)
    return replace(field, I0=float(I0), T1=T1, T2=T2)


def transform_field(field: MembraneField, lmap: LaguerreMap) -> MembraneField:
    """Carry the whole field through ``lmap`` and re-solve I0 on the new center."""
    if lmap.is_identity:
        return field
    s = transform_sample(field.sample, lmap)
    c = transform_sample(field.center, lmap) if field.center is not None else None
    if c is None:
        raise ValueError("field has no center sample to re-solve I0")
    I0 = solve_I0(c, field.Z)
    T1, T2 = membrane_forces(s, field.Z, I0)
    total = lmap if field.lmap is None else field.lmap.then(lmap)
    return MembraneField(field.xi, field.eta, s, field.Z, I0, T1, T2, c,
                         field.params, total, field.h)


# ---------------------------------------------------------------------------
# residual checks on the grid


def _steps(field: MembraneField):
    dxi = np.diff(field.xi)
    deta = np.diff(field.eta)
    if not (np.allclose(dxi, dxi[0]) and np.allclose(deta, deta[0])):
        raise ValueError("residual checks need a uniform parameter grid")
    if len(field.xi) < 3 or len(field.eta) < 3:
        raise ValueError("residual checks need interior samples")
    return dxi[0], deta[0]


def _dxi(a, step):
    return (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * step)


def _deta(a, step):
    return (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * step)


def _dxieta(a, sx, se):
    return (a[2:, 2:] - a[2:, :-2] - a[:-2, 2:] + a[:-2, :-2]) / (4 * sx * se)


def _inner(a):
    return a[1:-1, 1:-1]


def tangential_residuals(field: MembraneField, swap: bool = False):
    """Relative residuals of the two tangential equilibrium equations.

    Each is ``max|sum of terms| / max(sum of |terms|)`` over interior samples.
    ``swap=True`` exchanges the roles of T1 and T2 (label self-test).
    """
    sx, se = _steps(field)
    T1, T2 = (field.T2, field.T1) if swap else (field.T1, field.T2)
    lA1 = np.log(field.sample.A1)
    lA2 = np.log(field.sample.A2)
    a1, a2 = _dxi(T1, sx), _dxi(lA2, sx) * _inner(T1 - T2)
    b1, b2 = _deta(T2, se), _deta(lA1, se) * _inner(T2 - T1)
    return _relative(a1 + a2, np.abs(a1) + np.abs(a2)), _relative(b1 + b2, np.abs(b1) + np.abs(b2))


def _relative(res, scale) -> float:
    # a field with no gradients at all (uniform stress) has nothing to normalize by
    num, den = float(np.max(np.abs(res))), float(np.max(scale))
    return num / den if den > 0 else num


def normal_residual(field: MembraneField) -> float:
    s = field.sample
    t1 = s.kappa1 * field.T1
    t2 = s.kappa2 * field.T2
    return float(np.max(np.abs(t1 + t2 + field.Z)) / np.max(np.abs(t1) + np.abs(t2) + abs(field.Z)))


def equilibrium_residuals(field: MembraneField):
    """``(tangential xi, tangential eta, normal)`` relative residuals."""
    res_a, res_b = tangential_residuals(field)
    return res_a, res_b, normal_residual(field)


def compatibility_residual(field: MembraneField, relative: bool = True) -> float:
    """Residual of the integrability condition ``mu T1 + nu T2 = 0``.

    The relative value is normalized by ``|Z|`` times the largest sum of
    absolute log-derivative terms entering the coefficients, so it does not
    depend on I0.  ``relative=False`` returns ``max|mu T1 + nu T2|``.
    """
    sx, se = _steps(field)
    s = field.sample
    lk1 = np.log(np.abs(s.kappa1))
    lk2 = np.log(np.abs(s.kappa2))
    lA1 = np.log(s.A1)
    lA2 = np.log(s.A2)
    L = _dxieta(lA1 + lk1 - lA2 - lk2, sx, se)
    terms = [_dxieta(lk1 + lk2, sx, se),
             _deta(lA1, se) * _dxi(lk1, sx),
             _dxi(lA2, sx) * _deta(lk2, se),
             -_dxi(lk1, sx) * _deta(lk2, se)]
    ups = sum(terms)
    k1, k2 = _inner(s.kappa1), _inner(s.kappa2)
    mu = k1 * (L + ups)
    nu = -k2 * (L - ups)
    res = mu * _inner(field.T1) + nu * _inner(field.T2)
    if not relative:
        return float(np.max(np.abs(res)))
    return _relative(res, abs(field.Z) * (sum(np.abs(t) for t in terms) + np.abs(L)))


def check_label_convention(field: MembraneField) -> dict:
    """Compare tangential residuals under the implemented and the swapped force labels.

    Raises if the swapped assignment fits the equilibrium equations better.
    """
    direct = tangential_residuals(field)
    swapped = tangential_residuals(field, swap=True)
    report = {"direct": direct, "swapped": swapped}
    if max(direct) >= max(swapped):
        raise AssertionError(f"force labels inconsistent with equilibrium: {report}")
    logger.debug("label self-test: %s", report)
    return report
