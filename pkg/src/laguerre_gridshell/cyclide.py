"""Generalized Dupin cyclide patch and its curvature-line frame.

The surface is

    r = cos(xi) / (2 (a0 cosh(eta) - c0 cos(xi)))
        * (cos(xi) cosh(eta), a0 sin(xi) cosh(eta), c0 cos(xi) sinh(eta))
        + (-a0 / 4, xi / 2, 0)

with ``a0**2 - c0**2 == 1``.  Writing ``cos(phi) = sech(eta)`` and
``sin(phi) = tanh(eta)`` gives the familiar trigonometric form in the circle
angle ``phi``; the two describe the same point set.  ``(xi, eta)`` are
curvature-line parameters in which the Gauss map is conformal
(``kappa1 * A1 == kappa2 * A2``), which the membrane formulas rely on.
``(xi, phi)`` are curvature-line parameters too, but not conformal ones.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

#: Central-difference step in parameter space.
FD_STEP = 1e-4

#: Relative |kappa1 A1 - kappa2 A2| above which a frame is rejected.
FRAME_CONSISTENCY_TOL = 1e-3


class SingularParametrizationError(ValueError):
    pass


class FrameInconsistencyError(ValueError):
    pass


def angle_to_conformal(phi):
    """Circle angle ``phi`` -> conformal parameter ``eta`` (inverse Gudermannian)."""
    return np.arcsinh(np.tan(phi))


def conformal_to_angle(eta):
    return np.arctan(np.sinh(eta))


@dataclass(frozen=True)
class CyclideParams:
    """Shape constant ``a0``, the patch in ``(xi, eta)`` and a length scale (mm per unit)."""

    a0: float = 2.144
    xi_range: tuple[float, float] = (-0.1 * np.pi, 0.1 * np.pi)
    eta_range: tuple[float, float] = (0.0, float(angle_to_conformal(0.15 * np.pi)))
    scale: float = 1.0

    def __post_init__(self):
        if not self.a0 > 1.0:
            raise ValueError(f"a0 must exceed 1 so that c0 = sqrt(a0^2 - 1) is real, got {self.a0}")
        for name in ("xi_range", "eta_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be increasing, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def c0(self) -> float:
        return float(np.sqrt(self.a0 ** 2 - 1.0))

    @classmethod
    def from_angles(cls, a0=2.144, xi_range=(-0.1 * np.pi, 0.1 * np.pi),
                    phi_range=(0.0, 0.15 * np.pi), scale=1.0) -> "CyclideParams":
        """Patch given in the circle angle ``phi`` instead of ``eta``."""
        eta = tuple(float(angle_to_conformal(v)) for v in phi_range)
        return cls(a0, tuple(xi_range), eta, scale)


def _denominator(params: CyclideParams, xi, eta):
    den = 2.0 * (params.a0 * np.cosh(eta) - params.c0 * np.cos(xi))
    if np.any(den <= 1e-12):
        raise SingularParametrizationError("denominator of the cyclide parametrization vanishes")
    return den


def _point_unit(params: CyclideParams, xi, eta):
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    a0, c0 = params.a0, params.c0
    c, s = np.cos(xi), np.sin(xi)
    ch, sh = np.cosh(eta), np.sinh(eta)
    f = c / _denominator(params, xi, eta)
    return np.stack([f * c * ch - a0 / 4.0,
                     f * a0 * s * ch + xi / 2.0,
                     f * c0 * c * sh], axis=-1)


def eval_point(params: CyclideParams, xi, eta):
    """Surface point(s) in mm (model units times ``params.scale``)."""
    return _point_unit(params, xi, eta) * params.scale


def d_dxi(params: CyclideParams, xi, eta):
    """Closed-form ``dr/dxi`` in mm per unit parameter."""
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    a0, c0 = params.a0, params.c0
    c, s = np.cos(xi), np.sin(xi)
    ch, sh = np.cosh(eta), np.sinh(eta)
    den = _denominator(params, xi, eta) / 2.0
    f = c / (2.0 * den)
    # d/dxi [cos / (2 (a0 ch - c0 cos))] = -a0 ch sin / (2 den^2)
    df = -a0 * ch * s / (2.0 * den ** 2)
    dr = np.stack([df * c * ch - f * s * ch,
                   df * a0 * s * ch + f * a0 * c * ch + 0.5,
                   df * c0 * c * sh - f * c0 * s * sh], axis=-1)
    return dr * params.scale


@dataclass(frozen=True)
class SurfaceSample:
    """Curvature-line frame at one or many parameter pairs.

    All fields broadcast together; vector fields carry a trailing axis of 3.
    ``theta = log|kappa1 * A1|`` is the log conformal factor of the third
    fundamental form.
    """

    xi: np.ndarray
    eta: np.ndarray
    p: np.ndarray
    n: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    theta: np.ndarray

    def __getitem__(self, idx) -> "SurfaceSample":
        return SurfaceSample(**{k: np.asarray(getattr(self, k))[idx] for k in self.__dataclass_fields__})

    @property
    def shape(self):
        return np.shape(self.kappa1)

    def isothermic_mismatch(self):
        """Relative ``|kappa1 A1 - kappa2 A2| / |kappa1 A1|``."""
        e1 = self.kappa1 * self.A1
        return np.abs(e1 - self.kappa2 * self.A2) / np.abs(e1)


def fd_frame(fun: Callable, xi, eta, h: float = FD_STEP, r_xi: Callable | None = None):
    """Point, normal, curvatures and speeds of a curvature-line parametrization by central differences.

    ``fun(xi, eta)`` returns points with a trailing axis of 3.  When the
    closed-form ``r_xi`` is supplied it replaces the difference quotient for
    the first xi-derivative.  Curvatures use ``r_ii . n / |r_i|^2``, which is
    exact only because the coordinate lines are curvature lines.
    """
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    p = fun(xi, eta)
    pxp, pxm = fun(xi + h, eta), fun(xi - h, eta)
    pep, pem = fun(xi, eta + h), fun(xi, eta - h)
    rx = r_xi(xi, eta) if r_xi is not None else (pxp - pxm) / (2 * h)
    re = (pep - pem) / (2 * h)
    rxx = (pxp - 2 * p + pxm) / h ** 2
    ree = (pep - 2 * p + pem) / h ** 2
    n = np.cross(rx, re)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    A1 = np.linalg.norm(rx, axis=-1)
    A2 = np.linalg.norm(re, axis=-1)
    k1 = np.einsum("...i,...i", rxx, n) / A1 ** 2
    k2 = np.einsum("...i,...i", ree, n) / A2 ** 2
    return p, n, k1, k2, A1, A2


def eval_frame(params: CyclideParams, xi, eta, h: float = FD_STEP, check: bool = True) -> SurfaceSample:
    """Frame of the cyclide at ``(xi, eta)``.

    ``A1`` is analytic; ``A2`` and both curvatures come from central
    differences of the unit-scale surface.  Lengths are then scaled to mm and
    curvatures to 1/mm.
    """
    unit = replace(params, scale=1.0)
    p, n, k1, k2, A1, A2 = fd_frame(lambda a, b: _point_unit(params, a, b), xi, eta, h,
                                    r_xi=lambda a, b: d_dxi(unit, a, b))
    S = params.scale
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    sample = SurfaceSample(xi=xi, eta=eta, p=p * S, n=n, kappa1=k1 / S, kappa2=k2 / S,
                           A1=A1 * S, A2=A2 * S, theta=np.log(np.abs(k1 * A1)))
    if check:
        bad = sample.isothermic_mismatch()
        if np.any(bad > FRAME_CONSISTENCY_TOL):
            raise FrameInconsistencyError(
                f"kappa1*A1 and kappa2*A2 differ by {np.max(bad):.2e} (relative); "
                "check the FD step or the parametrization")
    return sample


def parameter_grid(params: CyclideParams, n_xi: int, n_eta: int):
    if n_xi < 1 or n_eta < 1:
        raise ValueError("grid needs at least one division per direction")
    xi = np.linspace(*params.xi_range, n_xi + 1)
    eta = np.linspace(*params.eta_range, n_eta + 1)
    return xi, eta


def sample_grid(params: CyclideParams, n_xi: int, n_eta: int, h: float = FD_STEP) -> SurfaceSample:
    """Frames on the uniform ``(n_xi + 1) x (n_eta + 1)`` parameter grid (xi index first)."""
    if n_xi < 2 or n_eta < 2:
        raise ValueError("sample_grid needs n_xi, n_eta >= 2")
    xi, eta = parameter_grid(params, n_xi, n_eta)
    X, E = np.meshgrid(xi, eta, indexing="ij")
    return eval_frame(params, X, E, h)
