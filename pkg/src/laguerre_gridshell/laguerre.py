"""Laguerre geometry in the cyclographic model.

Oriented spheres are 4-vectors ``(center, signed radius)`` with the
pseudo-Euclidean (pe) metric of signature (+, +, +, -).  A homogeneous weight
``w`` distinguishes spheres and points (``w = 1``) from oriented plane
directions (``w = 0``).  A Laguerre map acts on the homogeneous 5-vector as

    (w, x) -> (w, w * t + lam * D @ x)

with ``D`` pseudo-orthogonal (``D.T @ E_PE @ D == E_PE``).

Sign convention: the oriented sphere ``(c, r)`` touches the surface point
``p`` with unit normal ``n`` when ``c = p - r * n``.  The tangent plane is
the null direction ``(n, -1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

E_PE = np.diag([1.0, 1.0, 1.0, -1.0])

#: Bound on max|D^T E D - E| accepted after construction or composition.
PSEUDO_ORTHOGONAL_TOL = 1e-12

_PLANE_AXES = {"x2x3": 0, "x3x1": 1, "x1x2": 2}


class LaguerreError(ValueError):
    """Invalid Laguerre map or degenerate transformation."""


class SingularTransformError(LaguerreError):
    """The image of a contact element or curvature sphere degenerates."""


def pe_dot(x, y):
    """pe-inner product ``x1*y1 + x2*y2 + x3*y3 - x4*y4`` (broadcasts)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]
            + x[..., 2] * y[..., 2] - x[..., 3] * y[..., 3])


def pe_norm_sq(x):
    """Squared pe-norm.  Zero means oriented contact, negative is timelike."""
    return pe_dot(x, x)


@dataclass(frozen=True)
class CyclographicVector:
    """Homogeneous 5-vector ``(w, c, r)`` of an oriented sphere, point or plane."""

    w: int
    c: np.ndarray
    r: float

    def __post_init__(self):
        if self.w not in (0, 1):
            raise ValueError(f"weight must be 0 or 1, got {self.w}")
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(3))
        object.__setattr__(self, "r", float(self.r))

    @classmethod
    def sphere(cls, center, radius: float) -> "CyclographicVector":
        return cls(1, center, radius)

    @classmethod
    def point(cls, p) -> "CyclographicVector":
        return cls(1, p, 0.0)

    @classmethod
    def plane(cls, normal, x4: float = -1.0) -> "CyclographicVector":
        return cls(0, normal, x4)

    @classmethod
    def from_array(cls, v) -> "CyclographicVector":
        v = np.asarray(v, dtype=float)
        return cls(int(round(v[0])), v[1:4], v[4])

    def as_array(self) -> np.ndarray:
        return np.concatenate(([float(self.w)], self.c, [self.r]))

    @property
    def x(self) -> np.ndarray:
        """The 4-vector part ``(c, r)``."""
        return np.append(self.c, self.r)


@dataclass(frozen=True)
class LaguerreMap:
    """Laguerre transformation ``(D, t, lam)``.

    Build instances with the ``make_*`` generators and :func:`compose`; the
    constructor validates pseudo-orthogonality of ``D``.
    """

    D: np.ndarray = field(default_factory=lambda: np.eye(4))
    t: np.ndarray = field(default_factory=lambda: np.zeros(4))
    lam: float = 1.0

    def __post_init__(self):
        D = np.array(self.D, dtype=float).reshape(4, 4)
        t = np.array(self.t, dtype=float).reshape(4)
        D.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "lam", float(self.lam))
        if self.lam == 0.0 or not np.isfinite(self.lam):
            raise LaguerreError(f"similarity factor must be finite and nonzero, got {self.lam}")
        res = self.residual()
        if res > PSEUDO_ORTHOGONAL_TOL:
            raise LaguerreError(f"D is not pseudo-orthogonal: residual {res:.3e}")

    def residual(self) -> float:
        """``max|D^T E_pe D - E_pe|``."""
        return float(np.max(np.abs(self.D.T @ E_PE @ self.D - E_PE)))

    @property
    def matrix(self) -> np.ndarray:
        """5x5 homogeneous matrix."""
        M = np.zeros((5, 5))
        M[0, 0] = 1.0
        M[1:, 0] = self.t
        M[1:, 1:] = self.lam * self.D
        return M

    @property
    def is_identity(self) -> bool:
        return (self.lam == 1.0 and not self.t.any()
                and np.array_equal(self.D, np.eye(4)))

    def apply(self, v):
        """Apply to a :class:`CyclographicVector` or an array of 5-vectors."""
        if isinstance(v, CyclographicVector):
            return CyclographicVector.from_array(self.apply(v.as_array()))
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        out[..., 0] = v[..., 0]
        out[..., 1:] = v[..., :1] * self.t + self.lam * v[..., 1:] @ self.D.T
        return out

    def apply4(self, x, w=1.0):
        """Apply to 4-vectors ``x`` with weight ``w`` (1 for spheres, 0 for planes)."""
        x = np.asarray(x, dtype=float)
        return np.asarray(w, dtype=float)[..., None] * self.t + self.lam * x @ self.D.T

    def inverse(self) -> "LaguerreMap":
        Dinv = E_PE @ self.D.T @ E_PE
        return LaguerreMap(Dinv, -(Dinv @ self.t) / self.lam, 1.0 / self.lam)

    def then(self, other: "LaguerreMap") -> "LaguerreMap":
        """Map equal to applying ``self`` first and ``other`` second."""
        return LaguerreMap(other.D @ self.D,
                           other.t + other.lam * other.D @ self.t,
                           other.lam * self.lam)


def identity() -> LaguerreMap:
    return LaguerreMap()


def make_pe_rotation(plane: str, tau: float) -> LaguerreMap:
    """Hyperbolic rotation mixing ``x_i`` with ``x4``.

    ``plane`` names the fixed coordinate plane: ``"x2x3"`` mixes ``x1``,
    ``"x3x1"`` mixes ``x2`` and ``"x1x2"`` mixes ``x3``.
    """
    if plane not in _PLANE_AXES:
        raise ValueError(f"unknown pe-rotation plane {plane!r}; expected one of {sorted(_PLANE_AXES)}")
    tau = float(tau)
    if not np.isfinite(tau):
        raise ValueError("tau must be finite")
    i = _PLANE_AXES[plane]
    D = np.eye(4)
    D[i, i] = D[3, 3] = np.cosh(tau)
    D[i, 3] = D[3, i] = np.sinh(tau)
    return LaguerreMap(D)


def make_euclidean(rot=None, shift=None) -> LaguerreMap:
    """Rigid motion acting on sphere centers; radii are unchanged."""
    R = np.eye(3) if rot is None else np.asarray(rot, dtype=float).reshape(3, 3)
    if (np.max(np.abs(R.T @ R - np.eye(3))) > 1e-12
            or abs(np.linalg.det(R) - 1.0) > 1e-12):
        raise LaguerreError("rotation must be orthogonal with det +1")
    D = np.eye(4)
    D[:3, :3] = R
    t = np.zeros(4)
    if shift is not None:
        t[:3] = np.asarray(shift, dtype=float).reshape(3)
    return LaguerreMap(D, t)


def make_offset(d: float) -> LaguerreMap:
    """Add ``d`` to every sphere radius (normal offset of a surface by ``d``)."""
    return LaguerreMap(np.eye(4), np.array([0.0, 0.0, 0.0, float(d)]))


def make_scaling(lam: float) -> LaguerreMap:
    return LaguerreMap(np.eye(4), np.zeros(4), lam)


def compose(maps: Sequence[LaguerreMap]) -> LaguerreMap:
    """Single map equal to applying ``maps[0]``, then ``maps[1]``, and so on."""
    maps = list(maps)
    if not maps:
        raise ValueError("compose needs at least one map")
    out = maps[0]
    for m in maps[1:]:
        out = out.then(m)
    return out


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` by ``angle`` radians."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def map_from_recipe(recipe: Iterable[dict]) -> LaguerreMap:
    """Build a map from generator records, applied in list order.

    Records look like ``{"kind": "pe_rotation", "plane": "x2x3", "tau": 0.1}``,
    ``{"kind": "offset", "d": 500.0}``, ``{"kind": "scaling", "lam": 2.0}`` or
    ``{"kind": "euclidean", "axis": [0, 0, 1], "angle": 0.3, "shift": [...]}``.
    An empty recipe is the identity.
    """
    maps = []
    for rec in recipe:
        kind = rec.get("kind")
        if kind == "pe_rotation":
            maps.append(make_pe_rotation(rec["plane"], rec["tau"]))
        elif kind == "offset":
            maps.append(make_offset(rec["d"]))
        elif kind == "scaling":
            maps.append(make_scaling(rec["lam"]))
        elif kind == "euclidean":
            rot = rec.get("rotation")
            if rot is None and "axis" in rec:
                rot = rotation_matrix(rec["axis"], rec.get("angle", 0.0))
            maps.append(make_euclidean(rot, rec.get("shift")))
        else:
            raise LaguerreError(f"unknown generator kind {kind!r}")
    return compose(maps) if maps else identity()


# ---------------------------------------------------------------------------
# contact elements


@dataclass(frozen=True)
class ContactElement:
    """Surface point, unit normal and the ``|n~|`` bookkeeping scale."""

    p: np.ndarray
    n: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        n = np.asarray(self.n, dtype=float)
        if np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > 1e-12):
            raise ValueError("contact element normal must be a unit vector")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "n", n)


def _normal_images(lmap: LaguerreMap, n):
    """Sign-normalized ``D (n, -1)``: returns (n_tilde, |n_tilde|)."""
    n = np.asarray(n, dtype=float)
    m = np.concatenate([n, -np.ones(n.shape[:-1] + (1,))], axis=-1) @ lmap.D.T
    flip = m[..., 3] > 0.0
    m = np.where(flip[..., None], -m, m)
    nt = m[..., :3]
    norm = np.linalg.norm(nt, axis=-1)
    if np.any(norm <= 1e-14):
        raise SingularTransformError("degenerate null direction: |n~| = 0")
    return nt, norm


def transform_points(lmap: LaguerreMap, p, n):
    """Vectorized contact-element transform.

    Returns ``(p_new, n_new, scale)`` for arrays of points ``p`` and unit
    normals ``n`` (shape ``(..., 3)``).  The new point is the zero-radius
    member of the transformed sphere pencil.
    """
    p = np.asarray(p, dtype=float)
    nt, norm = _normal_images(lmap, n)
    q = lmap.apply4(np.concatenate([p, np.zeros(p.shape[:-1] + (1,))], axis=-1))
    p_new = q[..., :3] + (q[..., 3] / norm)[..., None] * nt
    return p_new, nt / norm[..., None], norm


def transform_contact_element(lmap: LaguerreMap, ce: ContactElement) -> ContactElement:
    p, n, s = transform_points(lmap, ce.p, ce.n)
    return ContactElement(p, n, s * ce.scale)


def transform_curvatures(lmap: LaguerreMap, ce: ContactElement, kappa1, kappa2,
                         check: bool = True):
    """Principal curvatures after the map, read from the curvature spheres.

    Curvatures follow ``kappa = r'' . n``, so the osculating center is
    ``p + n / kappa`` and, with centers at ``p - r n``, the curvature sphere
    has signed radius ``-1 / kappa``.  Each sphere is mapped and the new
    curvature is ``-1 / r_new``.  Returns
    ``(kappa1_new, kappa2_new, |n~|)``.
    """
    p = np.asarray(ce.p, dtype=float)
    n = np.asarray(ce.n, dtype=float)
    p_new, n_new, norm = transform_points(lmap, p, n)
    out = []
    for kappa in (kappa1, kappa2):
        kappa = np.asarray(kappa, dtype=float)
        if np.any(kappa == 0.0):
            raise SingularTransformError("zero curvature has no curvature sphere")
        rad = -1.0 / kappa
        sph = lmap.apply4(np.concatenate([p - rad[..., None] * n, rad[..., None]], axis=-1))
        r_new = sph[..., 3]
        scale_ref = np.maximum(np.abs(r_new), np.linalg.norm(p_new, axis=-1))
        if np.any(np.abs(r_new) <= 1e-12 * np.maximum(scale_ref, 1.0)):
            raise SingularTransformError("curvature sphere collapses to a point (curvature blow-up)")
        if check:
            off = np.linalg.norm(sph[..., :3] - (p_new - r_new[..., None] * n_new), axis=-1)
            if np.any(off > 1e-9 * np.maximum(np.abs(r_new), 1.0)):
                raise SingularTransformError(
                    f"transformed sphere center off the normal line by {np.max(off):.3e}")
        out.append(-1.0 / r_new)
    return out[0], out[1], norm * ce.scale
