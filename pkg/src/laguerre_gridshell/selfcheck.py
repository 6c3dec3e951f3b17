"""Quick invariant suite run by ``--seed-check``."""

from __future__ import annotations

import numpy as np

from .frame import FrameSystem, Material, pipe_section
from .laguerre import E_PE, compose, make_pe_rotation, pe_dot
from .cyclide import parameter_grid
from .membrane import (build_field, check_label_convention, normal_residual, point_cloud_frame,
                       transform_field)


def _laguerre(rng):
    planes = ("x2x3", "x3x1", "x1x2")
    m = compose([make_pe_rotation(planes[k], t) for k, t in
                 zip(rng.integers(0, 3, 5), rng.uniform(-1, 1, 5))])
    x = rng.normal(size=(200, 4))
    y = rng.normal(size=(200, 4))
    a = pe_dot(x @ m.D.T, y @ m.D.T)
    b = pe_dot(x, y)
    rel = np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))
    res = np.max(np.abs(m.D.T @ E_PE @ m.D - E_PE))
    return rel <= 1e-10 and res <= 1e-12, f"inner product drift {rel:.1e}, pseudo-orthogonality residual {res:.1e}"


def _cantilever():
    n, L, P = 4, 2000.0, 500.0
    X = np.c_[np.linspace(0, L, n + 1), np.zeros(n + 1), np.zeros(n + 1)]
    ends = np.c_[np.arange(n), np.arange(1, n + 1)]
    fixed = np.zeros((n + 1, 6), bool)
    fixed[0] = True
    F = np.zeros((n + 1, 3))
    F[-1, 2] = P
    mat = Material()
    sec = pipe_section(40.0)
    sol = FrameSystem(X, ends, fixed, mat).solve(sec.A, sec.I, sec.J, F)
    exact = P * L ** 3 / (3 * mat.E * sec.I)
    rel = abs(sol.u[-1, 2] / exact - 1)
    return rel <= 1e-8, f"tip deflection error {rel:.1e}"


def run_checks(params, center, Z, lmap=None, n_xi=14, n_eta=16, seed=0):
    """List of ``(name, ok, detail)``."""
    rng = np.random.default_rng(seed)
    out = [("laguerre invariance", *_laguerre(rng))]
    fld = build_field(params, n_xi, n_eta, Z, center=center)
    fields = [("before", fld)]
    if lmap is not None:
        fields.append(("after", transform_field(fld, lmap)))
    xi, eta = parameter_grid(params, n_xi, n_eta)
    X, E = np.meshgrid(xi, eta, indexing="ij")
    for name, f in fields:
        # speeds and curvatures of the point cloud itself, not the stored ones
        _, _, k1, k2, A1, A2 = point_cloud_frame(params, f.lmap, X, E)
        mism = float(np.max(np.abs(k1 * A1 - k2 * A2) / np.abs(k1 * A1)))
        out.append((f"L-isothermic {name}", mism <= 1e-3, f"max FD mismatch {mism:.1e}"))
        r = normal_residual(f)
        out.append((f"normal equilibrium {name}", r <= 1e-12, f"residual {r:.1e}"))
        try:
            rep = check_label_convention(f)
            out.append((f"force labels {name}", True, f"direct {max(rep['direct']):.1e} "
                        f"vs swapped {max(rep['swapped']):.1e}"))
        except AssertionError as exc:
            out.append((f"force labels {name}", False, str(exc)))
    out.append(("frame cantilever", *_cantilever()))
    return out
