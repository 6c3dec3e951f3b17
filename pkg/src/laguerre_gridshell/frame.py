"""Linear 3D frame analysis with Euler-Bernoulli pipe beams.

Every element stiffness is split as ``A * Ka + I * Kb + J * Kt`` in global
axes and precomputed once per geometry, so re-analysing the same grid with
new radii only re-weights those blocks, scatters them into a fixed sparse
pattern and factorizes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .gridshell import GridshellModel

logger = logging.getLogger(__name__)

#: Pipe wall thickness as a fraction of the external radius.
THICKNESS_RATIO = 0.1

#: Below this sine between the reference normal and the axis the local frame falls back to a global axis.
PARALLEL_TOL = 1e-6

#: Pivot magnitude (relative to the largest diagonal entry) treated as zero.
PIVOT_TOL = 1e-12


class MechanismError(RuntimeError):
    """Singular stiffness: the structure has a zero-energy mode."""


@dataclass(frozen=True)
class Material:
    E: float = 205000.0
    nu: float = 0.3

    @property
    def G(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))


@dataclass(frozen=True)
class PipeSection:
    R: float
    t_ratio: float
    A: float
    I: float
    J: float


def pipe_section(R, t_ratio: float = THICKNESS_RATIO) -> PipeSection:
    """Hollow circular section of external radius ``R`` (scalars or arrays)."""
    R = np.asarray(R, dtype=float)
    if np.any(~(R > 0)):
        raise ValueError("pipe radius must be positive")
    Ri = (1.0 - t_ratio) * R
    A = np.pi * (R ** 2 - Ri ** 2)
    I = 0.25 * np.pi * (R ** 4 - Ri ** 4)
    out = [v if v.ndim else float(v) for v in (R, A, I, 2.0 * I)]
    return PipeSection(out[0], t_ratio, out[1], out[2], out[3])


def radius_from_area(A, t_ratio: float = THICKNESS_RATIO):
    return np.sqrt(np.asarray(A, float) / (np.pi * (1.0 - (1.0 - t_ratio) ** 2)))


def local_frames(X: np.ndarray, ends: np.ndarray, ref: np.ndarray | None = None) -> np.ndarray:
    """Rotation matrices ``(M, 3, 3)`` whose rows are the local x, y, z axes.

    Local z is the part of ``ref`` (per member) perpendicular to the axis.
    """
    d = X[ends[:, 1]] - X[ends[:, 0]]
    L = np.linalg.norm(d, axis=1)
    if np.any(L <= 0):
        raise ValueError("zero-length member")
    ex = d / L[:, None]
    if ref is None:
        ref = np.tile([0.0, 0.0, 1.0], (len(ends), 1))
    ref = np.asarray(ref, float)
    z = ref - np.einsum("ij,ij->i", ref, ex)[:, None] * ex
    rn = np.linalg.norm(ref, axis=1)
    zn = np.linalg.norm(z, axis=1)
    bad = ~(zn > PARALLEL_TOL * np.maximum(rn, 1e-300))
    for m in np.flatnonzero(bad):
        axis = np.eye(3)[np.argmin(np.abs(ex[m]))]
        z[m] = axis - axis.dot(ex[m]) * ex[m]
        zn[m] = np.linalg.norm(z[m])
    ez = z / zn[:, None]
    ey = np.cross(ez, ex)
    return np.stack([ex, ey, ez], axis=1)


def _unit_local_blocks(L: np.ndarray, mat: Material):
    """Local stiffness per unit A, per unit I (both bending planes) and per unit J."""
    M = len(L)
    Ka = np.zeros((M, 12, 12))
    Kb = np.zeros((M, 12, 12))
    Kt = np.zeros((M, 12, 12))
    E, G = mat.E, mat.G
    a = E / L
    Ka[:, 0, 0] = Ka[:, 6, 6] = a
    Ka[:, 0, 6] = Ka[:, 6, 0] = -a
    t = G / L
    Kt[:, 3, 3] = Kt[:, 9, 9] = t
    Kt[:, 3, 9] = Kt[:, 9, 3] = -t
    k1 = 12 * E / L ** 3
    k2 = 6 * E / L ** 2
    k3 = 4 * E / L
    k4 = 2 * E / L
    # bending in the local x-y plane: v (1, 7), theta_z (5, 11)
    # bending in the local x-z plane: w (2, 8), theta_y (4, 10), opposite coupling sign
    for (v1, r1, v2, r2, s) in ((1, 5, 7, 11, 1.0), (2, 4, 8, 10, -1.0)):
        entries = {(v1, v1): k1, (v2, v2): k1, (v1, v2): -k1,
                   (v1, r1): s * k2, (v1, r2): s * k2, (v2, r1): -s * k2, (v2, r2): -s * k2,
                   (r1, r1): k3, (r2, r2): k3, (r1, r2): k4}
        for (i, j), val in entries.items():
            Kb[:, i, j] = val
            Kb[:, j, i] = val
    return Ka, Kb, Kt


class FrameSystem:
    """Geometry-fixed frame: precomputed element blocks and sparse pattern.

    ``fixed`` is an ``(n_nodes, 6)`` boolean mask of restrained DOFs.
    """

    def __init__(self, X, ends, fixed, material: Material = Material(), ref=None):
        self.X = np.asarray(X, float)
        self.ends = np.asarray(ends, int)
        self.material = material
        self.n_nodes = len(self.X)
        self.fixed = np.asarray(fixed, bool).reshape(self.n_nodes, 6)
        self.lam = local_frames(self.X, self.ends, ref)
        self.L = np.linalg.norm(self.X[self.ends[:, 1]] - self.X[self.ends[:, 0]], axis=1)
        M = len(self.ends)
        T = np.zeros((M, 12, 12))
        for b in range(4):
            T[:, 3 * b:3 * b + 3, 3 * b:3 * b + 3] = self.lam
        self.T = T
        self.local = _unit_local_blocks(self.L, material)
        self.glob = [np.einsum("mji,mjk,mkl->mil", T, K, T) for K in self.local]

        dofs = (6 * self.ends[:, :, None] + np.arange(6)).reshape(M, 12)
        self.dofs = dofs
        ndof = 6 * self.n_nodes
        self.ndof = ndof
        rows = np.repeat(dofs, 12, axis=1).ravel()
        cols = np.tile(dofs, (1, 12)).ravel()
        free = ~self.fixed.ravel()
        self.free = free
        fmap = -np.ones(ndof, int)
        fmap[free] = np.arange(free.sum())
        keep = free[rows] & free[cols]
        self._keep = keep
        r, c = fmap[rows[keep]], fmap[cols[keep]]
        nf = int(free.sum())
        key = r * nf + c
        uniq, inv = np.unique(key, return_inverse=True)
        self._inv = inv
        self._nnz = len(uniq)
        self._rows, self._cols = uniq // nf, uniq % nf
        self.n_free = nf
        if nf == 0:
            raise ValueError("all DOFs are restrained")
        # upper band storage for a banded Cholesky when the numbering is compact
        bw = int(np.max(np.abs(self._rows - self._cols), initial=0))
        self.bandwidth = bw
        self.banded = bw <= nf // 4
        if self.banded:
            up = self._rows <= self._cols
            pos = -np.ones(self._nnz, int)
            pos[up] = (bw + self._rows[up] - self._cols[up]) * nf + self._cols[up]
            self._band_pos = pos

    def _weights(self, A, I, J):
        M = len(self.ends)
        A, I, J = (np.broadcast_to(np.asarray(v, float), (M,)) for v in (A, I, J))
        return A, I, J

    def element_global(self, A, I, J):
        A, I, J = self._weights(A, I, J)
        Ka, Kb, Kt = self.glob
        return A[:, None, None] * Ka + I[:, None, None] * Kb + J[:, None, None] * Kt

    def full_stiffness(self, A, I, J) -> sp.csr_matrix:
        """Unrestrained global stiffness (for checks)."""
        ke = self.element_global(A, I, J)
        rows = np.repeat(self.dofs, 12, axis=1).ravel()
        cols = np.tile(self.dofs, (1, 12)).ravel()
        return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(self.ndof, self.ndof)).tocsr()

    def reduced_stiffness(self, A, I, J) -> sp.csc_matrix:
        ke = self.element_global(A, I, J).ravel()[self._keep]
        data = np.bincount(self._inv, weights=ke, minlength=self._nnz)
        return sp.csc_matrix((data, (self._rows, self._cols)), shape=(self.n_free, self.n_free))

    def _factor_solve(self, A, I, J, rhs):
        if self.banded:
            ke = self.element_global(A, I, J).ravel()[self._keep]
            data = np.bincount(self._inv, weights=ke, minlength=self._nnz)
            up = self._band_pos >= 0
            ab = np.bincount(self._band_pos[up], weights=data[up],
                             minlength=(self.bandwidth + 1) * self.n_free)
            ab = ab.reshape(self.bandwidth + 1, self.n_free)
            dmax = ab[-1].max()
            try:
                c = scipy.linalg.cholesky_banded(ab)
            except np.linalg.LinAlgError as exc:
                raise MechanismError(f"stiffness not positive definite; "
                                     f"{self._mechanism_report(self.reduced_stiffness(A, I, J))}") from exc
            piv = c[-1] ** 2
            if piv.min() <= PIVOT_TOL * dmax:
                raise MechanismError(f"near-zero pivot {piv.min():.3e}; "
                                     f"{self._mechanism_report(self.reduced_stiffness(A, I, J))}")
            return scipy.linalg.cho_solve_banded((c, False), rhs)
        K = self.reduced_stiffness(A, I, J)
        try:
            lu = spla.splu(K)
        except RuntimeError as exc:
            raise MechanismError(f"singular stiffness ({exc}); {self._mechanism_report(K)}") from exc
        piv = np.abs(lu.U.diagonal())
        if piv.min() <= PIVOT_TOL * np.abs(K.diagonal()).max():
            raise MechanismError(f"near-zero pivot {piv.min():.3e}; {self._mechanism_report(K)}")
        return lu.solve(rhs)

    def _mechanism_report(self, K) -> str:
        w, v = scipy.linalg.eigh(K.toarray())
        mode = v[:, 0]
        full = np.zeros(self.ndof)
        full[self.free] = mode
        node, dof = divmod(int(np.argmax(np.abs(full))), 6)
        return f"lowest eigenvalue {w[0]:.3e}; mode dominated by node {node} dof {dof}"

    def solve(self, A, I, J, loads) -> "FrameSolution":
        """Static solution for nodal ``loads`` of shape ``(n_nodes, 3)`` or ``(n_nodes, 6)``."""
        loads = np.asarray(loads, float)
        F = np.zeros((self.n_nodes, 6))
        F[:, :loads.shape[1]] = loads
        u = np.zeros(self.ndof)
        u[self.free] = self._factor_solve(A, I, J, F.ravel()[self.free])
        if not np.all(np.isfinite(u)):
            raise MechanismError("non-finite displacements")
        return self._recover(A, I, J, u, F)

    def _recover(self, A, I, J, u, F):
        A, I, J = self._weights(A, I, J)
        ue = u[self.dofs]
        ul = np.einsum("mij,mj->mi", self.T, ue)
        Ka, Kb, Kt = self.local
        fl = (A[:, None] * np.einsum("mij,mj->mi", Ka, ul)
              + I[:, None] * np.einsum("mij,mj->mi", Kb, ul)
              + J[:, None] * np.einsum("mij,mj->mi", Kt, ul))
        # end forces in global axes, scattered to nodes
        fg = np.einsum("mji,mj->mi", self.T, fl)
        internal = np.zeros(self.ndof)
        np.add.at(internal, self.dofs.ravel(), fg.ravel())
        reactions = (internal - F.ravel()).reshape(self.n_nodes, 6)
        reactions[~self.fixed] = 0.0
        shear_local = np.zeros((len(fl), 2, 3))
        shear_local[:, 0, 1:] = fl[:, 1:3]
        shear_local[:, 1, 1:] = fl[:, 7:9]
        V = np.einsum("mji,mej->mei", self.lam, shear_local)
        resid = (internal - F.ravel())[self.free]
        return FrameSolution(u=u.reshape(self.n_nodes, 6), N=fl[:, 6].copy(), end_forces=fl,
                             V_end=V, reactions=reactions, residual=float(np.max(np.abs(resid), initial=0.0)))


@dataclass(frozen=True)
class FrameSolution:
    """Displacements (n_nodes, 6), axial forces N (tension positive), local end
    forces (M, 12), end shear vectors V_end (M, 2, 3) in global axes, support
    reactions (n_nodes, 6) and the max free-DOF equilibrium residual."""

    u: np.ndarray
    N: np.ndarray
    end_forces: np.ndarray
    V_end: np.ndarray
    reactions: np.ndarray
    residual: float


class GridFrame:
    """Frame analysis of a :class:`GridshellModel` with per-group pipe radii.

    Boundary nodes are pinned (translations fixed, rotations free).  Local z
    of each member follows the mean of its end-node surface normals.
    """

    def __init__(self, model: GridshellModel, material: Material = Material(),
                 t_ratio: float = THICKNESS_RATIO):
        if model.loads is None:
            raise ValueError("model has no nodal loads")
        fixed = np.zeros((model.n_nodes, 6), bool)
        fixed[model.boundary, :3] = True
        if fixed[:, :3].sum() < 9:
            raise ValueError("need at least three supported nodes")
        ref = model.normals[model.ends[:, 0]] + model.normals[model.ends[:, 1]]
        self.model = model
        self.t_ratio = t_ratio
        self.system = FrameSystem(model.positions, model.ends, fixed, material, ref)

    def member_radii(self, radii) -> np.ndarray:
        radii = np.asarray(radii, float)
        if radii.shape != (len(self.model.groups),):
            raise ValueError(f"expected {len(self.model.groups)} group radii, got {radii.shape}")
        return radii[self.model.group]

    def solve(self, radii) -> FrameSolution:
        sec = pipe_section(self.member_radii(radii), self.t_ratio)
        return self.system.solve(sec.A, sec.I, sec.J, self.model.loads)


def assemble_solve(model: GridshellModel, radii, material: Material = Material()) -> FrameSolution:
    """One-off analysis; use :class:`GridFrame` directly for repeated solves."""
    return GridFrame(model, material).solve(radii)


def nodal_shear(sol: FrameSolution, model: GridshellModel):
    """Per node: signed normal component of the summed end shears, and the sum of |end shear . n|."""
    Q = np.zeros((model.n_nodes, 3))
    np.add.at(Q, model.ends[:, 0], sol.V_end[:, 0])
    np.add.at(Q, model.ends[:, 1], sol.V_end[:, 1])
    Qn = np.einsum("ij,ij->i", Q, model.normals)
    mag = np.zeros(model.n_nodes)
    np.add.at(mag, model.ends[:, 0], np.abs(np.einsum("ij,ij->i", sol.V_end[:, 0], model.normals[model.ends[:, 0]])))
    np.add.at(mag, model.ends[:, 1], np.abs(np.einsum("ij,ij->i", sol.V_end[:, 1], model.normals[model.ends[:, 1]])))
    return Qn, mag


def shear_load_ratio(sol: FrameSolution, model: GridshellModel, variant: str = "vector"):
    """``(ratio per node, mean over non-boundary nodes)``.

    ``variant="vector"`` projects the vector sum of end shears on the node
    normal; ``"magnitude"`` sums the magnitudes of the projected end shears.
    Boundary nodes and nodes without load get NaN.
    """
    Qn, mag = nodal_shear(sol, model)
    Q = np.abs(Qn) if variant == "vector" else mag
    load = np.linalg.norm(model.loads, axis=1)
    ratio = np.full(model.n_nodes, np.nan)
    use = ~model.boundary
    zero = use & (load == 0)
    if np.any(zero):
        logger.warning("skipping %d unloaded nodes in shear ratio", int(zero.sum()))
    use &= load > 0
    ratio[use] = Q[use] / load[use]
    mean = float(np.mean(ratio[use])) if np.any(use) else float("nan")
    return ratio, mean
