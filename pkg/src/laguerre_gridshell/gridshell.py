"""Structured beam grid on a membrane field: nodes, members, groups, loads, targets.

Node ``(i, j)`` sits at parameter sample ``(xi[i], eta[j])`` and has id
``i * (n_eta + 1) + j``.  A *xi-member* joins ``(i, j)`` to ``(i + 1, j)``
and lies on the xi-polyline ``j``; an *eta-member* joins ``(i, j)`` to
``(i, j + 1)`` and lies on the eta-polyline ``i``.  Each polyline is one
member group sharing a radius.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace

import numpy as np

from .membrane import MembraneField

logger = logging.getLogger(__name__)

XI, ETA = 0, 1
DIRECTION_NAMES = ("xi", "eta")

#: Polylines this close to the patch edge are fixed and excluded from the objective.
BOUNDARY_ROWS = 2


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Group:
    id: int
    direction: int
    index: int
    member_ids: tuple
    variable: bool


@dataclass(frozen=True)
class GridshellModel:
    """Struct-of-arrays gridshell.

    Node arrays have length ``n_nodes``; member arrays length ``n_members``.
    ``targets`` and ``loads`` stay ``None`` until computed.
    """

    n_xi: int
    n_eta: int
    positions: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    boundary: np.ndarray
    ends: np.ndarray
    direction: np.ndarray
    widths: np.ndarray
    group: np.ndarray
    in_objective: np.ndarray
    groups: tuple
    Z: float = 0.0
    targets: np.ndarray | None = None
    loads: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_members(self) -> int:
        return len(self.ends)

    @property
    def variable_groups(self) -> list[int]:
        return [g.id for g in self.groups if g.variable]

    def node_id(self, i: int, j: int) -> int:
        return i * (self.n_eta + 1) + j

    def node_ij(self, k):
        return np.divmod(k, self.n_eta + 1)

    def lengths(self) -> np.ndarray:
        d = self.positions[self.ends[:, 1]] - self.positions[self.ends[:, 0]]
        return np.linalg.norm(d, axis=1)

    def to_dict(self) -> dict:
        nodes = []
        for k in range(self.n_nodes):
            i, j = self.node_ij(k)
            rec = {"id": k, "i": int(i), "j": int(j),
                   "position": self.positions[k].tolist(), "normal": self.normals[k].tolist(),
                   "tributary_area": float(self.areas[k]), "support": bool(self.boundary[k])}
            if self.loads is not None:
                rec["load"] = self.loads[k].tolist()
            nodes.append(rec)
        members = []
        for m in range(self.n_members):
            rec = {"id": m, "node_a": int(self.ends[m, 0]), "node_b": int(self.ends[m, 1]),
                   "direction": DIRECTION_NAMES[self.direction[m]],
                   "tributary_width": float(self.widths[m]), "group": int(self.group[m]),
                   "in_objective": bool(self.in_objective[m])}
            if self.targets is not None:
                rec["target_force"] = float(self.targets[m])
            members.append(rec)
        groups = [{"id": g.id, "direction": DIRECTION_NAMES[g.direction], "index": g.index,
                   "variable": g.variable, "member_ids": list(g.member_ids)} for g in self.groups]
        return {"grid": [self.n_xi, self.n_eta], "Z": self.Z, "nodes": nodes,
                "members": members, "groups": groups,
                "supports": [int(k) for k in np.flatnonzero(self.boundary)]}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def write_obj(self, path) -> None:
        """Wireframe: one ``v`` per node, one ``l`` per member (1-based)."""
        with open(path, "w") as fh:
            for p in self.positions:
                fh.write(f"v {p[0]!r} {p[1]!r} {p[2]!r}\n")
            for a, b in self.ends:
                fh.write(f"l {a + 1} {b + 1}\n")


def _tri_area(a, b, c):
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)


def quad_areas(P: np.ndarray) -> np.ndarray:
    """Areas of the grid quads of a ``(nx+1, ny+1, 3)`` point array, split along one diagonal."""
    p00, p10 = P[:-1, :-1], P[1:, :-1]
    p11, p01 = P[1:, 1:], P[:-1, 1:]
    return _tri_area(p00, p10, p11) + _tri_area(p00, p11, p01)


def _strip_widths(mid: np.ndarray) -> np.ndarray:
    """Tributary widths for members whose midpoints are ``mid[k, line]``.

    ``mid`` has shape ``(n_along, n_lines, 3)``: member ``k`` on each of the
    parallel polylines.  Width is half the chord to each neighbouring line.
    """
    gaps = np.linalg.norm(np.diff(mid, axis=1), axis=-1)
    w = np.zeros(mid.shape[:2])
    w[:, 1:] += 0.5 * gaps
    w[:, :-1] += 0.5 * gaps
    return w


def build_grid(field: MembraneField, n_xi: int, n_eta: int) -> GridshellModel:
    """Nodes at the field samples, members along both parameter directions."""
    if field.shape != (n_xi + 1, n_eta + 1):
        raise GridMismatchError(f"field grid {field.shape} does not match ({n_xi + 1}, {n_eta + 1})")
    P = np.asarray(field.sample.p, float)
    nn = (n_xi + 1) * (n_eta + 1)
    ids = np.arange(nn).reshape(n_xi + 1, n_eta + 1)

    area = np.zeros((n_xi + 1, n_eta + 1))
    qa = quad_areas(P) / 4.0
    for di in (0, 1):
        for dj in (0, 1):
            area[di:n_xi + di, dj:n_eta + dj] += qa

    bnd = np.zeros((n_xi + 1, n_eta + 1), bool)
    bnd[[0, -1], :] = True
    bnd[:, [0, -1]] = True

    # xi-members: (i, j) -> (i+1, j), indexed [i, j]
    xi_ends = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    xi_mid = 0.5 * (P[:-1, :] + P[1:, :])
    xi_w = _strip_widths(xi_mid).ravel()
    # eta-members: (i, j) -> (i, j+1), indexed [i, j]
    eta_ends = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    eta_mid = 0.5 * (P[:, :-1] + P[:, 1:])
    eta_w = _strip_widths(np.swapaxes(eta_mid, 0, 1)).T.ravel()

    n_xm = len(xi_ends)
    ends = np.concatenate([xi_ends, eta_ends])
    direction = np.concatenate([np.full(n_xm, XI), np.full(len(eta_ends), ETA)])
    widths = np.concatenate([xi_w, eta_w])

    ii, jj = np.divmod(ends, n_eta + 1)
    ok_i = (ii >= BOUNDARY_ROWS) & (ii <= n_xi - BOUNDARY_ROWS)
    ok_j = (jj >= BOUNDARY_ROWS) & (jj <= n_eta - BOUNDARY_ROWS)
    in_obj = np.all(ok_i & ok_j, axis=1)

    # groups: xi-polylines j = 0..n_eta, then eta-polylines i = 0..n_xi
    xi_line = np.broadcast_to(np.arange(n_eta + 1), (n_xi, n_eta + 1))
    eta_line = np.repeat(np.arange(n_xi + 1)[:, None], n_eta, axis=1)
    group = np.concatenate([xi_line.ravel(), n_eta + 1 + eta_line.ravel()])
    groups = []
    for g in range(n_eta + 1 + n_xi + 1):
        d, idx, last = (XI, g, n_eta) if g <= n_eta else (ETA, g - n_eta - 1, n_xi)
        fixed = idx < BOUNDARY_ROWS or idx > last - BOUNDARY_ROWS
        groups.append(Group(g, d, idx, tuple(int(m) for m in np.flatnonzero(group == g)), not fixed))

    normals = np.asarray(field.sample.n, float).reshape(nn, 3)
    return GridshellModel(n_xi, n_eta, P.reshape(nn, 3).copy(), normals.copy(), area.ravel(),
                          bnd.ravel(), ends, direction, widths, group, in_obj, tuple(groups),
                          Z=field.Z)


def _midpoint_forces(field: MembraneField, model: GridshellModel):
    """(T1, T2) at each member's parameter midpoint.

    Uses the field's own evaluator when it knows its surface, otherwise the
    mean of the two end samples.
    """
    a, b = model.ends[:, 0], model.ends[:, 1]
    if field.params is not None:
        X, E = np.meshgrid(field.xi, field.eta, indexing="ij")
        X, E = X.ravel(), E.ravel()
        _, T1, T2 = field.at(0.5 * (X[a] + X[b]), 0.5 * (E[a] + E[b]))
        return T1, T2
    T1 = np.asarray(field.T1).ravel()
    T2 = np.asarray(field.T2).ravel()
    return 0.5 * (T1[a] + T1[b]), 0.5 * (T2[a] + T2[b])


#: How membrane forces are paired with member directions.
#: ``"equilibrium"``: xi-members carry T1, the force directed along the xi-lines.
#: ``"swapped"``: xi-members carry T2 and eta-members T1; not in equilibrium with
#: the load, kept for comparison runs.
PAIRINGS = ("equilibrium", "swapped")


def target_axial_forces(model: GridshellModel, field: MembraneField,
                        pairing: str = "equilibrium") -> GridshellModel:
    """Target N* = membrane force along the member times its tributary width."""
    if field.shape != (model.n_xi + 1, model.n_eta + 1):
        raise GridMismatchError("field and model grids differ")
    if pairing not in PAIRINGS:
        raise ValueError(f"pairing must be one of {PAIRINGS}")
    T1, T2 = _midpoint_forces(field, model)
    if pairing == "swapped":
        T1, T2 = T2, T1
    T = np.where(model.direction == XI, T1, T2)
    return replace(model, targets=T * model.widths)


def nodal_loads(model: GridshellModel, field: MembraneField | None = None, Z: float | None = None) -> np.ndarray:
    """Pressure load per node: ``Z * tributary area * normal``."""
    if Z is None:
        Z = field.Z if field is not None else model.Z
    return Z * model.areas[:, None] * model.normals


def with_loads(model: GridshellModel, field: MembraneField) -> GridshellModel:
    return replace(model, loads=nodal_loads(model, field))


def build_model(field: MembraneField, n_xi: int, n_eta: int,
                pairing: str = "equilibrium") -> GridshellModel:
    """Grid, targets and loads in one call."""
    m = build_grid(field, n_xi, n_eta)
    m = target_axial_forces(m, field, pairing)
    return with_loads(m, field)
