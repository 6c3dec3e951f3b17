from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from laguerre_gridshell.cyclide import SurfaceSample
from laguerre_gridshell.gridshell import (
    ETA, XI, GridMismatchError, build_grid, build_model, nodal_loads, quad_areas, target_axial_forces)
from laguerre_gridshell.membrane import MembraneField, build_field

Z = -0.0005


@pytest.fixture(scope="module")
def base(default_setup):
    params, center = default_setup
    return build_field(params, 14, 16, Z, center=center)


@pytest.fixture(scope="module")
def model(base):
    return build_model(base, 14, 16)


def planar_field(nx, ny, T1=2.0, T2=3.0, lx=1400.0, ly=1600.0):
    """Flat rectangle with uniform membrane forces (no surface provenance)."""
    xi, eta = np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1)
    X, E = np.meshgrid(xi, eta, indexing="ij")
    P = np.stack([lx * X, ly * E, np.zeros_like(X)], axis=-1)
    n = np.broadcast_to([0.0, 0.0, 1.0], P.shape).copy()
    one = np.ones_like(X)
    s = SurfaceSample(X, E, P, n, one, one, one, one, 0 * one)
    return MembraneField(xi, eta, s, Z, 0.0, T1 * one, T2 * one)


def test_counts(model):
    assert model.n_nodes == 255
    assert model.n_members == 14 * 17 + 16 * 15 == 478
    assert len(model.groups) == 15 + 17 == 32
    assert len(model.variable_groups) == 24
    assert int(model.boundary.sum()) == 2 * 15 + 2 * 17 - 4


def test_degrees(model):
    deg = np.bincount(model.ends.ravel(), minlength=model.n_nodes)
    assert np.all(deg[~model.boundary] == 4)
    assert sorted(set(deg[model.boundary])) == [2, 3]


def test_edges_join_parameter_neighbours(model):
    ia, ja = model.node_ij(model.ends[:, 0])
    ib, jb = model.node_ij(model.ends[:, 1])
    xi_m = model.direction == XI
    assert np.all((ib - ia)[xi_m] == 1) and np.all((jb - ja)[xi_m] == 0)
    assert np.all((ib - ia)[~xi_m] == 0) and np.all((jb - ja)[~xi_m] == 1)
    assert len({tuple(e) for e in model.ends}) == model.n_members


def test_single_cell(default_setup):
    params, center = default_setup
    m = build_grid(build_field(params, 1, 1, Z, center=center), 1, 1)
    assert m.n_nodes == 4 and m.n_members == 4
    assert m.boundary.all()
    assert not m.in_objective.any()
    assert not m.variable_groups


def test_groups_partition_members(model):
    seen = np.concatenate([g.member_ids for g in model.groups])
    assert sorted(seen) == list(range(model.n_members))
    for g in model.groups:
        ids = np.array(g.member_ids)
        assert np.all(model.direction[ids] == g.direction)
        assert np.all(model.group[ids] == g.id)
        i, j = model.node_ij(model.ends[ids, 0])
        assert len(set(j if g.direction == XI else i)) == 1


def test_objective_members_rule(model):
    # independent count: members touching lines {0, 1, 13, 14} (xi) or {0, 1, 15, 16} (eta) are out
    bad_i, bad_j = {0, 1, 13, 14}, {0, 1, 15, 16}
    expected = []
    for m, (a, b) in enumerate(model.ends):
        ok = True
        for k in (a, b):
            i, j = divmod(int(k), 17)
            ok &= i not in bad_i and j not in bad_j
        expected.append(ok)
    np.testing.assert_array_equal(model.in_objective, expected)
    assert model.in_objective.sum() == 262


def test_fixed_groups_are_edge_rows(model):
    for g in model.groups:
        last = 16 if g.direction == XI else 14
        assert g.variable == (2 <= g.index <= last - 2)


def test_areas_partition_mesh(model, base):
    total = quad_areas(base.sample.p).sum()
    assert np.all(model.areas > 0)
    assert model.areas.sum() == pytest.approx(total, rel=1e-13)
    corner = quad_areas(base.sample.p)[0, 0] / 4
    assert model.areas[model.node_id(0, 0)] == pytest.approx(corner, rel=1e-14)


def test_loads(model, base):
    assert np.abs(np.linalg.norm(model.loads, axis=1).sum() - abs(Z) * model.areas.sum()) \
        <= 1e-10 * abs(Z) * model.areas.sum()
    assert not nodal_loads(model, Z=0.0).any()
    # pressure acts along the node normal
    np.testing.assert_allclose(model.loads, Z * model.areas[:, None] * model.normals)


def test_uniform_field_uniform_targets():
    f = planar_field(6, 8)
    m = target_axial_forces(build_grid(f, 6, 8), f)
    i, j = m.node_ij(m.ends[:, 0])
    xi_inner = (m.direction == XI) & (j > 0) & (j < 8)
    eta_inner = (m.direction == ETA) & (i > 0) & (i < 6)
    np.testing.assert_allclose(m.targets[xi_inner], 2.0 * 1600.0 / 8, rtol=1e-13)
    np.testing.assert_allclose(m.targets[eta_inner], 3.0 * 1400.0 / 6, rtol=1e-13)
    # edge strips are one-sided
    np.testing.assert_allclose(m.targets[(m.direction == XI) & (j == 0)], 2.0 * 100.0, rtol=1e-13)


def test_doubling_density_halves_targets():
    a = planar_field(4, 4)
    b = planar_field(8, 8)
    ma = target_axial_forces(build_grid(a, 4, 4), a)
    mb = target_axial_forces(build_grid(b, 8, 8), b)
    assert np.max(mb.widths) == pytest.approx(np.max(ma.widths) / 2, rel=1e-13)
    assert np.max(np.abs(mb.targets)) == pytest.approx(np.max(np.abs(ma.targets)) / 2, rel=1e-13)


def test_default_eta_members_compressive(model):
    inner = model.in_objective
    eta = model.targets[inner & (model.direction == ETA)]
    xi = model.targets[inner & (model.direction == XI)]
    assert np.mean(eta < 0) > 0.9
    assert eta.min() < xi.min()
    assert np.argmax(np.abs(model.targets)) in np.flatnonzero(model.direction == ETA)


def transposed(f: MembraneField) -> MembraneField:
    """Same surface with the roles of xi and eta exchanged everywhere."""
    s = f.sample
    tr = lambda a: np.swapaxes(np.asarray(a), 0, 1)  # noqa: E731
    t = SurfaceSample(tr(s.eta), tr(s.xi), tr(s.p), -tr(s.n), tr(s.kappa2), tr(s.kappa1),
                      tr(s.A2), tr(s.A1), tr(s.theta))
    return MembraneField(f.eta, f.xi, t, -f.Z, f.I0, tr(f.T2), tr(f.T1))


def test_relabel_coherence(base):
    plain = replace(base, params=None)
    swap = transposed(plain)
    m1 = build_model(plain, 14, 16)
    m2 = build_model(swap, 16, 14)
    ids = {}
    for m, (a, b) in enumerate(m2.ends):
        ids[frozenset((int(a), int(b)))] = m

    def to2(k):
        i, j = divmod(int(k), 17)
        return j * 15 + i

    perm = np.array([ids[frozenset((to2(a), to2(b)))] for a, b in m1.ends])
    np.testing.assert_allclose(m2.targets[perm], m1.targets, rtol=1e-12)
    np.testing.assert_array_equal(m2.in_objective[perm], m1.in_objective)
    node = np.array([to2(k) for k in range(m1.n_nodes)])
    np.testing.assert_allclose(m2.loads[node], m1.loads, rtol=1e-12, atol=1e-12)


def test_swapped_pairing_exchanges_forces(base, model):
    sw = target_axial_forces(model, base, pairing="swapped")
    assert not np.allclose(sw.targets, model.targets)
    with pytest.raises(ValueError):
        target_axial_forces(model, base, pairing="other")


def test_grid_mismatch(base):
    with pytest.raises(GridMismatchError):
        build_grid(base, 14, 15)


def test_exports(model, tmp_path):
    model.write_json(tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert len(doc["nodes"]) == 255 and len(doc["members"]) == 478 and len(doc["groups"]) == 32
    assert doc["members"][0]["target_force"] == model.targets[0]
    assert len(doc["supports"]) == int(model.boundary.sum())
    model.write_obj(tmp_path / "m.obj")
    lines = (tmp_path / "m.obj").read_text().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 255
    assert sum(ln.startswith("l ") for ln in lines) == 478
