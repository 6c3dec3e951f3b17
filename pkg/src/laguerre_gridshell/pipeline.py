"""Configuration-driven run: surface, field, transform, grid, optimize, adjust, report."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cyclide import FD_STEP, FRAME_CONSISTENCY_TOL, CyclideParams, angle_to_conformal
from .frame import PARALLEL_TOL, PIVOT_TOL, GridFrame, Material, nodal_shear, shear_load_ratio
from .gridshell import BOUNDARY_ROWS, DIRECTION_NAMES, GridshellModel, build_model
from .laguerre import PSEUDO_ORTHOGONAL_TOL, LaguerreMap, map_from_recipe
from .membrane import MembraneField, build_field, check_label_convention, transform_field
from .optimize import RATIO_CLAMP, Deviation, OptimizationConfig, objective, optimize_radii, stress_ratio_adjust

logger = logging.getLogger(__name__)

STAGES = ("surface", "transform", "target", "optimize", "adjust", "report")

DEFAULT_CONFIG = {
    "surface": {
        "a0": 2.144,
        "scale": 10000.0,
        "xi_range_pi": [-0.1, 0.1],
        "phi_range_pi": [0.0, 0.15],
        "center_pi": [0.0, 0.075],
        "fd_step": FD_STEP,
    },
    "grid": {"n_xi": 14, "n_eta": 16, "target_pairing": "equilibrium"},
    "load": {"Z": -0.0005},
    "transformation": [
        {"kind": "pe_rotation", "plane": "x1x2", "tau": 0.3},
        {"kind": "pe_rotation", "plane": "x3x1", "tau": 0.2},
        {"kind": "pe_rotation", "plane": "x2x3", "tau": 0.1},
    ],
    "material": {"E": 205000.0, "nu": 0.3},
    "optimization": asdict(OptimizationConfig()),
    "adjustment": {"exponent": 1.0, "clamp": list(RATIO_CLAMP)},
    "outputs": "out",
}


class PipelineError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        logger.info("stage %s", self.name)
        return self

    def __exit__(self, typ, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, updated by a JSON file and then by ``overrides``."""
    cfg = default_config()
    if path is not None:
        with open(path) as fh:
            cfg = _merge(cfg, json.load(fh))
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def surface_setup(cfg: dict):
    """``(CyclideParams, center)`` from the surface section.

    Ranges may be given as ``xi_range`` / ``eta_range`` (radians, conformal
    eta), or as multiples of pi with the second parameter as the circle angle
    (``xi_range_pi``, ``phi_range_pi``, ``center_pi``).
    """
    s = cfg["surface"]
    if "xi_range" in s:
        xi = tuple(s["xi_range"])
    else:
        xi = tuple(np.pi * np.asarray(s.get("xi_range_pi", [-0.1, 0.1]), float))
    if "eta_range" in s:
        eta = tuple(s["eta_range"])
    else:
        eta = tuple(angle_to_conformal(np.pi * np.asarray(s.get("phi_range_pi", [0.0, 0.15]), float)))
    params = CyclideParams(float(s.get("a0", 2.144)), xi, eta, float(s.get("scale", 1.0)))
    if "center" in s:
        center = tuple(float(v) for v in s["center"])
    elif "center_pi" in s:
        cx, cp = np.pi * np.asarray(s["center_pi"], float)
        center = (float(cx), float(angle_to_conformal(cp)))
    else:
        center = (0.5 * sum(xi), 0.5 * sum(eta))
    return params, center


def optimization_config(cfg: dict) -> OptimizationConfig:
    return OptimizationConfig(**cfg["optimization"])


# ---------------------------------------------------------------------------
# geometry checks


def report_geometry_checks(model: GridshellModel) -> dict:
    """Corner coordinates in their best-fit plane and the rise above it.

    Corner 0 is ``(xi_min, eta_min)`` at the origin, corner 1 ``(xi_max,
    eta_min)`` on +x, and the in-plane y axis is oriented so that corner 2
    ``(xi_min, eta_max)`` has y >= 0.  The rise is the largest distance of any
    node from the corner plane.
    """
    ids = [model.node_id(0, 0), model.node_id(model.n_xi, 0),
           model.node_id(0, model.n_eta), model.node_id(model.n_xi, model.n_eta)]
    C = model.positions[ids]
    cen = C.mean(axis=0)
    _, sv, vt = np.linalg.svd(C - cen)
    if sv[1] <= 1e-9 * max(sv[0], 1e-300):
        raise ValueError("corner nodes are collinear")
    nrm = vt[2]
    ex = C[1] - C[0]
    ex = ex - ex.dot(nrm) * nrm
    ex /= np.linalg.norm(ex)
    ey = np.cross(nrm, ex)
    if (C[2] - C[0]).dot(ey) < 0:
        ey = -ey
    xy = np.stack([(C - C[0]) @ ex, (C - C[0]) @ ey], axis=1)
    rise = float(np.max(np.abs((model.positions - cen) @ nrm)))
    pairs = [(0, 1), (0, 2), (1, 3), (2, 3), (0, 3), (1, 2)]
    dist = {f"{a}-{b}": float(np.linalg.norm(C[a] - C[b])) for a, b in pairs}
    return {"corners": xy.tolist(), "rise": rise, "corner_distances": dist,
            "planarity": float(sv[2])}


# ---------------------------------------------------------------------------
# writers


def write_field_csv(path, fld: MembraneField) -> None:
    s = fld.sample
    cols = ["xi", "eta", "x", "y", "z", "nx", "ny", "nz", "kappa1", "kappa2", "A1", "A2", "T1", "T2"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(fld.shape[0]):
            for j in range(fld.shape[1]):
                vals = [s.xi[i, j], s.eta[i, j], *s.p[i, j], *s.n[i, j], s.kappa1[i, j], s.kappa2[i, j],
                        s.A1[i, j], s.A2[i, j], fld.T1[i, j], fld.T2[i, j]]
                w.writerow([repr(float(v)) for v in vals])


def write_surface_obj(path, fld: MembraneField) -> None:
    """Quad mesh of the sampled grid, vertices in mm."""
    P = fld.sample.p
    nx, ny = fld.shape
    with open(path, "w") as fh:
        for i in range(nx):
            for j in range(ny):
                fh.write("v {!r} {!r} {!r}\n".format(*map(float, P[i, j])))
        for i in range(nx - 1):
            for j in range(ny - 1):
                a = i * ny + j + 1
                fh.write(f"f {a} {a + ny} {a + ny + 1} {a + 1}\n")


def write_members_csv(path, model: GridshellModel, radii, N) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "node_a", "node_b", "direction", "group", "R", "N", "N_target", "in_objective"])
        for m in range(model.n_members):
            g = int(model.group[m])
            w.writerow([m, int(model.ends[m, 0]), int(model.ends[m, 1]), DIRECTION_NAMES[model.direction[m]], g,
                        repr(float(radii[g])), repr(float(N[m])), repr(float(model.targets[m])),
                        int(model.in_objective[m])])


def write_nodes_csv(path, model: GridshellModel, ratio, Qn) -> None:
    load = np.linalg.norm(model.loads, axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "boundary", "Q", "load", "ratio"])
        for k in range(model.n_nodes):
            w.writerow([k, int(model.boundary[k]), repr(float(abs(Qn[k]))), repr(float(load[k])),
                        repr(float(ratio[k]))])


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class Case:
    """One surface (before or after transformation) through grid and analysis."""

    name: str
    field: MembraneField
    model: GridshellModel
    frame: GridFrame | None = None
    rows: dict = field(default_factory=dict)
    radii: dict = field(default_factory=dict)


@dataclass
class PipelineReport:
    config: dict
    config_hash: str
    I0: dict
    counts: dict
    tables: dict
    geometry: dict | None
    label_check: dict
    files: list
    adjustment: dict | None = None

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "I0": self.I0, "counts": self.counts,
                "tables": self.tables, "geometry": self.geometry, "label_check": self.label_check,
                "adjustment": self.adjustment, "files": self.files}


def _row(dev: Deviation, shear: float) -> dict:
    return {"max_dev": dev.max_dev, "mean_dev": dev.mean_dev, "mean_shear_load": shear,
            "F": dev.F}


def _evaluate(case: Case, label: str, R) -> dict:
    sol = case.frame.solve(R)
    dev = objective(case.model, R, case.frame)
    _, shear = shear_load_ratio(sol, case.model)
    case.rows[label] = _row(dev, shear)
    case.radii[label] = np.asarray(R, float).copy()
    return case.rows[label]


def manifest(cfg: dict) -> dict:
    return {
        "config_hash": config_hash(cfg),
        "versions": {"laguerre_gridshell": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "tolerances": {"pseudo_orthogonal": PSEUDO_ORTHOGONAL_TOL, "fd_step": cfg["surface"].get("fd_step", FD_STEP),
                       "frame_consistency": FRAME_CONSISTENCY_TOL, "parallel_axis": PARALLEL_TOL,
                       "pivot": PIVOT_TOL, "f_tol": cfg["optimization"]["f_tol"],
                       "boundary_rows": BOUNDARY_ROWS},
        "config": cfg,
    }


def _table_text(title: str, rows: dict) -> str:
    lines = [title, f"{'':<20}{'Max |N-N*|':>14}{'Mean |N-N*|':>14}{'Mean shear/load':>18}"]
    for name, r in rows.items():
        lines.append(f"{name:<20}{r['max_dev']:>14.1f}{r['mean_dev']:>14.1f}{r['mean_shear_load']:>18.3f}")
    return "\n".join(lines)


def run_pipeline(cfg: dict, out: str | Path | None = None, until: str = "report") -> PipelineReport:
    """Run the stages up to and including ``until``; write outputs under ``out``.

    Every exception is re-raised as :class:`PipelineError` tagged with the stage.
    """
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}")
    stop = STAGES.index(until)
    out = Path(out if out is not None else cfg.get("outputs", "out"))
    out.mkdir(parents=True, exist_ok=True)
    files = []

    def emit(name):
        files.append(name)
        return out / name

    with _Stage("config"):
        params, center = surface_setup(cfg)
        h = float(cfg["surface"].get("fd_step", FD_STEP))
        n_xi, n_eta = int(cfg["grid"]["n_xi"]), int(cfg["grid"]["n_eta"])
        pairing = cfg["grid"].get("target_pairing", "equilibrium")
        Z = float(cfg["load"]["Z"])
        material = Material(**cfg["material"])
        ocfg = optimization_config(cfg)
        recipe = list(cfg.get("transformation") or [])
        lmap: LaguerreMap | None = map_from_recipe(recipe) if recipe else None
        with open(emit("manifest.json"), "w") as fh:
            json.dump(manifest(cfg), fh, indent=1, sort_keys=True)

    with _Stage("surface"):
        base = build_field(params, n_xi, n_eta, Z, center=center, h=h)
        labels = {"before": check_label_convention(base)}
        write_field_csv(emit("field.csv"), base)
        write_surface_obj(emit("surface.obj"), base)
    fields = {"before": base}
    if stop >= 1 and lmap is not None:
        with _Stage("transform"):
            moved = transform_field(base, lmap)
            labels["after"] = check_label_convention(moved)
            fields["after"] = moved
            write_field_csv(emit("field_transformed.csv"), moved)
            write_surface_obj(emit("surface_transformed.obj"), moved)
    I0 = {k: v.I0 for k, v in fields.items()}
    report = PipelineReport(cfg, config_hash(cfg), I0, {}, {}, None, labels, files)
    if stop < 2:
        return report

    cases = {}
    with _Stage("target"):
        for name, fld in fields.items():
            model = build_model(fld, n_xi, n_eta, pairing)
            cases[name] = Case(name, fld, model, GridFrame(model, material))
            suffix = "" if name == "before" else "_transformed"
            model.write_json(emit(f"model{suffix}.json"))
            model.write_obj(emit(f"gridshell{suffix}.obj"))
        m = cases["before"].model
        report.counts = {"nodes": m.n_nodes, "members": m.n_members, "groups": len(m.groups),
                         "variable_groups": len(m.variable_groups),
                         "objective_members": int(m.in_objective.sum())}
        report.geometry = report_geometry_checks(cases.get("after", cases["before"]).model)
    if stop < 3:
        return report

    results = {}
    with _Stage("optimize"):
        names = ["before"] if until == "adjust" else list(cases)
        for name in names:
            case = cases[name]
            res = optimize_radii(case.model, ocfg, case.frame)
            results[name] = res
            _evaluate(case, "Initial", np.full(len(case.model.groups), ocfg.R_init))
            _evaluate(case, "Optimal", res.radii)
            suffix = "before" if name == "before" else "after"
            res.write_trace(emit(f"trace_{suffix}.csv"))
            sol = case.frame.solve(res.radii)
            write_members_csv(emit(f"members_{suffix}.csv"), case.model, res.radii, sol.N)
            ratio, _ = shear_load_ratio(sol, case.model)
            write_nodes_csv(emit(f"nodes_{suffix}.csv"), case.model, ratio, nodal_shear(sol, case.model)[0])
            case.rows["Optimal"]["iterations"] = res.nm.n_iter
            case.rows["Optimal"]["converged"] = res.nm.converged
    if stop >= 4 and "after" in cases:
        with _Stage("adjust"):
            case = cases["after"]
            R_hat = results["before"].radii
            _evaluate(case, "Before adjustment", R_hat)
            adj_cfg = cfg.get("adjustment", {})
            adj = stress_ratio_adjust(case.model, R_hat, case.frame, bounds=(ocfg.R_lower, ocfg.R_upper),
                                      clamp=tuple(adj_cfg.get("clamp", RATIO_CLAMP)),
                                      exponent=float(adj_cfg.get("exponent", 1.0)))
            _evaluate(case, "After adjustment", adj.radii)
            report.adjustment = {"group_factor": {str(k): v for k, v in adj.group_factor.items()},
                                 "excluded_members": adj.excluded,
                                 "radii": adj.radii.tolist()}
            with open(emit("adjust.json"), "w") as fh:
                json.dump(report.adjustment, fh, indent=1)
    report.tables = {name: c.rows for name, c in cases.items() if c.rows}
    if stop < 5:
        return report

    with _Stage("report"):
        text = []
        if "before" in report.tables:
            text.append(_table_text("Before transformation", report.tables["before"]))
        if "after" in report.tables:
            text.append(_table_text("After transformation", report.tables["after"]))
        g = report.geometry
        text.append("Corners (mm): " + ", ".join(f"({x:.1f}, {y:.1f})" for x, y in g["corners"]))
        text.append(f"Rise (mm): {g['rise']:.1f}")
        text.append("I0 (N): " + ", ".join(f"{k} {v:.1f}" for k, v in I0.items()))
        with open(emit("report.txt"), "w") as fh:
            fh.write("\n\n".join(text) + "\n")
        files.append("report.json")
        with open(out / "report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
    return report
