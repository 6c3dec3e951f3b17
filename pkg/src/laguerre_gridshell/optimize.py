"""Group-radius optimization against target axial forces, and one-shot resizing.

The design vector holds the radii of the *variable* groups only; fixed
groups keep ``R_init``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .frame import GridFrame, pipe_section, radius_from_area
from .gridshell import GridshellModel

logger = logging.getLogger(__name__)

RATIO_CLAMP = (0.25, 4.0)


@dataclass(frozen=True)
class OptimizationConfig:
    R_init: float = 100.0
    R_lower: float = 30.0
    R_upper: float = 300.0
    max_iters: int = 5000
    f_tol: float = 1e-6
    simplex_perturbation: float = 0.05

    def __post_init__(self):
        if not 0 < self.R_lower <= self.R_init <= self.R_upper:
            raise ValueError("need 0 < R_lower <= R_init <= R_upper")
        if self.max_iters < 1 or self.f_tol < 0 or self.simplex_perturbation <= 0:
            raise ValueError("invalid optimizer settings")


@dataclass
class Deviation:
    F: float
    max_dev: float
    mean_dev: float


class Objective:
    """Squared axial-force deviation over the objective members.

    Call with the variable-group radii; :meth:`full_radii` expands them.
    """

    def __init__(self, model: GridshellModel, cfg: OptimizationConfig = OptimizationConfig(),
                 frame: GridFrame | None = None):
        if model.targets is None:
            raise ValueError("model has no target forces")
        self.model = model
        self.cfg = cfg
        self.frame = frame if frame is not None else GridFrame(model)
        self.var = np.array(model.variable_groups, dtype=int)
        self.base = np.full(len(model.groups), float(cfg.R_init))
        self.mask = model.in_objective
        self.n_evals = 0

    def full_radii(self, x) -> np.ndarray:
        R = self.base.copy()
        R[self.var] = x
        return R

    def deviation(self, R_full) -> Deviation:
        sol = self.frame.solve(R_full)
        d = (sol.N - self.model.targets)[self.mask]
        return deviation_stats(d)

    def __call__(self, x) -> float:
        self.n_evals += 1
        return self.deviation(self.full_radii(x)).F


def deviation_stats(d) -> Deviation:
    d = np.asarray(d, float)
    if d.size == 0:
        return Deviation(0.0, 0.0, 0.0)
    a = np.abs(d)
    return Deviation(float(np.dot(d, d)), float(a.max()), float(a.mean()))


def objective(model: GridshellModel, radii, frame: GridFrame | None = None) -> Deviation:
    """``F = sum (N_i - N_i*)^2`` over objective members for full group radii."""
    frame = frame if frame is not None else GridFrame(model)
    sol = frame.solve(radii)
    return deviation_stats((sol.N - model.targets)[model.in_objective])


@dataclass
class NelderMeadResult:
    x: np.ndarray
    f: float
    n_iter: int
    n_evals: int
    converged: bool
    trace: list = field(default_factory=list)
    restarts: int = 0


def _initial_simplex(x0, lo, hi, perturbation):
    simplex = [x0]
    for j in range(len(x0)):
        v = x0.copy()
        v[j] += perturbation * (hi[j] - lo[j])
        if v[j] > hi[j]:
            v[j] = x0[j] - perturbation * (hi[j] - lo[j])
        simplex.append(np.clip(v, lo, hi))
    return np.array(simplex)


def nelder_mead(fun: Callable, x0, lower, upper, f_tol: float = 1e-6, max_iters: int = 5000,
                perturbation: float = 0.05, callback: Callable | None = None,
                max_restarts: int = 10) -> NelderMeadResult:
    """Box-constrained Nelder-Mead; candidates are clipped into the box before evaluation.

    The simplex has converged when ``f_max - f_min <= f_tol * |f_min|``.
    Clipping can flatten the simplex onto a bound face, so on convergence a
    fresh simplex is built around the best point; the run stops when such a
    restart gains less than ``f_tol`` relative, after ``max_restarts`` restarts,
    or after ``max_iters`` iterations in total.  ``trace`` holds the best value
    after each iteration and never increases.
    """
    lo = np.asarray(lower, float)
    hi = np.asarray(upper, float)
    x0 = np.clip(np.asarray(x0, float), lo, hi)
    n = len(x0)
    if n == 0:
        raise ValueError("no design variables")
    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    n_evals = 0

    def f(x):
        nonlocal n_evals
        n_evals += 1
        return float(fun(x))

    simplex = _initial_simplex(x0, lo, hi, perturbation)
    fs = np.array([f(v) for v in simplex])

    trace = []
    converged = False
    restarts = 0
    f_restart = np.inf
    it = 0
    while it < max_iters:
        order = np.argsort(fs, kind="stable")
        simplex, fs = simplex[order], fs[order]
        if fs[-1] - fs[0] <= f_tol * abs(fs[0]):
            if f_restart - fs[0] <= f_tol * abs(fs[0]) or restarts >= max_restarts:
                converged = True
                break
            restarts += 1
            f_restart = fs[0]
            best = simplex[0].copy()
            simplex = _initial_simplex(best, lo, hi, perturbation)
            fs = np.concatenate([[fs[0]], [f(v) for v in simplex[1:]]])
            continue
        it += 1
        c = simplex[:-1].mean(axis=0)
        xr = np.clip(c + alpha * (c - simplex[-1]), lo, hi)
        fr = f(xr)
        if fr < fs[0]:
            xe = np.clip(c + gamma * (xr - c), lo, hi)
            fe = f(xe)
            simplex[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fs[-2]:
            simplex[-1], fs[-1] = xr, fr
        else:
            if fr < fs[-1]:
                xc = np.clip(c + rho * (xr - c), lo, hi)
                fc = f(xc)
                accept = fc <= fr
            else:
                xc = np.clip(c + rho * (simplex[-1] - c), lo, hi)
                fc = f(xc)
                accept = fc < fs[-1]
            if accept:
                simplex[-1], fs[-1] = xc, fc
            else:
                simplex[1:] = simplex[0] + sigma * (simplex[1:] - simplex[0])
                fs[1:] = [f(v) for v in simplex[1:]]
        best = int(np.argmin(fs))
        trace.append(float(fs[best]))
        if callback is not None:
            callback(it, simplex[best], fs[best])
    best = int(np.argmin(fs))
    if not converged:
        logger.info("nelder_mead stopped at max_iters=%d (spread %.3e)", max_iters, fs.max() - fs.min())
    logger.debug("nelder_mead: %d iterations, %d evaluations, %d restarts", it, n_evals, restarts)
    return NelderMeadResult(simplex[best].copy(), float(fs[best]), it, n_evals, converged, trace, restarts)


@dataclass
class OptimizationResult:
    radii: np.ndarray
    initial: Deviation
    optimal: Deviation
    nm: NelderMeadResult
    trace: list

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "F", "max_dev", "mean_dev"])
            for row in self.trace:
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def optimize_radii(model: GridshellModel, cfg: OptimizationConfig = OptimizationConfig(),
                   frame: GridFrame | None = None) -> OptimizationResult:
    """Minimize the force deviation over the variable-group radii from a uniform start."""
    obj = Objective(model, cfg, frame)
    nvar = len(obj.var)
    x0 = np.full(nvar, float(cfg.R_init))
    lo = np.full(nvar, float(cfg.R_lower))
    hi = np.full(nvar, float(cfg.R_upper))
    initial = obj.deviation(obj.full_radii(x0))
    trace = [(0, initial.F, initial.max_dev, initial.mean_dev)]
    last = [initial.F]

    def cb(it, x, fx):
        # deviation stats only when the best point improves
        if fx < last[0]:
            d = obj.deviation(obj.full_radii(x))
            last[0] = fx
            trace.append((it, d.F, d.max_dev, d.mean_dev))
        else:
            trace.append((it,) + tuple(trace[-1][1:]))

    nm = nelder_mead(obj, x0, lo, hi, cfg.f_tol, cfg.max_iters, cfg.simplex_perturbation, cb)
    R = obj.full_radii(nm.x)
    final = obj.deviation(R)
    logger.info("optimized %d groups: mean dev %.1f -> %.1f N in %d iterations",
                nvar, initial.mean_dev, final.mean_dev, nm.n_iter)
    return OptimizationResult(R, initial, final, nm, trace)


@dataclass
class AdjustResult:
    radii: np.ndarray
    group_factor: dict
    excluded: list
    N1: np.ndarray


def stress_ratio_adjust(model_after: GridshellModel, R_hat, frame: GridFrame | None = None,
                        bounds: tuple[float, float] | None = None,
                        clamp: tuple[float, float] = RATIO_CLAMP,
                        exponent: float = 1.0) -> AdjustResult:
    """Resize variable groups by ``S = S_hat * N1 / N*`` without re-optimizing.

    ``N1`` are the forces of the transformed model analysed with ``R_hat``.
    Per member the ratio is clamped to ``clamp``; a group's area is scaled by
    the geometric mean over its objective members.  Members whose realized and
    target forces differ in sign are skipped.  ``exponent`` raises the group
    factor to a power; ``-1`` gives the inverse rule ``S_hat * N* / N1``.
    """
    frame = frame if frame is not None else GridFrame(model_after)
    R_hat = np.asarray(R_hat, float)
    N1 = frame.solve(R_hat).N
    Nt = model_after.targets
    A_hat = pipe_section(R_hat, frame.t_ratio).A
    R_new = R_hat.copy()
    factors = {}
    excluded = []
    for g in model_after.groups:
        if not g.variable:
            continue
        ids = np.array([m for m in g.member_ids if model_after.in_objective[m]], dtype=int)
        ok = []
        for m in ids:
            if Nt[m] == 0 or N1[m] * Nt[m] < 0:
                excluded.append(int(m))
                logger.warning("member %d excluded from adjustment (N1=%.3g, N*=%.3g)", m, N1[m], Nt[m])
            else:
                ok.append(m)
        if not ok:
            continue
        rho = np.clip(N1[ok] / Nt[ok], *clamp)
        fac = float(np.exp(exponent * np.mean(np.log(rho))))
        factors[g.id] = fac
        if fac != 1.0:
            R_new[g.id] = float(radius_from_area(A_hat[g.id] * fac, frame.t_ratio))
    if bounds is not None:
        R_new = np.clip(R_new, *bounds)
    return AdjustResult(R_new, factors, excluded, N1)


def write_result_json(path, model: GridshellModel, radii, N, extra: dict | None = None) -> None:
    doc = {"group_radii": [float(r) for r in radii],
           "members": [{"id": m, "group": int(model.group[m]), "N": float(N[m]),
                        "N_target": float(model.targets[m]),
                        "in_objective": bool(model.in_objective[m])}
                       for m in range(model.n_members)]}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
