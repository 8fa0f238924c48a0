"""Single runs, convergence studies and CSV output."""
import csv
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .basis import Basis1D, gauss_legendre_degree
from .exceptions import SolverError
from .hdg import HDG2D, HDGConfig
from .ldg import LDG1D
from .mesh import build_mesh_1d, build_tri_mesh
from .problems import PROBLEMS_1D, PROBLEMS_2D
from .schemes import scheme_by_name
from .solver1d import Solver1D, SolverConfig, init_aux_discontinuous, init_smooth

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    problem: str = "heat"
    p: tuple = (1,)
    scheme: str = "third"
    ratio: float = 1.0
    levels: tuple = (4, 8, 16, 32)  # ints are element counts, floats mesh widths
    T: Optional[float] = None
    newton_tol: float = 1e-10
    linear_tol: float = 1e-12
    eta: Optional[float] = None
    theta: Optional[float] = None
    hybrid: str = "recompute"
    theta_sign: str = "dissipative"
    d2f_test: str = "normal"
    init: str = "auto"  # auto | smooth | aux
    out: str = "results"

    def __post_init__(self):
        if not self.ratio > 0:
            raise ValueError("ratio must be positive")
        if not self.levels:
            raise ValueError("need at least one refinement level")
        if self.problem not in PROBLEMS_1D and self.problem not in PROBLEMS_2D:
            raise ValueError(f"unknown problem {self.problem!r}")
        hs = [self.mesh_width(lv) for lv in self.levels]
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("refinement levels must be strictly decreasing in h")

    @property
    def dimension(self):
        return 1 if self.problem in PROBLEMS_1D else 2

    @property
    def length(self):
        return 1.0 if self.dimension == 1 else make_problem(self.problem).L

    def mesh_width(self, level):
        return self.length / level if isinstance(level, (int, np.integer)) else float(level)

    def elements(self, level):
        if isinstance(level, (int, np.integer)):
            return int(level)
        n = self.length / float(level)
        if abs(n - round(n)) > 1e-8 * n:
            raise ValueError(f"h = {level} does not divide the domain length {self.length}")
        return int(round(n))


@dataclass
class ConvergenceRow:
    h: float
    error: float
    order: Optional[float] = None
    components: dict = field(default_factory=dict)


def make_problem(name, T=None):
    if name in PROBLEMS_1D:
        prob = PROBLEMS_1D[name]()
    elif name in PROBLEMS_2D:
        prob = PROBLEMS_2D[name]()
    else:
        raise ValueError(f"unknown problem {name!r}")
    if T is not None:
        prob = replace(prob, T=float(T))
    return prob


def compute_l2_error(field, exact, t):
    """L2 distance between a 1D PolyField and exact(x, t)."""
    mesh, p = field.mesh, field.p
    q = gauss_legendre_degree(2 * p + 6)
    V = Basis1D(p).values(q.nodes)
    x = mesh.to_physical(np.arange(mesh.n_elements)[:, None], q.nodes[None, :])
    diff = field.coeffs @ V.T - np.asarray(exact(x.ravel(), t)).reshape(x.shape)
    return float(np.sqrt(0.5 * mesh.h * np.sum(q.weights * diff**2)))


def observed_orders(hs, errors):
    orders = [None]
    for i in range(1, len(errors)):
        a, b = errors[i - 1], errors[i]
        if not (a > 0 and b > 0):  # also catches NaN rows
            orders.append(float("nan"))
            continue
        orders.append(math.log(a / b) / math.log(hs[i - 1] / hs[i]))
    return orders


# -- single runs --------------------------------------------------------------


def run_1d(problem, p, n, scheme, ratio, init="auto", solver_config=None):
    """Solve a 1D problem to its final time; returns (operator, final, solver, initial)."""
    sc = solver_config or SolverConfig()
    mesh = build_mesh_1d(*problem.domain, n)
    op = LDG1D(mesh, p, problem.flux, problem.eps, d2f_test=sc.d2f_test)
    solver = Solver1D(op, scheme, sc)
    if init == "auto":
        init = "smooth" if problem.derivatives is not None else "aux"
    if init == "smooth":
        if problem.derivatives is None:
            raise ValueError(f"problem {problem.name!r} has no analytic derivatives")
        x0 = init_smooth(op, problem.derivatives, problem.breakpoints)
    elif init == "aux":
        x0 = init_aux_discontinuous(op, op.project(problem.w0, problem.breakpoints))
    else:
        raise ValueError(f"unknown initialization {init!r}")
    x = solver.integrate(x0, problem.T, ratio * mesh.h)
    return op, x, solver, x0


def run_2d(problem, p, n, scheme, ratio, hdg_config=None):
    """Solve a 2D problem on the n x n structured mesh; returns (hdg, final, initial)."""
    mesh = build_tri_mesh(problem.L, n)
    hdg = HDG2D(mesh, p, problem.flux, hdg_config)
    s0 = hdg.initial_state(problem)
    s = hdg.integrate(s0, scheme, problem.T, ratio * mesh.h)
    return hdg, s, s0


def solver_config(cfg):
    return SolverConfig(newton_tol=cfg.newton_tol, linear_tol=cfg.linear_tol, d2f_test=cfg.d2f_test)


def hdg_config(cfg):
    return HDGConfig(
        eta=cfg.eta,
        theta=cfg.theta,
        hybrid=cfg.hybrid,
        theta_sign=cfg.theta_sign,
        newton_tol=cfg.newton_tol,
        linear_tol=cfg.linear_tol,
    )


def solve_level(cfg, p, level):
    """Error (and per-component errors) of one run."""
    prob = make_problem(cfg.problem, cfg.T)
    scheme = scheme_by_name(cfg.scheme)
    n = cfg.elements(level)
    if cfg.dimension == 1:
        op, x, _, _ = run_1d(prob, p, n, scheme, cfg.ratio, cfg.init, solver_config(cfg))
        return compute_l2_error(x.w, prob.exact, prob.T), {}
    hdg, s, _ = run_2d(prob, p, n, scheme, cfg.ratio, hdg_config(cfg))
    errs = hdg.l2_errors(s, prob.exact, prob.T)
    names = prob.components or tuple(f"w{i + 1}" for i in range(len(errs)))
    return float(errs[0]), dict(zip(names, map(float, errs)))


def run_convergence(cfg, p):
    """Rows in decreasing h; failed levels are recorded as NaN rows."""
    hs, errs, comps = [], [], []
    failed = []
    for level in cfg.levels:
        h = cfg.mesh_width(level)
        try:
            e, c = solve_level(cfg, p, level)
        except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.warning("%s p=%d h=%g failed: %s", cfg.problem, p, h, exc)
            failed.append((h, str(exc)))
            e, c = float("nan"), {}
        hs.append(h)
        errs.append(e)
        comps.append(c)
    orders = observed_orders(hs, errs)
    rows = [ConvergenceRow(h, e, o, c) for h, e, o, c in zip(hs, errs, orders, comps)]
    return rows, failed


# -- output ---------------------------------------------------------------------


def _fmt(v):
    return "" if v is None else repr(float(v))


def emit_csv(rows, path):
    if not rows:
        raise ValueError("empty table")
    try:
        with open(path, "w", newline="") as fh:
            fh.write("h,error,order\n")
            for r in rows:
                fh.write(f"{_fmt(r.h)},{_fmt(r.error)},{_fmt(r.order)}\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_component_csvs(rows, stem):
    """One extra table per solution component for systems."""
    names = list(rows[0].components) if rows else []
    paths = []
    for name in names:
        errs = [r.components.get(name, float("nan")) for r in rows]
        hs = [r.h for r in rows]
        sub = [ConvergenceRow(h, e, o) for h, e, o in zip(hs, errs, observed_orders(hs, errs))]
        paths.append(emit_csv(sub, f"{stem}_{name}.csv"))
    return paths


def read_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            order = float(rec["order"]) if rec["order"] else None
            rows.append(ConvergenceRow(float(rec["h"]), float(rec["error"]), order))
    return rows


def emit_plotdata(rows, path):
    """Two columns, log10(h) and log10(error), for a log-log plot."""
    if not rows:
        raise ValueError("empty table")
    try:
        with open(path, "w") as fh:
            for r in rows:
                if np.isfinite(r.error) and r.error > 0:
                    fh.write(f"{math.log10(r.h)!r} {math.log10(r.error)!r}\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def series_stem(out, problem, p, scheme):
    return os.path.join(out, f"{problem}_p{p}_{scheme}")
