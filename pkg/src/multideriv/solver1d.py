"""Implicit two-derivative time stepping for the 1D LDG discretization.

Every step solves one coupled system for X = (w, sigma, tau, psi) at the new
time level.  Rows are scaled so the unknowns are O(1):

    w - w^n - (dt/M) [a2 R(X) + dt b2 R2(X) + a1 R(X^n) + dt b1 R2(X^n)] = 0
    (M sigma - A+ w) / M = 0,  (M tau - A- sigma) / M = 0,  (M psi - A+ tau) / M = 0

and Newton's method is applied with the analytic Jacobian (or a finite
difference one, for checking).
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import NewtonDiverged, SingularSystem
from .ldg import LDG1D, AuxState1D, PolyField
from .linalg import DirectSolver

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    newton_tol: float = 1e-10
    linear_tol: float = 1e-12
    max_newton: int = 25
    jacobian: str = "analytic"  # or "fd"
    fd_step: float = 1e-7
    d2f_test: str = "normal"


@dataclass
class StepLog:
    steps: int = 0
    newton_iterations: int = 0
    max_iterations: int = 0  # largest Newton count in a single step
    factorizations: int = 0
    max_residual: float = 0.0


def time_levels(T, dt):
    """Step sizes reaching T exactly; the last step is shortened if needed."""
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    n = max(int(math.ceil(T / dt - 1e-9)), 0)
    if n == 0:
        return []
    sizes = [dt] * (n - 1)
    sizes.append(T - dt * (n - 1))
    return sizes


class Solver1D:
    def __init__(self, op: LDG1D, scheme, config=None):
        self.op = op
        self.scheme = scheme
        self.config = config or SolverConfig()
        if self.config.jacobian not in ("analytic", "fd"):
            raise ValueError(f"unknown jacobian mode {self.config.jacobian!r}")
        self.log = StepLog()
        self._cache = {}
        self._aux_jac = op.aux_jacobian() / op.mass

    # -- residual ----------------------------------------------------------

    def _old_terms(self, xn, dt):
        s = self.scheme
        return self.op.combined_residual(xn, s.alpha1, dt * s.beta1)

    def residual(self, X, wn, old, dt):
        op, s = self.op, self.scheme
        x = AuxState1D.from_vector(op.mesh, op.p, X)
        rhs = op.combined_residual(x, s.alpha2, dt * s.beta2) + old
        Fw = x.w.coeffs - wn - (dt / op.mass) * rhs
        aux = np.concatenate([r.ravel() for r in op.aux_residual(x)]) / op.mass
        return np.concatenate([Fw.ravel(), aux])

    def jacobian(self, X, dt):
        op, s = self.op, self.scheme
        if self.config.jacobian == "fd":
            return self._fd_jacobian(X, dt)
        x = AuxState1D.from_vector(op.mesh, op.p, X)
        Jr = op.combined_jacobian(x, s.alpha2, dt * s.beta2)
        top = sp.hstack([sp.identity(op.ndof), sp.csr_matrix((op.ndof, 3 * op.ndof))]) - (dt / op.mass) * Jr
        return sp.vstack([top, self._aux_jac], format="csc")

    def _fd_jacobian(self, X, dt):
        zeros = np.zeros(self.op.ndof)
        zero_old = np.zeros((self.op.ne, self.op.nb))
        F0 = self.residual(X, zeros.reshape(zero_old.shape), zero_old, dt)
        J = np.empty((X.size, X.size))
        for i in range(X.size):
            d = self.config.fd_step * (1.0 + abs(X[i]))
            Xp = X.copy()
            Xp[i] += d
            J[:, i] = (self.residual(Xp, zero_old, zero_old, dt) - F0) / d
        return sp.csc_matrix(J)

    def residual_norm(self, F):
        return float(np.sqrt(self.op.mass * np.dot(F, F)))

    # -- stepping ------------------------------------------------------------

    def _solver_for(self, X, dt):
        linear = self.op.flux.linear and self.config.jacobian == "analytic"
        key = round(dt, 15)
        if linear and key in self._cache:
            return self._cache[key]
        solver = DirectSolver(self.jacobian(X, dt))
        self.log.factorizations += 1
        if linear:
            self._cache[key] = solver
        return solver

    def step(self, x: AuxState1D, dt, step_index=None):
        op = self.op
        Xn = x.vector()
        wn = x.w.coeffs
        old = self._old_terms(x, dt)
        X = Xn.copy()
        F = self.residual(X, wn, old, dt)
        res = self.residual_norm(F)
        it = 0
        while res > self.config.newton_tol:
            if it >= self.config.max_newton or not np.isfinite(res):
                raise NewtonDiverged(f"Newton residual {res:.3e} after {it} iterations", step=step_index)
            try:
                dX = self._solver_for(X, dt)(-F)
            except SingularSystem as exc:
                raise SingularSystem(str(exc), step=step_index) from exc
            X = X + dX
            F = self.residual(X, wn, old, dt)
            res = self.residual_norm(F)
            it += 1
        self.log.newton_iterations += it
        self.log.max_iterations = max(self.log.max_iterations, it)
        self.log.steps += 1
        self.log.max_residual = max(self.log.max_residual, res)
        return AuxState1D.from_vector(op.mesh, op.p, X)

    def integrate(self, x0: AuxState1D, T, dt, callback=None):
        x = x0
        t = 0.0
        for i, h in enumerate(time_levels(T, dt)):
            x = self.step(x, h, step_index=i + 1)
            t += h
            if callback is not None:
                callback(t, x)
        log.debug("integrated to t=%.6g in %d steps, %d Newton iterations", t, self.log.steps, self.log.newton_iterations)
        return x


def init_aux_discontinuous(op: LDG1D, w0: PolyField):
    """Auxiliary variables consistent with the discrete derivative chain of w0."""
    return op.solve_aux(w0)


def init_smooth(op: LDG1D, derivatives, breakpoints=()):
    """Project w0 and its first three exact derivatives separately."""
    fields = [op.project(f, breakpoints) for f in derivatives]
    return AuxState1D(*fields)
