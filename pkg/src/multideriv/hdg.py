"""Hybridized DG for periodic 2D hyperbolic systems with two-derivative stepping.

Unknowns: element-local sigma (2m components, the weak gradient of w) and
w (m components), plus a trace lambda (m components) on every edge.  One step
solves, for the new level,

  aux:    (sigma, phi) + (w, div phi) - <lambda, phi . n> = 0
  eq:     (w - w^n, phi) - dt [E(x^{n+1}; a2, b2) + E(x^n; a1, b1)] = 0
  hybrid: sum over both sides of <Phi^{n+1} (+ Phi^n), mu> = 0

with  E(x; a, b) = sum_d (a f_d(w) - dt b D_d, d_d phi) + <Phi, phi>,
      D_d = A_d(w) sum_i A_i(w) sigma_i,
      Phi = -a (f(lambda).n + eta (w - lambda)) + dt b (D(lambda, sigma).n - theta' (w - lambda)),
and theta' = theta * sign(b), so the theta term always damps.

Newton steps are condensed onto lambda (Schur complement of the element
blocks) and local increments recovered element by element.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .basis import Basis1D, BasisTri, gauss_legendre, triangle_quadrature
from .exceptions import GMRESStalled, LocalSolverSingular, NewtonDiverged
from .linalg import BlockJacobiPreconditioner, DirectSolver, TripletAssembler, gmres
from .mesh import FACE_VERTICES, REFERENCE_VERTICES
from .solver1d import time_levels

log = logging.getLogger(__name__)


def _einsum(*args):
    return np.einsum(*args, optimize=True)


@dataclass
class HDGConfig:
    eta: float = None  # None: max spectral radius of n . f'(w) at t^n
    theta: float = None  # None: same as eta
    theta_sign: str = "dissipative"  # or "literal" (no sign inversion)
    hybrid: str = "recompute"  # or "printed", "carry"
    newton_tol: float = 1e-10
    max_newton: int = 20
    linear_solver: str = "gmres"  # or "direct"
    linear_tol: float = 1e-12
    restart: int = 60
    max_iter: int = 5000


@dataclass
class HDGState:
    sigma: np.ndarray  # (Ne, 2, m, Np)
    w: np.ndarray  # (Ne, m, Np)
    lam: np.ndarray  # (Nf, m, p+1)

    def copy(self):
        return HDGState(self.sigma.copy(), self.w.copy(), self.lam.copy())


@dataclass
class Stabilization:
    eta: float
    theta: float


class HDG2D:
    def __init__(self, mesh, p, flux, config=None, vol_degree=None):
        self.mesh = mesh
        self.p = p
        self.flux = flux
        self.m = flux.m
        self.config = config or HDGConfig()
        if self.config.theta_sign not in ("dissipative", "literal"):
            raise ValueError(f"unknown theta_sign {self.config.theta_sign!r}")
        if self.config.hybrid not in ("recompute", "printed", "carry"):
            raise ValueError(f"unknown hybrid mode {self.config.hybrid!r}")
        self.basis = BasisTri(p)
        self.Np = self.basis.dim
        self.nt = p + 1  # trace modes per component
        self.ne = mesh.n_elements
        self.nf = mesh.n_edges
        m, Np = self.m, self.Np
        self.nl = 3 * m * Np
        self.nlam = m * self.nt  # per edge
        self._geometry(vol_degree if vol_degree is not None else 2 * p + 5)
        self._cache = {}
        self.stats = {"steps": 0, "newton": 0, "gmres": 0}

    # -- geometry and reference data ------------------------------------------

    def _geometry(self, vol_degree):
        mesh, p = self.mesh, self.p
        J = mesh.jacobians
        self.detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        Jinv = np.linalg.inv(J)
        q = triangle_quadrature(vol_degree)
        self.vq = q
        self.wq = q.weights
        self.Vq = self.basis.values(q.nodes[:, 0], q.nodes[:, 1])  # (nq, Np)
        gref = self.basis.gradients(q.nodes[:, 0], q.nodes[:, 1])  # (nq, Np, 2)
        self.grad = _einsum("qjr,krd->kqjd", gref, Jinv)  # (Ne, nq, Np, 2)
        gq = gauss_legendre(p + 3)
        t = 0.5 * (gq.nodes + 1.0)
        self.tq = t
        self.wf = 0.5 * gq.weights  # sums to 1 on [0, 1]
        edge_basis = Basis1D(p)
        psi_t = np.sqrt(2.0) * edge_basis.values(2.0 * t - 1.0)
        psi_r = np.sqrt(2.0) * edge_basis.values(1.0 - 2.0 * t)
        self.Vf = np.empty((3, len(t), self.Np))
        for f, (i, j) in enumerate(FACE_VERTICES):
            pts = REFERENCE_VERTICES[i] + np.outer(t, REFERENCE_VERTICES[j] - REFERENCE_VERTICES[i])
            self.Vf[f] = self.basis.values(pts[:, 0], pts[:, 1])
        # edge test functions seen from each element face; the plus side runs
        # along the edge in the opposite direction
        self.Psi = np.where(mesh.face_is_minus[:, :, None, None], psi_t[None, None], psi_r[None, None])
        self.normals, self.lengths = mesh.face_normals()
        self.fw = self.wf[None, None, :] * self.lengths[:, :, None]  # (Ne, 3, nqf)
        # global trace dofs touched by each element, (Ne, 3 * m * nt)
        base = mesh.element_edges[:, :, None] * self.nlam + np.arange(self.nlam)[None, None, :]
        self.lam_index = base.reshape(self.ne, -1)
        self._aux_w, self._aux_lam = self._aux_blocks()

    def _aux_blocks(self):
        """Linear pieces of the auxiliary equation (the sigma block is detJ I)."""
        m, Np, nt = self.m, self.Np, self.nt
        eye = np.eye(m)
        # (w, d_d phi_j) -> rows (d, c, j), cols (c', i)
        Gw = _einsum("q,k,kqjd,qi->kdji", self.wq, self.detJ, self.grad, self.Vq)
        aux_w = _einsum("kdji,ce->kdcjei", Gw, eye).reshape(self.ne, 2 * m * Np, m * Np)
        # -<lambda, phi_j n_d> -> cols (f, c', i)
        L = -_einsum("kfq,kfd,fqj,kfqi->kdjfi", self.fw, self.normals, self.Vf, self.Psi)
        aux_lam = _einsum("kdjfi,ce->kdcjfei", L, eye).reshape(self.ne, 2 * m * Np, 3 * m * nt)
        return aux_w, aux_lam

    # -- state helpers -----------------------------------------------------------

    def local_vector(self, state):
        return np.concatenate([state.sigma.reshape(self.ne, -1), state.w.reshape(self.ne, -1)], axis=1)

    def split_local(self, u):
        m, Np = self.m, self.Np
        s = u[:, : 2 * m * Np].reshape(self.ne, 2, m, Np)
        w = u[:, 2 * m * Np :].reshape(self.ne, m, Np)
        return s, w

    def element_lam(self, lam):
        """Trace coefficients per element face, (Ne, 3, m, nt)."""
        return lam[self.mesh.element_edges]

    def project(self, func, t=0.0):
        """Element projection of w and edge projection of lambda for func(x, y, t)."""
        q = triangle_quadrature(2 * self.p + 6)
        V = self.basis.values(q.nodes[:, 0], q.nodes[:, 1])
        xy = self.mesh.to_physical(np.arange(self.ne)[:, None], q.nodes[None, :, 0], q.nodes[None, :, 1])
        vals = func(xy[..., 0], xy[..., 1], t)  # (Ne, nq, m)
        w = _einsum("q,kqc,qj->kcj", q.weights, vals, V)
        gq = gauss_legendre(self.p + 4)
        s = 0.5 * (gq.nodes + 1.0)
        psi = np.sqrt(2.0) * Basis1D(self.p).values(gq.nodes)
        k0 = self.mesh.edge_elements[:, 0]
        f0 = self.mesh.edge_faces[:, 0]
        c = self.mesh.corners
        a = c[k0, f0]
        b = c[k0, (f0 + 1) % 3]
        pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        ev = func(pts[..., 0], pts[..., 1], t)  # (Nf, nqf, m)
        lam = _einsum("q,eqc,qj->ecj", 0.5 * gq.weights, ev, psi)
        return w, lam

    def solve_sigma(self, w, lam):
        """sigma from the auxiliary equation given w and lambda (explicit, mass is diagonal)."""
        rhs = -(_einsum("kij,kj->ki", self._aux_w, w.reshape(self.ne, -1)) + _einsum("kij,kj->ki", self._aux_lam, self.element_lam(lam).reshape(self.ne, -1)))
        return (rhs / self.detJ[:, None]).reshape(self.ne, 2, self.m, self.Np)

    def initial_state(self, problem):
        w, lam = self.project(problem.exact, 0.0)
        return HDGState(self.solve_sigma(w, lam), w, lam)

    def integral(self, state):
        """Domain integral of each component of w, shape (m,)."""
        return _einsum("q,k,kcj,qj->c", self.wq, self.detJ, state.w, self.Vq)

    def l2_errors(self, state, exact, t):
        q = triangle_quadrature(2 * self.p + 6)
        V = self.basis.values(q.nodes[:, 0], q.nodes[:, 1])
        xy = self.mesh.to_physical(np.arange(self.ne)[:, None], q.nodes[None, :, 0], q.nodes[None, :, 1])
        diff = _einsum("kcj,qj->kqc", state.w, V) - exact(xy[..., 0], xy[..., 1], t)
        return np.sqrt(_einsum("q,k,kqc->c", q.weights, self.detJ, diff**2))

    def evaluate(self, state, points, tol=1e-12):
        """Point values of w, shape (npts, m); points are wrapped into the domain."""
        pts = np.mod(np.asarray(points, dtype=float), self.mesh.L)
        Jinv = np.linalg.inv(self.mesh.jacobians)
        ref = _einsum("kij,pkj->pki", Jinv, pts[:, None, :] - self.mesh.corners[None, :, 0, :])
        inside = (ref[..., 0] >= -tol) & (ref[..., 1] >= -tol) & (ref.sum(axis=-1) <= 1.0 + tol)
        if not inside.any(axis=1).all():
            raise ValueError("some points are not covered by the mesh")
        k = inside.argmax(axis=1)
        r = ref[np.arange(len(pts)), k]
        V = self.basis.values(r[:, 0], r[:, 1])
        return _einsum("pcj,pj->pc", state.w[k], V)

    # -- stabilization ---------------------------------------------------------------

    def stabilization(self, state):
        cfg = self.config
        eta = cfg.eta
        if eta is None:
            wf = _einsum("fqj,kcj->kfqc", self.Vf, state.w)
            n = np.broadcast_to(self.normals[:, :, None, :], wf.shape[:-1] + (2,))
            eta = float(np.max(self.flux.max_speed(wf, n)))
        theta = cfg.theta if cfg.theta is not None else eta
        if eta < 0 or theta < 0:
            raise ValueError("stabilization parameters must be nonnegative")
        return Stabilization(eta, theta)

    def _theta_eff(self, theta, beta):
        if self.config.theta_sign == "dissipative":
            return theta * np.sign(beta)
        return theta

    # -- pointwise terms ---------------------------------------------------------------

    def terms(self, state, alpha, beta, dt, stab, jac=False):
        """Level contributions E (Ne, m, Np) and face fluxes H (Ne, 3, m, nt).

        With jac=True also returns the derivative blocks w.r.t. the local
        unknowns (sigma, w) and the element's three traces; jac="trace"
        returns only the face-diagonal trace blocks (Ne, 3, m, nt, m, nt).
        """
        fl, m = self.flux, self.m
        eta, theta = stab.eta, self._theta_eff(stab.theta, beta)
        c2 = dt * beta
        w = _einsum("kcj,qj->kqc", state.w, self.Vq)
        sg = _einsum("kdcj,qj->kqdc", state.sigma, self.Vq)
        A = fl.jacobian(w)  # (Ne, nq, 2, m, m)
        S = _einsum("kqiab,kqib->kqa", A, sg)  # sum_i A_i sigma_i
        Vd = alpha * fl.flux(w) - c2 * _einsum("kqdab,kqb->kqda", A, S)
        E = _einsum("q,k,kqdc,kqjd->kcj", self.wq, self.detJ, Vd, self.grad)

        lam_e = self.element_lam(state.lam)
        lf = _einsum("kfqj,kfcj->kfqc", self.Psi, lam_e)
        wf = _einsum("fqj,kcj->kfqc", self.Vf, state.w)
        sf = _einsum("fqj,kdcj->kfqdc", self.Vf, state.sigma)
        n = self.normals
        Al = fl.jacobian(lf)  # (Ne, 3, nqf, 2, m, m)
        An = _einsum("kfd,kfqdab->kfqab", n, Al)
        Sl = _einsum("kfqiab,kfqib->kfqa", Al, sf)
        fn = _einsum("kfd,kfqdc->kfqc", n, fl.flux(lf))
        Dn = _einsum("kfqab,kfqb->kfqa", An, Sl)
        jump = wf - lf
        Phi = -alpha * (fn + eta * jump) + c2 * (Dn - theta * jump)
        E += _einsum("kfq,kfqc,fqj->kcj", self.fw, Phi, self.Vf)
        H = _einsum("kfq,kfqc,kfqj->kfcj", self.fw, Phi, self.Psi)
        if not jac:
            return E, H

        Np, nt = self.Np, self.nt
        eye = np.eye(m)
        # face partials
        dPw = -(alpha * eta + c2 * theta)
        if fl.linear:
            dDl = 0.0
        else:
            dAl = fl.jacobian_derivative(lf)
            dAn = _einsum("kfd,kfqdabe->kfqabe", n, dAl)
            dSl = _einsum("kfqiabe,kfqib->kfqae", dAl, sf)
            dDl = _einsum("kfqabe,kfqb->kfqae", dAn, Sl) + _einsum("kfqab,kfqbe->kfqae", An, dSl)
        dPl = -alpha * (An - eta * eye) + c2 * (dDl + theta * eye)
        if jac == "trace":
            Hl_diag = _einsum("kfq,kfqj,kfqae,kfqi->kfajei", self.fw, self.Psi, dPl, self.Psi)
            return E, H, Hl_diag
        dPs = c2 * _einsum("kfqab,kfqibe->kfqiae", An, Al)
        # volume partials
        if fl.linear:
            dVdw = alpha * A
        else:
            dA = fl.jacobian_derivative(w)  # (Ne, nq, 2, m, m, m)
            dS = _einsum("kqiabe,kqib->kqae", dA, sg)
            dVdw = alpha * A - c2 * (_einsum("kqdabe,kqb->kqdae", dA, S) + _einsum("kqdab,kqbe->kqdae", A, dS))
        dVds = -c2 * _einsum("kqdab,kqibe->kqdiae", A, A)
        Ew = _einsum("q,k,kqjd,kqdae,qi->kajei", self.wq, self.detJ, self.grad, dVdw, self.Vq)
        Es = _einsum("q,k,kqjd,kqdiae,qn->kajien", self.wq, self.detJ, self.grad, dVds, self.Vq)
        fw = self.fw
        VV = _einsum("kfq,fqj,fqi->kfji", fw, self.Vf, self.Vf)
        Ew = Ew + dPw * _einsum("kji,ae->kajei", VV.sum(axis=1), eye)
        Es = Es + _einsum("kfq,fqj,kfqiae,fqn->kajien", fw, self.Vf, dPs, self.Vf)
        El = _einsum("kfq,fqj,kfqae,kfqi->kajfei", fw, self.Vf, dPl, self.Psi)
        PV = _einsum("kfq,kfqj,fqi->kfji", fw, self.Psi, self.Vf)
        Hw = dPw * _einsum("kfji,ae->kfajei", PV, eye)
        Hs = _einsum("kfq,kfqj,kfqiae,fqn->kfajien", fw, self.Psi, dPs, self.Vf)
        Hl_diag = _einsum("kfq,kfqj,kfqae,kfqi->kfajei", fw, self.Psi, dPl, self.Psi)
        nE = m * Np
        nL = 3 * m * nt
        dE_du = np.concatenate([Es.reshape(self.ne, nE, 2 * m * Np), Ew.reshape(self.ne, nE, nE)], axis=2)
        dE_dl = El.reshape(self.ne, nE, nL)
        dH_du = np.concatenate([Hs.reshape(self.ne, nL, 2 * m * Np), Hw.reshape(self.ne, nL, nE)], axis=2)
        dH_dl = np.zeros((self.ne, 3, m * nt, 3, m * nt))
        for f in range(3):
            dH_dl[:, f, :, f, :] = Hl_diag[:, f].reshape(self.ne, m * nt, m * nt)
        return E, H, dE_du, dE_dl, dH_du, dH_dl.reshape(self.ne, nL, nL)

    # -- residuals ---------------------------------------------------------------------

    def aux_residual(self, state):
        """(Ne, 2, m, Np) residual of the weak gradient relation."""
        r = self.detJ[:, None] * state.sigma.reshape(self.ne, -1)
        r += _einsum("kij,kj->ki", self._aux_w, state.w.reshape(self.ne, -1))
        r += _einsum("kij,kj->ki", self._aux_lam, self.element_lam(state.lam).reshape(self.ne, -1))
        return r.reshape(self.ne, 2, self.m, self.Np)

    def residual_R(self, state, stab):
        """Element residual of the first-derivative operator, (Ne, m, Np)."""
        return self.terms(state, 1.0, 0.0, 1.0, stab)[0]

    def residual_R2(self, state, stab):
        """Element residual of the second-derivative operator, (Ne, m, Np)."""
        return self.terms(state, 0.0, 1.0, 1.0, stab)[0]

    def gather_hybrid(self, H):
        """Sum face contributions (Ne, 3, m, nt) into edges, (Nf, m, nt)."""
        out = np.zeros((self.nf, self.m, self.nt))
        np.add.at(out, self.mesh.element_edges, H)
        return out

    def hybrid_residual(self, state, scheme, dt, stab, old=None):
        """Trace equation; ``old`` adds the time-level-n face fluxes."""
        H = self.terms(state, scheme.alpha2, scheme.beta2, dt, stab)[1]
        G = self.gather_hybrid(H)
        if old is not None:
            G = G + old
        return G

    # -- Newton pieces ---------------------------------------------------------------------

    def balanced_traces(self, state, alpha, beta, dt, stab, tol=1e-13, max_iter=20):
        """Edge-local traces making the level-(alpha, beta) face fluxes single valued."""
        x = state.copy()
        nb = self.nlam
        key = ("balance", alpha, beta, round(dt, 15), stab.eta, stab.theta)
        for _ in range(max_iter):
            if self.flux.linear and key in self._cache:
                H = self.terms(x, alpha, beta, dt, stab)[1]
                G = self.gather_hybrid(H).reshape(self.nf, -1)
                x.lam = x.lam - _einsum("eij,ej->ei", self._cache[key], G).reshape(x.lam.shape)
                return x
            _, H, Hl = self.terms(x, alpha, beta, dt, stab, jac="trace")
            G = self.gather_hybrid(H).reshape(self.nf, -1)
            scale = max(1.0, float(np.abs(H).max()))
            if np.abs(G).max() <= tol * scale:
                return x
            J = np.zeros((self.nf, nb, nb))
            np.add.at(J, self.mesh.element_edges, Hl.reshape(self.ne, 3, nb, nb))
            try:
                Jinv = np.linalg.inv(J)
            except np.linalg.LinAlgError as exc:
                raise LocalSolverSingular("singular edge block while balancing traces") from exc
            if self.flux.linear:
                self._cache[key] = Jinv
            x.lam = x.lam - _einsum("eij,ej->ei", Jinv, G).reshape(x.lam.shape)
        raise NewtonDiverged("edge-local trace balance did not converge")

    def _old_terms(self, state, scheme, dt, stab):
        mode = self.config.hybrid
        zero = np.zeros((self.nf, self.m, self.nt))
        if scheme.alpha1 == 0.0 and scheme.beta1 == 0.0:
            return np.zeros_like(state.w), zero
        if mode == "recompute":
            state = self.balanced_traces(state, scheme.alpha1, scheme.beta1, dt, stab)
        E, H = self.terms(state, scheme.alpha1, scheme.beta1, dt, stab)
        G = self.gather_hybrid(H) if mode == "carry" else zero
        return E, G

    def system_residual(self, state, wn, old, scheme, dt, stab):
        """Local residuals F (Ne, nl) and trace residual G (Nf * m * nt,)."""
        E_old, G_old = old
        E, H = self.terms(state, scheme.alpha2, scheme.beta2, dt, stab)
        eq = self.detJ[:, None, None] * (state.w - wn) - dt * (E + E_old)
        F = np.concatenate([self.aux_residual(state).reshape(self.ne, -1), eq.reshape(self.ne, -1)], axis=1)
        G = self.gather_hybrid(H) + G_old
        return F, G.ravel()

    def local_blocks(self, state, scheme, dt, stab):
        """Element Jacobian blocks A (Ne, nl, nl), B (Ne, nl, nL), C (Ne, nL, nl), D (Ne, nL, nL)."""
        _, _, dE_du, dE_dl, dH_du, dH_dl = self.terms(state, scheme.alpha2, scheme.beta2, dt, stab, jac=True)
        m, Np = self.m, self.Np
        ns = 2 * m * Np
        A = np.zeros((self.ne, self.nl, self.nl))
        idx = np.arange(ns)
        A[:, idx, idx] = self.detJ[:, None]
        A[:, :ns, ns:] = self._aux_w
        A[:, ns:, :] = -dt * dE_du
        A[:, ns + np.arange(m * Np), ns + np.arange(m * Np)] += self.detJ[:, None]
        B = np.concatenate([self._aux_lam, -dt * dE_dl], axis=1)
        return A, B, dH_du, dH_dl

    def condense(self, A, B, C, D, F, G):
        """Schur complement on the traces: S dl = rhs."""
        try:
            sol = np.linalg.solve(A, np.concatenate([B, F[:, :, None]], axis=2))
        except np.linalg.LinAlgError as exc:
            raise LocalSolverSingular("element block is singular") from exc
        AinvB, AinvF = sol[:, :, :-1], sol[:, :, -1]
        n = self.nf * self.nlam
        asm = TripletAssembler((n, n))
        asm.add_blocks(self.lam_index, self.lam_index, D - _einsum("kij,kjl->kil", C, AinvB))
        S = asm.finalize()
        rhs = -G.copy()
        np.add.at(rhs, self.lam_index, _einsum("kij,kj->ki", C, AinvF))
        return S, rhs, AinvB, AinvF

    def recover(self, AinvB, AinvF, dlam):
        """Local increments from a trace increment."""
        return -AinvF - _einsum("kij,kj->ki", AinvB, dlam[self.lam_index])

    def monolithic_direction(self, A, B, C, D, F, G):
        """Newton direction from the uncondensed sparse system (test oracle)."""
        nu = self.ne * self.nl
        n = nu + self.nf * self.nlam
        asm = TripletAssembler((n, n))
        loc = np.arange(nu).reshape(self.ne, self.nl)
        lam = nu + self.lam_index
        asm.add_blocks(loc, loc, A)
        asm.add_blocks(loc, lam, B)
        asm.add_blocks(lam, loc, C)
        asm.add_blocks(lam, lam, D)
        J = asm.finalize()
        rhs = -np.concatenate([F.ravel(), G])
        x = DirectSolver(J)(rhs)
        return x[:nu].reshape(self.ne, self.nl), x[nu:]

    def trace_solver(self, S):
        """Callable solving S x = b with the configured method."""
        cfg = self.config
        if cfg.linear_solver == "direct":
            return DirectSolver(S)
        M = BlockJacobiPreconditioner(S, self.nlam)

        def solve(rhs, step=None):
            try:
                x, it = gmres(S, rhs, M=M, rel_tol=cfg.linear_tol, restart=cfg.restart, max_iter=cfg.max_iter)
            except GMRESStalled as exc:
                if S.shape[0] <= 20000:
                    log.warning("GMRES stalled (%s); falling back to a direct solve", exc)
                    return DirectSolver(S)(rhs)
                raise GMRESStalled(str(exc), x=exc.x, residual=exc.residual, step=step) from exc
            self.stats["gmres"] += it
            return x

        return solve

    def solve_trace(self, S, rhs, step=None):
        solver = self.trace_solver(S)
        return solver(rhs) if isinstance(solver, DirectSolver) else solver(rhs, step)

    def residual_norm(self, F, G):
        """Max-norm of residuals scaled to unit element measure and edge length."""
        lf = np.abs(F).max(axis=1) / self.detJ
        edge_len = self.lengths[self.mesh.edge_elements[:, 0], self.mesh.edge_faces[:, 0]]
        lg = np.abs(G.reshape(self.nf, -1)).max(axis=1) / edge_len
        return float(max(lf.max(), lg.max()))

    # -- time stepping -------------------------------------------------------------------------

    def step(self, state, scheme, dt, step_index=None):
        stab = self.stabilization(state)
        old = self._old_terms(state, scheme, dt, stab)
        wn = state.w
        x = state.copy()
        F, G = self.system_residual(x, wn, old, scheme, dt, stab)
        res = self.residual_norm(F, G)
        it = 0
        key = (round(dt, 15), stab.eta, stab.theta)
        while res > self.config.newton_tol:
            if it >= self.config.max_newton or not np.isfinite(res):
                raise NewtonDiverged(f"Newton residual {res:.3e} after {it} iterations", step=step_index)
            if self.flux.linear and key in self._cache:
                Ainv, C, AinvB, solver = self._cache[key]
                AinvF = _einsum("kij,kj->ki", Ainv, F)
                rhs = -G.copy()
                np.add.at(rhs, self.lam_index, _einsum("kij,kj->ki", C, AinvF))
            else:
                A, B, C, D = self.local_blocks(x, scheme, dt, stab)
                S, rhs, AinvB, AinvF = self.condense(A, B, C, D, F, G)
                solver = self.trace_solver(S)
                if self.flux.linear:
                    self._cache[key] = (np.linalg.inv(A), C, AinvB, solver)
            dlam = solver(rhs) if isinstance(solver, DirectSolver) else solver(rhs, step_index)
            du = self.recover(AinvB, AinvF, dlam)
            s, w = self.split_local(self.local_vector(x) + du)
            x = HDGState(s, w, x.lam + dlam.reshape(x.lam.shape))
            F, G = self.system_residual(x, wn, old, scheme, dt, stab)
            res = self.residual_norm(F, G)
            it += 1
        self.stats["steps"] += 1
        self.stats["newton"] += it
        return x

    def integrate(self, state, scheme, T, dt, callback=None):
        t = 0.0
        for i, h in enumerate(time_levels(T, dt)):
            state = self.step(state, scheme, h, step_index=i + 1)
            t += h
            if callback is not None:
                callback(t, state)
        return state


def with_config(hdg, **changes):
    """Copy of an HDG2D discretization with modified config."""
    return HDG2D(hdg.mesh, hdg.p, hdg.flux, replace(hdg.config, **changes))
