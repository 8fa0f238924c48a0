"""1D local discontinuous Galerkin operators on periodic uniform meshes.

Fields are stored as modal coefficients of shape (n_elements, p+1) in the
orthonormal Legendre basis of each element, so the element mass matrix is
(h/2) I.  Interface i sits between element i (its "minus" side) and element
i+1 (the "plus" side), with periodic wrap.

The auxiliary chain sigma ~ w_x, tau ~ w_xx, psi ~ w_xxx uses alternating
fluxes w^+, sigma^-, tau^+, psi^-.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import Basis1D, gauss_legendre_degree, project_l2
from .linalg import TripletAssembler

FIELDS = ("w", "sigma", "tau", "psi")


# --------------------------------------------------------------------------
# fluxes


class Flux1D:
    linear = False
    name = "generic"

    def f(self, w):
        raise NotImplementedError

    def df(self, w):
        raise NotImplementedError

    def ddf(self, w):
        raise NotImplementedError

    def d2f(self, w, sigma, tau):
        """Discrete f(w)_xx and its partials (value, d/dw, d/dsigma, d/dtau)."""
        raise ValueError(f"no discretization of f(w)_xx registered for flux {self.name!r}")


class NoFlux(Flux1D):
    linear = True
    name = "none"

    def f(self, w):
        return np.zeros_like(w)

    def df(self, w):
        return np.zeros_like(w)

    def ddf(self, w):
        return np.zeros_like(w)

    def d2f(self, w, sigma, tau):
        z = np.zeros_like(w)
        return z, z, z, z


class LinearFlux(Flux1D):
    linear = True
    name = "linear"

    def __init__(self, c):
        self.c = float(c)

    def f(self, w):
        return self.c * w

    def df(self, w):
        return np.full_like(w, self.c)

    def ddf(self, w):
        return np.zeros_like(w)

    def d2f(self, w, sigma, tau):
        z = np.zeros_like(w)
        return self.c * tau, z, z, np.full_like(w, self.c)


class BurgersFlux(Flux1D):
    name = "burgers"

    def f(self, w):
        return 0.5 * w * w

    def df(self, w):
        return w

    def ddf(self, w):
        return np.ones_like(w)

    def d2f(self, w, sigma, tau):
        return sigma * sigma + w * tau, tau, 2.0 * sigma, w


def upwind(flux):
    """Upwind flux for f = c w; returns value and partials in (w-, w+)."""
    if not isinstance(flux, (LinearFlux, NoFlux)):
        raise ValueError("upwind flux requires a linear flux")
    c = getattr(flux, "c", 0.0)

    def riemann(wm, wp):
        if c >= 0:
            return c * wm, np.full_like(wm, c), np.zeros_like(wp)
        return c * wp, np.zeros_like(wm), np.full_like(wp, c)

    return riemann


def local_lax_friedrichs(flux):
    def riemann(wm, wp):
        am, ap = flux.df(wm), flux.df(wp)
        use_m = np.abs(am) >= np.abs(ap)
        lam = np.where(use_m, np.abs(am), np.abs(ap))
        dlam_m = np.where(use_m, np.sign(am) * flux.ddf(wm), 0.0)
        dlam_p = np.where(use_m, 0.0, np.sign(ap) * flux.ddf(wp))
        jump = wp - wm
        val = 0.5 * (flux.f(wm) + flux.f(wp)) - 0.5 * lam * jump
        d_m = 0.5 * am + 0.5 * lam - 0.5 * jump * dlam_m
        d_p = 0.5 * ap - 0.5 * lam - 0.5 * jump * dlam_p
        return val, d_m, d_p

    return riemann


def alternating_fluxes(w, sigma, tau, psi):
    """Numerical traces from (minus, plus) pairs: (w+, sigma-, tau+, psi-)."""
    return w[1], sigma[0], tau[1], psi[0]


# --------------------------------------------------------------------------
# fields


@dataclass
class PolyField:
    mesh: object
    p: int
    coeffs: np.ndarray  # (n_elements, p+1)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(self.mesh.n_elements, self.p + 1)

    def __call__(self, x):
        k, xi = self.mesh.locate(x)
        V = Basis1D(self.p).values(xi)
        return np.einsum("ij,ij->i", V, self.coeffs[k])

    def l2_norm(self):
        return float(np.sqrt(0.5 * self.mesh.h * np.sum(self.coeffs**2)))

    def integral(self):
        return float(self.mesh.h / np.sqrt(2.0) * self.coeffs[:, 0].sum())


@dataclass
class AuxState1D:
    w: PolyField
    sigma: PolyField
    tau: PolyField
    psi: PolyField

    def vector(self):
        return np.concatenate([self.w.coeffs.ravel(), self.sigma.coeffs.ravel(), self.tau.coeffs.ravel(), self.psi.coeffs.ravel()])

    @classmethod
    def from_vector(cls, mesh, p, x):
        parts = np.split(np.asarray(x, dtype=float), 4)
        return cls(*(PolyField(mesh, p, c) for c in parts))

    def fields(self):
        return self.w, self.sigma, self.tau, self.psi


# --------------------------------------------------------------------------
# operators


class LDG1D:
    """Weak-form LDG operators for w_t + f(w)_x = eps w_xx on a periodic mesh.

    ``d2f_test`` picks how the interface term of eps * D^2 f is tested in the
    second-derivative residual: "normal" tests against phi * n (integration
    by parts), "literal" tests against phi_x at both element endpoints.
    """

    def __init__(self, mesh, p, flux=None, eps=0.0, riemann=None, quad_degree=None, d2f_test="normal"):
        self.mesh = mesh
        self.p = p
        self.flux = flux if flux is not None else NoFlux()
        self.eps = float(eps)
        if riemann is None:
            riemann = upwind(self.flux) if self.flux.linear else local_lax_friedrichs(self.flux)
        self.riemann = riemann
        if d2f_test not in ("normal", "literal"):
            raise ValueError(f"d2f_test must be 'normal' or 'literal', got {d2f_test!r}")
        self.d2f_test = d2f_test
        self.basis = Basis1D(p)
        if quad_degree is None:
            quad_degree = 2 * p + 1 if self.flux.linear else 3 * p + 1
        self.quad = gauss_legendre_degree(max(quad_degree, 1))
        xq = self.quad.nodes
        self.V = self.basis.values(xq)  # (nq, n)
        self.Vx = self.basis.derivatives(xq)  # reference derivative
        self.wq = self.quad.weights
        self.phiL = self.basis.values(-1.0)[0]
        self.phiR = self.basis.values(1.0)[0]
        self.dphiL = self.basis.derivatives(-1.0)[0]
        self.dphiR = self.basis.derivatives(1.0)[0]
        self.mass = 0.5 * mesh.h
        self.ne = mesh.n_elements
        self.nb = p + 1
        self.ndof = self.ne * self.nb
        self._aux_plus = self._derivative_matrix(take_plus=True)
        self._aux_minus = self._derivative_matrix(take_plus=False)

    # -- evaluation helpers ------------------------------------------------

    def at_quad(self, U):
        return U @ self.V.T

    def traces(self, U):
        """(minus, plus) values at every interface."""
        return U @ self.phiR, np.roll(U @ self.phiL, -1)

    def weak(self, vol, bnd, bnd_grad=None):
        """sum_q w_q vol phi_j' + <bnd, phi_j n> (+ bnd_grad tested against phi_j')."""
        res = (vol * self.wq) @ self.Vx
        res += np.outer(bnd, self.phiR) - np.outer(np.roll(bnd, 1), self.phiL)
        if bnd_grad is not None:
            s = 2.0 / self.mesh.h
            res += s * (np.outer(bnd_grad, self.dphiR) + np.outer(np.roll(bnd_grad, 1), self.dphiL))
        return res

    def _derivative_matrix(self, take_plus):
        """Sparse map U -> weak(-U, U^+/-) so that M * dU/dx = A U weakly."""
        ne, nb = self.ne, self.nb
        vol = -(self.Vx.T * self.wq) @ self.V  # (j, i)
        asm = TripletAssembler((self.ndof, self.ndof))
        k = np.arange(ne)
        idx = k[:, None] * nb + np.arange(nb)[None, :]
        asm.add_blocks(idx, idx, np.broadcast_to(vol, (ne, nb, nb)))
        right = np.roll(idx, -1, axis=0)
        left = np.roll(idx, 1, axis=0)
        if take_plus:
            # right interface uses the right neighbour's left trace; left
            # interface uses this element's own left trace
            asm.add_blocks(idx, right, np.broadcast_to(np.outer(self.phiR, self.phiL), (ne, nb, nb)))
            asm.add_blocks(idx, idx, np.broadcast_to(-np.outer(self.phiL, self.phiL), (ne, nb, nb)))
        else:
            asm.add_blocks(idx, idx, np.broadcast_to(np.outer(self.phiR, self.phiR), (ne, nb, nb)))
            asm.add_blocks(idx, left, np.broadcast_to(-np.outer(self.phiL, self.phiR), (ne, nb, nb)))
        return asm.finalize()

    # -- projections ---------------------------------------------------------

    def project(self, func, breakpoints=()):
        quad = gauss_legendre_degree(2 * self.p + 8)
        out = np.empty((self.ne, self.nb))
        nodes = self.mesh.nodes
        for k in range(self.ne):
            lo, hi = nodes[k], nodes[k + 1]
            local = [2.0 * (b - lo) / (hi - lo) - 1.0 for b in breakpoints if lo < b < hi]
            out[k] = project_l2(lambda xi: func(self.mesh.to_physical(k, xi)), self.basis, quad, local)
        return PolyField(self.mesh, self.p, out)

    # -- auxiliary variables ---------------------------------------------------

    def solve_aux(self, w):
        """sigma, tau, psi from w through the alternating-flux derivative chain."""
        W = w.coeffs if isinstance(w, PolyField) else np.asarray(w).reshape(self.ne, self.nb)
        sigma = (self._aux_plus @ W.ravel()) / self.mass
        tau = (self._aux_minus @ sigma) / self.mass
        psi = (self._aux_plus @ tau) / self.mass
        return AuxState1D(*(PolyField(self.mesh, self.p, c) for c in (W, sigma, tau, psi)))

    def aux_residual(self, x):
        """Residuals of the three auxiliary equations, each (n_elements, p+1)."""
        w, s, t, q = (f.coeffs.ravel() for f in x.fields())
        return (
            (self.mass * s - self._aux_plus @ w).reshape(self.ne, self.nb),
            (self.mass * t - self._aux_minus @ s).reshape(self.ne, self.nb),
            (self.mass * q - self._aux_plus @ t).reshape(self.ne, self.nb),
        )

    def aux_jacobian(self):
        """Sparse Jacobian of the auxiliary rows w.r.t. (w, sigma, tau, psi)."""
        M = self.mass * sp.identity(self.ndof, format="csr")
        Z = None
        return sp.bmat(
            [
                [-self._aux_plus, M, Z, Z],
                [Z, -self._aux_minus, M, Z],
                [Z, Z, -self._aux_plus, M],
            ],
            format="csr",
        )

    # -- pointwise forms ---------------------------------------------------------

    def _unpack(self, x):
        U = [f.coeffs for f in x.fields()]
        q = [self.at_quad(u) for u in U]
        tr = [self.traces(u) for u in U]
        return q, tr

    def _form_R(self, x):
        (w, s, _, _), trs = self._unpack(x)
        fl, eps = self.flux, self.eps
        wm, wp = trs[0]
        sm = trs[1][0]
        fhat, dm, dp = self.riemann(wm, wp)
        vol = fl.f(w) - eps * s
        dvol = {0: fl.df(w), 1: np.full_like(w, -eps)}
        bnd = -(fhat - eps * sm)
        dbnd = {(0, 0): -dm, (0, 1): -dp, (1, 0): np.full_like(sm, eps)}
        return vol, dvol, bnd, dbnd, None, {}

    def _form_R2(self, x):
        (w, s, t, q), trs = self._unpack(x)
        fl, eps = self.flux, self.eps
        a, da = fl.df(w), fl.ddf(w)
        D, Dw, Ds, Dt = fl.d2f(w, s, t)
        vol = -(a * a * s - eps * a * t) + eps * D - eps * eps * q
        dvol = {
            0: -(2.0 * a * da * s - eps * da * t) + eps * Dw,
            1: -a * a + eps * Ds,
            2: eps * a + eps * Dt,
            3: np.full_like(w, -eps * eps),
        }
        wh = trs[0][1]
        sh = trs[1][0]
        th = trs[2][1]
        qh = trs[3][0]
        ah, dah = fl.df(wh), fl.ddf(wh)
        Dh, Dhw, Dhs, Dht = fl.d2f(wh, sh, th)
        bnd = ah * ah * sh - eps * ah * th + eps * eps * qh
        dbnd = {
            (0, 1): 2.0 * ah * dah * sh - eps * dah * th,
            (1, 0): ah * ah,
            (2, 1): -eps * ah,
            (3, 0): np.full_like(qh, eps * eps),
        }
        dgrad = {}
        grad = None
        if self.d2f_test == "normal":
            bnd = bnd - eps * Dh
            dbnd[(0, 1)] = dbnd[(0, 1)] - eps * Dhw
            dbnd[(1, 0)] = dbnd[(1, 0)] - eps * Dhs
            dbnd[(2, 1)] = dbnd[(2, 1)] - eps * Dht
        else:
            grad = -eps * Dh
            dgrad = {(0, 1): -eps * Dhw, (1, 0): -eps * Dhs, (2, 1): -eps * Dht}
        return vol, dvol, bnd, dbnd, grad, dgrad

    # -- residuals ---------------------------------------------------------------

    def residual_R(self, x):
        """Weak form of -f(w)_x + eps w_xx against every basis function."""
        vol, _, bnd, _, _, _ = self._form_R(x)
        return self.weak(vol, bnd)

    def residual_R2(self, x):
        """Weak form of w_tt expressed through spatial derivatives."""
        vol, _, bnd, _, grad, _ = self._form_R2(x)
        return self.weak(vol, bnd, grad)

    def d2f(self, x):
        """Volume values at quadrature points and interface values of D^2 f."""
        (w, s, t, _), trs = self._unpack(x)
        vol = self.flux.d2f(w, s, t)[0]
        trace = self.flux.d2f(trs[0][1], trs[1][0], trs[2][1])[0]
        return vol, trace

    def combined_residual(self, x, a, b):
        """a * residual_R + b * residual_R2."""
        return a * self.residual_R(x) + b * self.residual_R2(x)

    def combined_jacobian(self, x, a, b):
        """Sparse Jacobian of a*R + b*R2 w.r.t. the stacked (w, sigma, tau, psi)."""
        forms = []
        if a != 0.0:
            forms.append((a, self._form_R(x)))
        if b != 0.0:
            forms.append((b, self._form_R2(x)))
        ne, nb = self.ne, self.nb
        asm = TripletAssembler((self.ndof, 4 * self.ndof))
        idx = np.arange(ne)[:, None] * nb + np.arange(nb)[None, :]
        right = np.roll(idx, -1, axis=0)
        left = np.roll(idx, 1, axis=0)
        s = 2.0 / self.mesh.h
        for coef, (_, dvol, _, dbnd, _, dgrad) in forms:
            for fld, d in dvol.items():
                blocks = np.einsum("q,qj,kq,qi->kji", self.wq, self.Vx, d, self.V)
                asm.add_blocks(idx, fld * self.ndof + idx, coef * blocks)
            for test_R, test_L, dd in (
                (self.phiR, self.phiL, dbnd),
                (s * self.dphiR, -s * self.dphiL, dgrad),
            ):
                for (fld, side), d in dd.items():
                    trial = self.phiR if side == 0 else self.phiL
                    col_R = idx if side == 0 else right
                    col_L = left if side == 0 else idx
                    # interface k contributes +test_R to element k and
                    # -test_L to element k+1
                    asm.add_blocks(idx, fld * self.ndof + col_R, coef * d[:, None, None] * np.outer(test_R, trial))
                    asm.add_blocks(idx, fld * self.ndof + col_L, -coef * np.roll(d, 1)[:, None, None] * np.outer(test_L, trial))
        return asm.finalize()
